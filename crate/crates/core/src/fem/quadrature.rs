//! Collapsed (Duffy) Gauss–Legendre product rules on the tetrahedron.

use crate::scalar::Real;

/// Gauss–Legendre nodes and weights on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = (1.0 - z) / 2.0;
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// A rule on the tetrahedron in barycentric coordinates; weights sum to one
/// (multiply by the element volume).
#[derive(Debug, Clone)]
pub struct TetQuadrature<T> {
    pub points: Vec<[T; 4]>,
    pub weights: Vec<T>,
}

impl<T: Real> TetQuadrature<T> {
    /// Product rule with `n` points per direction, exact for total degree `2n − 3`.
    pub fn collapsed(n: usize) -> Self {
        let (x, w) = gauss_legendre_unit(n);
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (u, v, s) = (x[i], x[j], x[k]);
                    let px = u;
                    let py = v * (1.0 - u);
                    let pz = s * (1.0 - u) * (1.0 - v);
                    let wt = 6.0 * w[i] * w[j] * w[k] * (1.0 - u) * (1.0 - u) * (1.0 - v);
                    points.push([T::lit(1.0 - px - py - pz), T::lit(px), T::lit(py), T::lit(pz)]);
                    weights.push(T::lit(wt));
                }
            }
        }
        Self { points, weights }
    }

    /// Smallest collapsed rule exact for polynomials of total degree `degree`.
    pub fn exact_for_degree(degree: usize) -> Self {
        Self::collapsed(((degree + 3) + 1) / 2)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
