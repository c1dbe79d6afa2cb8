use std::ops::{Index, IndexMut};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;
use crate::sparse::symmetry_tolerance;

/// Row-major dense matrix used by the coarsest-level solver and the dense oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<T>) -> Result<Self> {
        check_dim("dense from_row_major", nrows * ncols, data.len())?;
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            check_dim("dense from_rows", ncols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds the matrix column by column from a linear map applied to unit vectors.
    pub fn from_columns_of(n_in: usize, n_out: usize, mut f: impl FnMut(&[T]) -> Result<Vec<T>>) -> Result<Self> {
        let mut m = Self::zeros(n_out, n_in);
        let mut e = vec![T::zero(); n_in];
        for j in 0..n_in {
            e[j] = T::one();
            let col = f(&e)?;
            check_dim("from_columns_of output", n_out, col.len())?;
            for (i, v) in col.into_iter().enumerate() {
                m[(i, j)] = v;
            }
            e[j] = T::zero();
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("dense matvec", self.ncols, x.len())?;
        Ok((0..self.nrows)
            .map(|i| {
                let mut s = T::zero();
                for (a, b) in self.row(i).iter().zip(x) {
                    s += *a * *b;
                }
                s
            })
            .collect())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim("dense matmul", self.ncols, other.nrows)?;
        let mut c = Self::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let crow = &mut c.data[i * other.ncols..(i + 1) * other.ncols];
                for (cv, ov) in crow.iter_mut().zip(orow) {
                    *cv += a * *ov;
                }
            }
        }
        Ok(c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim("dense add rows", self.nrows, other.nrows)?;
        check_dim("dense add cols", self.ncols, other.ncols)?;
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-T::one()))
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|v| *v * alpha).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_symmetric_with(&self, tol: T) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        for i in 0..self.nrows {
            for j in 0..i {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                if (a - b).abs() > tol * T::one().max(a.abs()) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_symmetric_with(symmetry_tolerance::<T>())
    }

    /// Replaces the matrix by `(M + Mᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let n = self.nrows;
        for i in 0..n {
            for j in 0..i {
                let avg = (self[(i, j)] + self[(j, i)]) * T::lit(0.5);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// Symmetric eigendecomposition by cyclic Jacobi rotations.
    ///
    /// Returns eigenvalues in ascending order and the matching eigenvectors as
    /// the columns of the second matrix.
    pub fn sym_eigen(&self) -> Result<(Vec<T>, DenseMatrix<T>)> {
        if !self.is_symmetric() {
            return Err(Error::NotSymmetric { row: 0, col: 0 });
        }
        let n = self.nrows;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let scale = a.frobenius_norm();
        let target = T::lit(1e-12) * scale.max(T::min_positive_value());
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += a[(i, j)] * a[(i, j)];
                    }
                }
            }
            if off.sqrt() <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a[(p, p)];
                    let aqq = a[(q, q)];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let vals = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vecs = Self::zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                vecs[(k, new)] = v[(k, old)];
            }
        }
        Ok((vals, vecs))
    }

    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::factor(self)
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::factor(self)
    }

    /// Solves `M x = b` for SPD `M`.
    pub fn cholesky_solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.cholesky()?.solve(b)
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.ncols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.ncols + j]
    }
}

/// Lower-triangular Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: DenseMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(m: &DenseMatrix<T>) -> Result<Self> {
        if !m.is_symmetric() {
            return Err(Error::NotSymmetric { row: 0, col: 0 });
        }
        let n = m.nrows();
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor_l(&self) -> &DenseMatrix<T> {
        &self.l
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, x: &mut [T]) -> Result<()> {
        check_dim("cholesky solve", self.dim(), x.len())?;
        self.forward_in_place(x);
        self.backward_in_place(x);
        Ok(())
    }

    /// `x <- L⁻¹ x`
    pub fn forward_in_place(&self, x: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = x[i];
            let row = self.l.row(i);
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
    }

    /// `x <- L⁻ᵀ x`
    pub fn backward_in_place(&self, x: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn factor(m: &DenseMatrix<T>) -> Result<Self> {
        check_dim("lu square", m.nrows(), m.ncols())?;
        let n = m.nrows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.frobenius_norm().max(T::min_positive_value());
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                if lu[(i, k)].abs() > best {
                    best = lu[(i, k)].abs();
                    p = i;
                }
            }
            if best <= T::epsilon() * scale * T::lit(1e-3) {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in (k + 1)..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.lu.nrows();
        check_dim("lu solve", n, b.len())?;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<DenseMatrix<T>> {
        let n = self.lu.nrows();
        DenseMatrix::from_columns_of(n, n, |e| self.solve(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseMatrix<f64> {
        let data = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_row_major(n, m, data).unwrap()
    }

    #[test]
    fn eigen_closed_forms() {
        let (vals, _) = DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0]).sym_eigen().unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let m = DenseMatrix::<f64>::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (vals, _) = m.sym_eigen().unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstruction_and_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = random_dense(&mut rng, 8, 8);
        m.symmetrize();
        let (vals, vecs) = m.sym_eigen().unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let fro = m.frobenius_norm();
        let lam = DenseMatrix::from_diagonal(&vals);
        let rec = vecs.matmul(&lam).unwrap().matmul(&vecs.transpose()).unwrap();
        assert!(rec.sub(&m).unwrap().frobenius_norm() <= 1e-10 * fro);
        for (k, lam) in vals.iter().enumerate() {
            let v = vecs.column(k);
            let mv = m.matvec(&v).unwrap();
            let res: f64 = mv.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * fro);
        }
        let sum: f64 = vals.iter().sum();
        assert!((sum - m.trace()).abs() <= 1e-10 * m.trace().abs().max(1.0));
    }

    #[test]
    fn eigen_rejects_nonsymmetric() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(m.sym_eigen(), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn cholesky_examples() {
        let i2 = DenseMatrix::<f64>::identity(2);
        assert_eq!(i2.cholesky_solve(&[4.0, 5.0]).unwrap(), vec![4.0, 5.0]);
        let d = DenseMatrix::from_diagonal(&[2.0, 8.0]);
        let x = d.cholesky_solve(&[2.0, 8.0]).unwrap();
        assert!(x.iter().all(|v: &f64| (v - 1.0).abs() <= 1e-15), "{x:?}");
    }

    #[test]
    fn cholesky_random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_dense(&mut rng, 10, 10);
        let m = a.transpose().matmul(&a).unwrap().add(&DenseMatrix::identity(10)).unwrap();
        let b: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = m.cholesky_solve(&b).unwrap();
        let r = m.matvec(&x).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * bn);
    }

    #[test]
    fn cholesky_reports_pivot() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(m.cholesky(), Err(Error::NotPositiveDefinite { pivot: 1 })));
    }

    #[test]
    fn lu_solves_indefinite() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.lu().unwrap().solve(&[1.0, 0.0]).unwrap(), vec![0.0, 1.0]);
        let s = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(s.lu(), Err(Error::Singular { .. })));
    }
}
