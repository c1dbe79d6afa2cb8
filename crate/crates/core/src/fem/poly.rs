//! Polynomials in the four barycentric coordinates with exact rational
//! coefficients, and the Lagrange basis on the order-k lattice.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::scalar::{Rational, Real};

/// Exponent tuple (a, b, c, d) of `λ0^a λ1^b λ2^c λ3^d`.
pub type Exponents = [u8; 4];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaryPoly {
    terms: BTreeMap<Exponents, Rational>,
}

fn factorial(n: u32) -> i128 {
    (1..=n as i128).product()
}

/// `∫_T λ^e dx / |T| = 3! a! b! c! d! / (a+b+c+d+3)!`, exactly.
pub fn barycentric_monomial_mean(e: Exponents) -> Rational {
    let num: i128 = 6 * e.iter().map(|&x| factorial(x as u32)).product::<i128>();
    let total: u32 = e.iter().map(|&x| x as u32).sum();
    Rational::new(num, factorial(total + 3))
}

/// `∫_T λ0^a λ1^b λ2^c λ3^d dx` for a tetrahedron of the given volume.
pub fn integrate_barycentric_monomial<T: Real>(exponents: Exponents, volume: T) -> T {
    T::from_rational(&barycentric_monomial_mean(exponents)) * volume
}

impl BaryPoly {
    pub fn constant(c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert([0; 4], c);
        }
        Self { terms }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    /// `scale * λ_var + shift`
    pub fn affine(var: usize, scale: Rational, shift: Rational) -> Self {
        let mut p = Self::constant(shift);
        let mut e = [0u8; 4];
        e[var] = 1;
        if !scale.is_zero() {
            p.terms.insert(e, scale);
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &Rational)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().map(|&x| x as u32).sum()).max().unwrap_or(0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<Exponents, Rational> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = [e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3]];
                *terms.entry(e).or_insert_with(Rational::zero) += *c1 * *c2;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Self { terms }
    }

    /// Partial derivative with respect to `λ_var`, treating the four
    /// barycentric coordinates as independent variables.
    pub fn derivative(&self, var: usize) -> Self {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[var] > 0 {
                let mut ne = *e;
                ne[var] -= 1;
                terms.insert(ne, *c * Rational::from_integer(e[var] as i128));
            }
        }
        Self { terms }
    }

    /// Mean value over any tetrahedron (integral divided by volume).
    pub fn mean(&self) -> Rational {
        self.terms
            .iter()
            .map(|(e, c)| *c * barycentric_monomial_mean(*e))
            .fold(Rational::zero(), |a, b| a + b)
    }

    pub fn eval_rational(&self, lam: &[Rational; 4]) -> Rational {
        let mut s = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = *c;
            for (l, &p) in lam.iter().zip(e) {
                for _ in 0..p {
                    t *= *l;
                }
            }
            s += t;
        }
        s
    }
}

/// Multi-indices `α` with `|α| = k`, ordered vertices, then edges, faces and
/// the cell interior; within an entity by descending weight on the
/// lowest-numbered local vertex.
pub fn lattice_nodes(k: u8) -> Vec<Exponents> {
    let mut nodes = Vec::new();
    for a in 0..=k {
        for b in 0..=(k - a) {
            for c in 0..=(k - a - b) {
                nodes.push([a, b, c, k - a - b - c]);
            }
        }
    }
    let support = |n: &Exponents| -> Vec<usize> { (0..4).filter(|&i| n[i] > 0).collect() };
    nodes.sort_by(|x, y| {
        let (sx, sy) = (support(x), support(y));
        sx.len()
            .cmp(&sy.len())
            .then(sx.cmp(&sy))
            .then(y.cmp(x))
    });
    nodes
}

/// Lagrange basis function of order `k` attached to lattice node `alpha`:
/// `Π_a Π_{j<α_a} (k λ_a − j)/(j+1)`.
pub fn lagrange_basis(k: u8, alpha: Exponents) -> BaryPoly {
    let mut p = BaryPoly::one();
    for (var, &m) in alpha.iter().enumerate() {
        for j in 0..m {
            let f = BaryPoly::affine(
                var,
                Rational::new(k as i128, j as i128 + 1),
                Rational::new(-(j as i128), j as i128 + 1),
            );
            p = p.mul(&f);
        }
    }
    p
}

/// Evaluates the Lagrange basis function at a barycentric point in floating point.
pub fn eval_lagrange<T: Real>(k: u8, alpha: &Exponents, lam: &[T; 4]) -> T {
    let kk = T::from_usize_lossy(k as usize);
    let mut v = T::one();
    for (a, &m) in alpha.iter().enumerate() {
        for j in 0..m {
            let jj = T::from_usize_lossy(j as usize);
            v *= (kk * lam[a] - jj) / (jj + T::one());
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_integrals() {
        let v = 1.0 / 6.0;
        assert!((integrate_barycentric_monomial::<f64>([0, 0, 0, 0], v) - 1.0 / 6.0).abs() < 1e-16);
        assert!((integrate_barycentric_monomial::<f64>([1, 0, 0, 0], v) - 1.0 / 24.0).abs() < 1e-16);
        assert!((integrate_barycentric_monomial::<f64>([1, 1, 0, 0], v) - 1.0 / 120.0).abs() < 1e-16);
        assert_eq!(barycentric_monomial_mean([2, 0, 0, 0]), Rational::new(1, 10));
    }

    #[test]
    fn lattice_sizes_and_order() {
        for k in 1..=4u8 {
            let n = lattice_nodes(k);
            let kk = k as usize;
            assert_eq!(n.len(), (kk + 1) * (kk + 2) * (kk + 3) / 6);
            for (i, node) in n.iter().take(4).enumerate() {
                assert_eq!(node[i], k);
            }
        }
        let n2 = lattice_nodes(2);
        assert_eq!(n2[4], [1, 1, 0, 0]);
        assert_eq!(n2[9], [0, 0, 1, 1]);
    }

    #[test]
    fn kronecker_property_exact() {
        for k in 1..=4u8 {
            let nodes = lattice_nodes(k);
            for (i, a) in nodes.iter().enumerate() {
                let phi = lagrange_basis(k, *a);
                assert_eq!(phi.degree() as u8, k);
                for (j, b) in nodes.iter().enumerate() {
                    let lam = b.map(|x| Rational::new(x as i128, k as i128));
                    let expected = if i == j { Rational::one() } else { Rational::zero() };
                    assert_eq!(phi.eval_rational(&lam), expected, "k={k} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn basis_float_eval_matches_exact() {
        let k = 3;
        let alpha = [1, 2, 0, 0];
        let lam = [0.1, 0.2, 0.3, 0.4];
        let exact = lagrange_basis(k, alpha).eval_rational(&[
            Rational::new(1, 10),
            Rational::new(2, 10),
            Rational::new(3, 10),
            Rational::new(4, 10),
        ]);
        let f: f64 = eval_lagrange(k, &alpha, &lam);
        assert!((f - (*exact.numer() as f64 / *exact.denom() as f64)).abs() < 1e-14);
    }

    #[test]
    fn partition_of_unity() {
        let k = 4;
        let mut sum = BaryPoly::default();
        for a in lattice_nodes(k) {
            let p = lagrange_basis(k, a);
            // accumulate
            let mut terms = sum.terms.clone();
            for (e, c) in p.terms() {
                *terms.entry(*e).or_insert_with(Rational::zero) += *c;
            }
            sum.terms = terms;
        }
        // Σφ = 1 on the simplex: evaluate at a few rational points with Σλ = 1
        for lam in [[1, 1, 1, 1], [2, 3, 4, 1], [0, 0, 5, 5]] {
            let t: i128 = lam.iter().sum();
            let l = lam.map(|x| Rational::new(x, t));
            assert_eq!(sum.eval_rational(&l), Rational::one());
        }
    }
}
