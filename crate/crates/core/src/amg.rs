//! Classical Ruge–Stüben algebraic multigrid.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::krylov::Preconditioner;
use crate::scalar::Real;
use crate::sparse::{Cholesky, CsrMatrix};

/// Largest coarsest level that is factored densely. Beyond it the coarsest
/// level is handled by symmetric Gauss–Seidel sweeps.
pub const DENSE_COARSE_LIMIT: usize = 3000;
const COARSE_FALLBACK_SWEEPS: usize = 20;

/// Strong connections, `adjacency[i]` = columns `i` strongly depends on (ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthGraph {
    pub adjacency: Vec<Vec<usize>>,
    pub theta: f64,
}

impl StrengthGraph {
    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    /// `transpose()[j]` lists the points that strongly depend on `j`.
    pub fn transpose(&self) -> Vec<Vec<usize>> {
        let mut t = vec![Vec::new(); self.n()];
        for (i, row) in self.adjacency.iter().enumerate() {
            for &j in row {
                t[j].push(i);
            }
        }
        t
    }
}

pub fn strength_graph<T: Real>(a: &CsrMatrix<T>, theta: f64) -> Result<StrengthGraph> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("strength threshold {theta} outside (0,1)")));
    }
    check_dim("strength graph", a.nrows(), a.ncols())?;
    let th = T::lit(theta);
    let adjacency = (0..a.nrows())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let mut maxneg = T::zero();
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i && -v > maxneg {
                    maxneg = -v;
                }
            }
            if maxneg == T::zero() {
                return Vec::new();
            }
            cols.iter()
                .zip(vals)
                .filter(|&(&j, &v)| j != i && -v > th * maxneg)
                .map(|(&j, _)| j)
                .collect()
        })
        .collect();
    Ok(StrengthGraph { adjacency, theta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub kinds: Vec<PointKind>,
}

impl Partition {
    pub fn coarse_points(&self) -> Vec<usize> {
        (0..self.kinds.len()).filter(|&i| self.kinds[i] == PointKind::Coarse).collect()
    }

    pub fn n_coarse(&self) -> usize {
        self.kinds.iter().filter(|k| **k == PointKind::Coarse).count()
    }

    /// Coarse index of each point (None for F-points).
    pub fn coarse_map(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.kinds
            .iter()
            .map(|k| match k {
                PointKind::Coarse => {
                    next += 1;
                    Some(next - 1)
                }
                PointKind::Fine => None,
            })
            .collect()
    }
}

/// Greedy first-pass coarsening. Measures are the number of points that
/// strongly depend on a point; the largest measure wins, lowest index on ties.
pub fn rs_coarsen(s: &StrengthGraph) -> Partition {
    let n = s.n();
    let st = s.transpose();
    let mut measure: Vec<usize> = st.iter().map(|v| v.len()).collect();
    let mut kind: Vec<Option<PointKind>> = vec![None; n];
    // bucket queue keyed by measure; each bucket is an ordered set so the lowest index pops first
    let max_measure = n.max(1) * 2;
    let mut buckets: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); max_measure + 1];
    for i in 0..n {
        buckets[measure[i]].insert(i);
    }
    let mut top = max_measure;
    let mut remaining = n;
    while remaining > 0 {
        while buckets[top].is_empty() {
            top -= 1;
        }
        let i = *buckets[top].iter().next().unwrap();
        buckets[top].remove(&i);
        kind[i] = Some(PointKind::Coarse);
        remaining -= 1;
        for &j in &st[i] {
            if kind[j].is_some() {
                continue;
            }
            buckets[measure[j]].remove(&j);
            kind[j] = Some(PointKind::Fine);
            remaining -= 1;
            for &l in &s.adjacency[j] {
                if kind[l].is_none() {
                    buckets[measure[l]].remove(&l);
                    measure[l] += 1;
                    if measure[l] >= buckets.len() {
                        buckets.resize(measure[l] + 1, Default::default());
                    }
                    buckets[measure[l]].insert(l);
                    top = top.max(measure[l]);
                }
            }
        }
        for &j in &s.adjacency[i] {
            if kind[j].is_none() && measure[j] > 0 {
                buckets[measure[j]].remove(&j);
                measure[j] -= 1;
                buckets[measure[j]].insert(j);
            }
        }
        top = top.min(buckets.len() - 1);
    }
    let mut kinds: Vec<PointKind> = kind.into_iter().map(|k| k.unwrap()).collect();
    for i in 0..n {
        if kinds[i] == PointKind::Fine && !s.adjacency[i].iter().any(|&j| kinds[j] == PointKind::Coarse) {
            kinds[i] = PointKind::Coarse;
        }
    }
    Partition { kinds }
}

/// Direct interpolation. Positive off-diagonal entries are lumped into the diagonal.
pub fn direct_interpolation<T: Real>(a: &CsrMatrix<T>, s: &StrengthGraph, part: &Partition) -> Result<CsrMatrix<T>> {
    let n = a.nrows();
    check_dim("interpolation strength graph", n, s.n())?;
    check_dim("interpolation partition", n, part.kinds.len())?;
    let cmap = part.coarse_map();
    let nc = part.n_coarse();
    let mut trip = Vec::new();
    for i in 0..n {
        if let Some(ci) = cmap[i] {
            trip.push((i, ci, T::one()));
            continue;
        }
        let (cols, vals) = a.row(i);
        let mut diag = T::zero();
        let mut neg_all = T::zero();
        let mut neg_c = T::zero();
        let strong_c: Vec<usize> = s.adjacency[i].iter().copied().filter(|&j| cmap[j].is_some()).collect();
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag += v;
            } else if v > T::zero() {
                diag += v;
            } else {
                neg_all += v;
                if strong_c.binary_search(&j).is_ok() {
                    neg_c += v;
                }
            }
        }
        if strong_c.is_empty() || neg_c == T::zero() {
            return Err(Error::InvalidStructure(format!("F-point {i} has no strong C-neighbour")));
        }
        if diag <= T::zero() {
            return Err(Error::InvalidStructure(format!("nonpositive lumped diagonal in row {i}")));
        }
        let alpha = neg_all / neg_c;
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i && v < T::zero() && strong_c.binary_search(&j).is_ok() {
                trip.push((i, cmap[j].unwrap(), -alpha * v / diag));
            }
        }
    }
    CsrMatrix::from_triplets(n, nc, &trip)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmgConfig {
    pub theta: f64,
    pub max_levels: usize,
    pub coarse_size: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
}

impl Default for AmgConfig {
    fn default() -> Self {
        AmgConfig { theta: 0.25, max_levels: 20, coarse_size: 64, pre_sweeps: 1, post_sweeps: 1 }
    }
}

impl AmgConfig {
    pub fn with_theta(theta: f64) -> Self {
        AmgConfig { theta, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub struct AmgLevel<T> {
    pub a: CsrMatrix<T>,
    /// Interpolation to this level from the next coarser one.
    pub p: Option<CsrMatrix<T>>,
    r: Option<CsrMatrix<T>>,
}

#[derive(Debug, Clone)]
enum CoarseSolve<T> {
    Empty,
    Cholesky(Cholesky<T>),
    Sweeps(usize),
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy<T> {
    levels: Vec<AmgLevel<T>>,
    coarse: CoarseSolve<T>,
    config: AmgConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySummary {
    pub levels: Vec<LevelSummary>,
    pub operator_complexity: f64,
    pub theta: f64,
}

pub fn build_hierarchy<T: Real>(a: &CsrMatrix<T>, config: &AmgConfig) -> Result<AmgHierarchy<T>> {
    check_dim("amg operator", a.nrows(), a.ncols())?;
    if config.max_levels == 0 {
        return Err(Error::InvalidArgument("max_levels must be positive".into()));
    }
    let mut levels = vec![AmgLevel { a: a.clone(), p: None, r: None }];
    loop {
        let cur = &levels.last().unwrap().a;
        let n = cur.nrows();
        if n <= config.coarse_size || levels.len() >= config.max_levels {
            break;
        }
        let s = strength_graph(cur, config.theta)?;
        let part = rs_coarsen(&s);
        let nc = part.n_coarse();
        // stagnation guard: fewer than 5% of points removed
        if nc == 0 || (n - nc) * 20 < n {
            break;
        }
        let p = direct_interpolation(cur, &s, &part)?;
        let r = p.transpose();
        let ac = CsrMatrix::triple_product(&r, cur, &p)?;
        let last = levels.last_mut().unwrap();
        last.p = Some(p);
        last.r = Some(r);
        levels.push(AmgLevel { a: ac, p: None, r: None });
    }
    let ac = &levels.last().unwrap().a;
    let coarse = if ac.nrows() == 0 {
        CoarseSolve::Empty
    } else if ac.nrows() <= DENSE_COARSE_LIMIT {
        CoarseSolve::Cholesky(ac.to_dense().cholesky()?)
    } else {
        CoarseSolve::Sweeps(COARSE_FALLBACK_SWEEPS)
    };
    Ok(AmgHierarchy { levels, coarse, config: *config })
}

impl<T: Real> AmgHierarchy<T> {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[AmgLevel<T>] {
        &self.levels
    }

    pub fn config(&self) -> &AmgConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.levels[0].a.nrows()
    }

    pub fn nnz_per_level(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.nnz()).collect()
    }

    pub fn coarsest_is_direct(&self) -> bool {
        !matches!(self.coarse, CoarseSolve::Sweeps(_))
    }

    pub fn operator_complexity(&self) -> f64 {
        operator_complexity(&self.nnz_per_level())
    }

    pub fn summary(&self) -> HierarchySummary {
        HierarchySummary {
            levels: self.levels.iter().map(|l| LevelSummary { n: l.a.nrows(), nnz: l.a.nnz() }).collect(),
            operator_complexity: self.operator_complexity(),
            theta: self.config.theta,
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// One V-cycle on `r` with zero initial guess.
    pub fn vcycle(&self, r: &[T]) -> Result<Vec<T>> {
        check_dim("v-cycle residual", self.dim(), r.len())?;
        let mut x = vec![T::zero(); r.len()];
        self.cycle(0, r, &mut x)?;
        Ok(x)
    }

    fn cycle(&self, l: usize, b: &[T], x: &mut [T]) -> Result<()> {
        let lev = &self.levels[l];
        if l + 1 == self.levels.len() {
            match &self.coarse {
                CoarseSolve::Empty => {}
                CoarseSolve::Cholesky(c) => {
                    x.copy_from_slice(b);
                    c.solve_in_place(x)?;
                }
                CoarseSolve::Sweeps(k) => {
                    for _ in 0..*k {
                        gauss_seidel_forward(&lev.a, b, x);
                        gauss_seidel_backward(&lev.a, b, x);
                    }
                }
            }
            return Ok(());
        }
        for _ in 0..self.config.pre_sweeps {
            gauss_seidel_forward(&lev.a, b, x);
        }
        let mut res = b.to_vec();
        let mut ax = vec![T::zero(); b.len()];
        lev.a.spmv_into(x, &mut ax);
        for (ri, ai) in res.iter_mut().zip(&ax) {
            *ri -= *ai;
        }
        let rc = lev.r.as_ref().unwrap().spmv(&res)?;
        let mut ec = vec![T::zero(); rc.len()];
        self.cycle(l + 1, &rc, &mut ec)?;
        let corr = lev.p.as_ref().unwrap().spmv(&ec)?;
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += *ci;
        }
        for _ in 0..self.config.post_sweeps {
            gauss_seidel_backward(&lev.a, b, x);
        }
        Ok(())
    }
}

impl<T: Real> Preconditioner<T> for AmgHierarchy<T> {
    fn apply(&self, r: &[T], z: &mut [T]) -> Result<()> {
        let v = self.vcycle(r)?;
        z.copy_from_slice(&v);
        Ok(())
    }
}

/// `Σ nnz(A_l) / nnz(A_0)`; 1.0 for an empty list.
pub fn operator_complexity(nnz: &[usize]) -> f64 {
    match nnz.first() {
        Some(&n0) if n0 > 0 => nnz.iter().sum::<usize>() as f64 / n0 as f64,
        _ => 1.0,
    }
}

/// One Gauss–Seidel sweep in ascending row order.
pub fn gauss_seidel_forward<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T]) {
    for i in 0..a.nrows() {
        gs_row(a, b, x, i);
    }
}

/// One Gauss–Seidel sweep in descending row order.
pub fn gauss_seidel_backward<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T]) {
    for i in (0..a.nrows()).rev() {
        gs_row(a, b, x, i);
    }
}

#[inline]
fn gs_row<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T], i: usize) {
    let (cols, vals) = a.row(i);
    let mut s = b[i];
    let mut d = T::zero();
    for (&j, &v) in cols.iter().zip(vals) {
        if j == i {
            d = v;
        } else {
            s -= v * x[j];
        }
    }
    x[i] = s / d;
}
