use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;
use crate::sparse::DenseMatrix;

/// Default symmetry tolerance for the scalar type: `1e-12` for `f64`,
/// widened to a few hundred ulps for `f32`.
pub fn symmetry_tolerance<T: Real>() -> T {
    let floor = T::lit(1e-12);
    let ulps = T::epsilon() * T::lit(100.0);
    if ulps > floor {
        ulps
    } else {
        floor
    }
}

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds a matrix from raw CSR arrays, validating every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                nrows + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidStructure(
                "row_ptr endpoints inconsistent with nnz".into(),
            ));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidStructure(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for w in cols.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidStructure(format!(
                        "columns not strictly increasing in row {i}"
                    )));
                }
            }
            if let Some(&c) = cols.last() {
                if c >= ncols {
                    return Err(Error::InvalidStructure(format!(
                        "column {c} out of range in row {i}"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Unchecked constructor for kernels that produce sorted rows by construction.
    pub(crate) fn from_parts_unchecked(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        debug_assert!(Self::new(nrows, ncols, row_ptr.clone(), col_idx.clone(), values.clone()).is_ok());
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Assembles from (row, col, value) triplets. Duplicates are summed in
    /// input order, so the result is independent of hashing or threading.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
        }
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // counting sort by row keeps insertion order within each row
        let mut next = counts.clone();
        let mut order = vec![0usize; triplets.len()];
        for (t, &(r, _, _)) in triplets.iter().enumerate() {
            order[next[r]] = t;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend(order[counts[i]..counts[i + 1]].iter().map(|&t| (triplets[t].1, triplets[t].2)));
            scratch.sort_by_key(|&(c, _)| c); // stable
            let mut k = 0;
            while k < scratch.len() {
                let c = scratch[k].0;
                let mut v = T::zero();
                while k < scratch.len() && scratch[k].0 == c {
                    v += scratch[k].1;
                    k += 1;
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts_unchecked(nrows, ncols, row_ptr, col_idx, values))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), vec![T::one(); n])
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_parts_unchecked(nrows, ncols, vec![0; nrows + 1], Vec::new(), Vec::new())
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self::from_parts_unchecked(n, n, (0..=n).collect(), (0..n).collect(), diag.to_vec())
    }

    /// Converts a dense matrix, keeping every entry whose value is not exactly zero.
    pub fn from_dense(m: &DenseMatrix<T>) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != T::zero() {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts_unchecked(m.nrows(), m.ncols(), row_ptr, col_idx, values)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Stored value at (i, j), or zero when (i, j) is not in the pattern.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("spmv", self.ncols, x.len())?;
        let mut y = vec![T::zero(); self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` into a preallocated buffer; lengths are the caller's contract.
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "spmv: x length");
        assert_eq!(y.len(), self.nrows, "spmv: y length");
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut s = T::zero();
            for (c, v) in cols.iter().zip(vals) {
                s += *v * x[*c];
            }
            *yi = s;
        }
    }

    /// `y = Aᵀ x` without materializing the transpose.
    pub fn spmv_transpose(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("spmv_transpose", self.nrows, x.len())?;
        let mut y = vec![T::zero(); self.ncols];
        for (i, xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += *v * *xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let p = next[*c];
                col_idx[p] = i;
                values[p] = *v;
                next[*c] += 1;
            }
        }
        Self::from_parts_unchecked(self.ncols, self.nrows, row_ptr, col_idx, values)
    }

    /// Sparse product `self * other` (Gustavson, rows merged in ascending column order).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim("matmul", self.ncols, other.nrows)?;
        let mut marker = vec![usize::MAX; other.ncols];
        let mut acc = vec![T::zero(); other.ncols];
        let mut row_cols: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            row_cols.clear();
            let (acols, avals) = self.row(i);
            for (k, a) in acols.iter().zip(avals) {
                let (bcols, bvals) = other.row(*k);
                for (j, b) in bcols.iter().zip(bvals) {
                    if marker[*j] != i {
                        marker[*j] = i;
                        acc[*j] = T::zero();
                        row_cols.push(*j);
                    }
                    acc[*j] += *a * *b;
                }
            }
            row_cols.sort_unstable();
            for &j in &row_cols {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self::from_parts_unchecked(self.nrows, other.ncols, row_ptr, col_idx, values))
    }

    /// Galerkin product `R · A · P`, evaluated as `R · (A · P)`.
    pub fn triple_product(r: &Self, a: &Self, p: &Self) -> Result<Self> {
        check_dim("triple_product (R.ncols vs A.nrows)", a.nrows, r.ncols)?;
        check_dim("triple_product (A.ncols vs P.nrows)", a.ncols, p.nrows)?;
        let ap = a.matmul(p)?;
        r.matmul(&ap)
    }

    /// Checks `|a_ij - a_ji| <= tol * max(1, |a_ij|)` over all stored pairs.
    pub fn is_symmetric_with(&self, tol: T) -> bool {
        self.symmetry_violation(tol).is_none()
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_symmetric_with(symmetry_tolerance::<T>())
    }

    /// First (row, col) violating the symmetry predicate, if any.
    pub fn symmetry_violation(&self, tol: T) -> Option<(usize, usize)> {
        if self.nrows != self.ncols {
            return Some((0, 0));
        }
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let w = self.get(*c, i);
                if (*v - w).abs() > tol * T::one().max(v.abs()) {
                    return Some((i, *c));
                }
            }
        }
        None
    }

    /// Extracts `A[rows, cols]`. `col_map[j]` gives the new index of old column `j`.
    pub fn submatrix(&self, rows: &[usize], col_map: &[Option<usize>], new_ncols: usize) -> Result<Self> {
        check_dim("submatrix column map", self.ncols, col_map.len())?;
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut buf: Vec<(usize, T)> = Vec::new();
        for &r in rows {
            if r >= self.nrows {
                return Err(Error::InvalidArgument(format!("row {r} out of range")));
            }
            buf.clear();
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if let Some(nc) = col_map[*c] {
                    buf.push((nc, *v));
                }
            }
            buf.sort_by_key(|e| e.0);
            for &(c, v) in &buf {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(rows.len(), new_ncols, row_ptr, col_idx, values)
    }

    /// Assembles a block matrix; `None` blocks are zero. Row heights and
    /// column widths are taken from the non-empty blocks.
    pub fn block(blocks: &[Vec<Option<&Self>>]) -> Result<Self> {
        let nbr = blocks.len();
        let nbc = blocks.first().map_or(0, |r| r.len());
        let mut heights = vec![None; nbr];
        let mut widths = vec![None; nbc];
        for (bi, brow) in blocks.iter().enumerate() {
            check_dim("block row length", nbc, brow.len())?;
            for (bj, b) in brow.iter().enumerate() {
                if let Some(m) = b {
                    for (slot, val, what) in [(&mut heights[bi], m.nrows, "block height"), (&mut widths[bj], m.ncols, "block width")] {
                        match *slot {
                            None => *slot = Some(val),
                            Some(h) => check_dim(what, h, val)?,
                        }
                    }
                }
            }
        }
        let heights: Vec<usize> = heights
            .into_iter()
            .map(|h| h.ok_or_else(|| Error::InvalidArgument("empty block row".into())))
            .collect::<Result<_>>()?;
        let widths: Vec<usize> = widths
            .into_iter()
            .map(|w| w.ok_or_else(|| Error::InvalidArgument("empty block column".into())))
            .collect::<Result<_>>()?;
        let mut col_off = vec![0usize; nbc + 1];
        for j in 0..nbc {
            col_off[j + 1] = col_off[j] + widths[j];
        }
        let nrows: usize = heights.iter().sum();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (bi, brow) in blocks.iter().enumerate() {
            for i in 0..heights[bi] {
                for (bj, b) in brow.iter().enumerate() {
                    if let Some(m) = b {
                        let (cols, vals) = m.row(i);
                        col_idx.extend(cols.iter().map(|c| c + col_off[bj]));
                        values.extend_from_slice(vals);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        Ok(Self::from_parts_unchecked(nrows, col_off[nbc], row_ptr, col_idx, values))
    }

    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    /// Entries on or below the diagonal.
    pub fn lower_triangle(&self) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c <= i {
                    col_idx.push(*c);
                    values.push(*v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts_unchecked(self.nrows, self.ncols, row_ptr, col_idx, values)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                d[(i, *c)] = *v;
            }
        }
        d
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// Maximum over entries of |self - other| relative to max(1, |other|).
    pub fn max_relative_diff(&self, other: &Self) -> Result<T> {
        check_dim("max_relative_diff rows", self.nrows, other.nrows)?;
        check_dim("max_relative_diff cols", self.ncols, other.ncols)?;
        let mut worst = T::zero();
        for i in 0..self.nrows {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let (a, b) = if q >= c2.len() || (p < c1.len() && c1[p] < c2[q]) {
                    p += 1;
                    (v1[p - 1], T::zero())
                } else if p >= c1.len() || c2[q] < c1[p] {
                    q += 1;
                    (T::zero(), v2[q - 1])
                } else {
                    p += 1;
                    q += 1;
                    (v1[p - 1], v2[q - 1])
                };
                let d = (a - b).abs() / T::one().max(b.abs());
                if d > worst {
                    worst = d;
                }
            }
        }
        Ok(worst)
    }

    /// Converts entries to another scalar type.
    pub fn cast<U: Real>(&self) -> CsrMatrix<U> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..m {
                if rng.gen::<f64>() < density {
                    t.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        CsrMatrix::from_triplets(n, m, &t).unwrap()
    }

    #[test]
    fn spmv_identity_and_row_sums() {
        let i3 = CsrMatrix::<f64>::identity(3);
        assert_eq!(i3.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(a.spmv(&[1.0, 1.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = CsrMatrix::<f64>::identity(3);
        assert!(matches!(a.spmv(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn spmv_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_sparse(&mut rng, 5, 5, 0.6);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d = a.to_dense();
        let yd: Vec<f64> = (0..5).map(|i| (0..5).map(|j| d[(i, j)] * x[j]).sum()).collect();
        let y = a.spmv(&x).unwrap();
        for (p, q) in y.iter().zip(&yd) {
            assert!((p - q).abs() <= 1e-14);
        }
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (1, 0, 3.0)]).unwrap();
        assert_eq!(a.row_ptr(), &[0, 1, 3]);
        assert_eq!(a.col_idx(), &[1, 0, 2]);
        assert_eq!(a.values(), &[2.0, 3.0, 1.5]);
    }

    #[test]
    fn invalid_structure_rejected() {
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::<f64>::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
    }

    #[test]
    fn triple_product_identity_and_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_sparse(&mut rng, 4, 4, 0.7);
        let i4 = CsrMatrix::identity(4);
        assert_eq!(CsrMatrix::triple_product(&i4, &a, &i4).unwrap(), a);
        let p = CsrMatrix::from_triplets(4, 1, &[(0, 0, 1.0)]).unwrap();
        let c = CsrMatrix::triple_product(&p.transpose(), &a, &p).unwrap();
        assert_eq!(c.nrows(), 1);
        assert_eq!(c.get(0, 0), a.get(0, 0));
    }

    #[test]
    fn triple_product_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_sparse(&mut rng, 6, 6, 0.5);
        let p = random_sparse(&mut rng, 6, 3, 0.5);
        let r = p.transpose();
        let c = CsrMatrix::triple_product(&r, &a, &p).unwrap();
        let (ad, pd) = (a.to_dense(), p.to_dense());
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..6 {
                    for l in 0..6 {
                        s += pd[(k, i)] * ad[(k, l)] * pd[(l, j)];
                    }
                }
                assert!((c.get(i, j) - s).abs() <= 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn triple_product_dimension_errors() {
        let a = CsrMatrix::<f64>::identity(3);
        let p = CsrMatrix::<f64>::zeros(2, 2);
        assert!(CsrMatrix::triple_product(&p, &a, &p).is_err());
    }

    #[test]
    fn block_assembly() {
        let a = CsrMatrix::<f64>::identity(2);
        let b = CsrMatrix::from_triplets(1, 2, &[(0, 1, 5.0)]).unwrap();
        let bt = b.transpose();
        let f = CsrMatrix::block(&[vec![Some(&a), Some(&bt)], vec![Some(&b), None]]).unwrap();
        assert_eq!(f.nrows(), 3);
        assert_eq!(f.get(1, 2), 5.0);
        assert_eq!(f.get(2, 1), 5.0);
        assert!(f.is_symmetric());
    }

    #[test]
    fn submatrix_extraction() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 4.0), (2, 0, 4.0)]).unwrap();
        let s = a.submatrix(&[0, 2], &[Some(0), None, Some(1)], 2).unwrap();
        assert_eq!(s.to_dense().as_slice(), &[1.0, 4.0, 4.0, 3.0]);
    }
}
