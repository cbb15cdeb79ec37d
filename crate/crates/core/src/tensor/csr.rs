use std::hash::{DefaultHasher, Hash, Hasher};

use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed-sparse-row matrix, always held in canonical form: column
/// indices strictly increasing within each row and no stored zeros.
///
/// [`CsrMatrix::new`] canonicalizes whatever it is given (sorting, summing
/// duplicates, dropping zeros); [`CsrMatrix::from_canonical_parts`] instead
/// rejects input that is not already canonical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays and canonicalizes it.
    pub fn new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_structure(rows, cols, &indptr, &indices, &values)?;
        let mut triplets = Vec::with_capacity(indices.len());
        for r in 0..rows {
            for k in indptr[r]..indptr[r + 1] {
                triplets.push((r, indices[k], values[k]));
            }
        }
        Ok(Self::from_sorted_triplets(rows, cols, triplets))
    }

    /// Accepts raw CSR arrays only if they are already canonical.
    pub fn from_canonical_parts(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_structure(rows, cols, &indptr, &indices, &values)?;
        for r in 0..rows {
            let row = &indices[indptr[r]..indptr[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "CSR row {r} column indices are not strictly increasing"
                )));
            }
        }
        if let Some(k) = values.iter().position(|&v| v == 0.0) {
            return Err(Error::Validation(format!(
                "CSR stores an explicit zero at position {k}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets in any order; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        for &(r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Validation(format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Validation(format!("non-finite value at ({r}, {c})")));
            }
        }
        Ok(Self::from_sorted_triplets(rows, cols, triplets.to_vec()))
    }

    fn from_sorted_triplets(rows: usize, cols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut i = 0;
        while i < t.len() {
            let (r, c, mut v) = t[i];
            i += 1;
            while i < t.len() && t[i].0 == r && t[i].1 == c {
                v += t[i].2;
                i += 1;
            }
            if v != 0.0 {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        idx.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                m.set(r, c, v);
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // rows visited in increasing order keep each transposed row sorted
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                let dst = next[c];
                indices[dst] = r;
                values[dst] = v;
                next[c] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// Row sums.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    /// Symmetry with values compared to an absolute tolerance.
    pub fn is_symmetric_within(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        self.indptr == t.indptr
            && self.indices == t.indices
            && self
                .values
                .iter()
                .zip(&t.values)
                .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// Reapplies canonicalization; a no-op on any value of this type.
    pub fn canonicalize(&self) -> Self {
        Self::new(
            self.rows,
            self.cols,
            self.indptr.clone(),
            self.indices.clone(),
            self.values.clone(),
        )
        .expect("canonical CSR is structurally valid")
    }

    /// Same pattern, values replaced through `f` (zeros produced by `f` are dropped).
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                t.push((r, c, f(r, c, v)));
            }
        }
        Self::from_sorted_triplets(self.rows, self.cols, t)
    }

    /// Applies a node relabeling `perm` (new index `i` holds old node `perm[i]`)
    /// to both rows and columns of a square matrix.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<Self> {
        if !self.is_square() || perm.len() != self.rows {
            return Err(Error::dim(
                "permute_symmetric",
                format!("{} entries for a {:?} matrix", perm.len(), self.shape()),
            ));
        }
        let mut inverse = vec![usize::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            if old >= perm.len() || inverse[old] != usize::MAX {
                return Err(Error::Validation("not a permutation".into()));
            }
            inverse[old] = new;
        }
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                t.push((inverse[r], inverse[c], v));
            }
        }
        Ok(Self::from_sorted_triplets(self.rows, self.cols, t))
    }

    /// Stable fingerprint of shape, pattern and values.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.rows.hash(&mut h);
        self.cols.hash(&mut h);
        self.indptr.hash(&mut h);
        self.indices.hash(&mut h);
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

fn check_structure(
    rows: usize,
    cols: usize,
    indptr: &[usize],
    indices: &[usize],
    values: &[f64],
) -> Result<()> {
    if indptr.len() != rows + 1 {
        return Err(Error::Validation(format!(
            "indptr has length {}, expected {}",
            indptr.len(),
            rows + 1
        )));
    }
    if indptr[0] != 0 {
        return Err(Error::Validation("indptr[0] must be 0".into()));
    }
    if indptr.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Validation("indptr is not monotone".into()));
    }
    let nnz = indptr[rows];
    if indices.len() != nnz || values.len() != nnz {
        return Err(Error::Validation(format!(
            "indptr ends at {nnz} but there are {} indices and {} values",
            indices.len(),
            values.len()
        )));
    }
    if let Some(&c) = indices.iter().find(|&&c| c >= cols) {
        return Err(Error::Validation(format!(
            "column index {c} out of range for {cols} columns"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("CSR holds a non-finite value".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_sums_duplicates_and_drops_zeros() {
        // row 0: (0,1)=2, (0,1)=3, (0,0)=0 ; row 1: (1,0)=1, (1,1)=-1, (1,1)=1
        let m = CsrMatrix::new(
            2,
            2,
            vec![0, 3, 6],
            vec![1, 1, 0, 0, 1, 1],
            vec![2.0, 3.0, 0.0, 1.0, -1.0, 1.0],
        )
        .unwrap();
        assert_eq!(m.indptr(), &[0, 1, 2]);
        assert_eq!(m.indices(), &[1, 0]);
        assert_eq!(m.values(), &[5.0, 1.0]);
    }

    #[test]
    fn canonical_parts_reject_unsorted_and_zeros() {
        assert!(CsrMatrix::from_canonical_parts(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_canonical_parts(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_canonical_parts(1, 3, vec![0, 1], vec![1], vec![0.0]).is_err());
        assert!(CsrMatrix::from_canonical_parts(1, 3, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn structure_errors() {
        assert!(CsrMatrix::new(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::new(1, 2, vec![1, 1], vec![], vec![]).is_err());
        assert!(CsrMatrix::new(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(CsrMatrix::new(2, 2, vec![0, 1, 0], vec![0], vec![1.0]).is_err());
    }

    #[test]
    fn transpose_matches_dense() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (1, 2, 3.0)]).unwrap();
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn permutation_relabels_nodes() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let p = m.permute_symmetric(&[2, 0, 1]).unwrap();
        // old node 0 -> new 1, old 1 -> new 2, old 2 -> new 0
        assert_eq!(p.get(1, 2), 1.0);
        assert_eq!(p.get(2, 0), 2.0);
        assert_eq!(p.nnz(), 2);
    }
}
