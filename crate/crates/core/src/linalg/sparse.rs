use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::{LinalgError, Result};

/// Rows above this many stored entries are multiplied in parallel.
const PARALLEL_NNZ: usize = 1 << 18;

/// Coordinate-form accumulator. Duplicates are summed on finalization.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self { n, entries: Vec::with_capacity(cap) }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: C64) {
        self.entries.push((row, col, val));
    }

    pub fn extend_from(&mut self, m: &SparseComplexMatrix) {
        for i in 0..m.n {
            let (cols, vals) = m.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                self.entries.push((i, c, v));
            }
        }
    }

    pub fn finalize(mut self) -> Result<SparseComplexMatrix> {
        let n = self.n;
        if let Some(&(row, col, _)) = self.entries.iter().find(|e| e.0 >= n || e.1 >= n) {
            return Err(LinalgError::OutOfBounds { row, col, n });
        }
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("duplicate follows an entry") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseComplexMatrix { n, row_ptr, cols, vals })
    }
}

/// Square complex matrix in compressed row storage with sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseComplexMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        Self {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            cols: (0..d.len()).collect(),
            vals: d.to_vec(),
        }
    }

    /// Builds from a dense row-major array, keeping exact zeros out.
    pub fn from_dense(n: usize, dense: &[C64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(LinalgError::DimensionMismatch { expected: n * n, found: dense.len() });
        }
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            for j in 0..n {
                let v = dense[i * n + j];
                if v != C64::new(0.0, 0.0) {
                    b.push(i, j, v);
                }
            }
        }
        b.finalize()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[C64] {
        &self.vals
    }

    /// Values may change in place; the pattern may not.
    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.vals
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or_default()
    }

    /// Storage offset of entry (i, j) if it is part of the pattern.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.row_ptr == other.row_ptr && self.cols == other.cols
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// y = A x
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::default(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.n, "matvec input length");
        assert_eq!(y.len(), self.n, "matvec output length");
        let row = |i: usize| -> C64 {
            let mut acc = C64::default();
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            acc
        };
        if self.nnz() >= PARALLEL_NNZ {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    pub fn to_dense(&self) -> Vec<C64> {
        let mut d = vec![C64::default(); self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i * self.n + c] = v;
            }
        }
        d
    }

    pub fn conj_transpose(&self) -> Self {
        let mut b = TripletBuilder::with_capacity(self.n, self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                b.push(c, i, v.conj());
            }
        }
        b.finalize().expect("transpose stays in bounds")
    }

    /// a·I + b·A on the union pattern.
    pub fn affine(&self, a: C64, b: C64) -> Self {
        let mut t = TripletBuilder::with_capacity(self.n, self.nnz() + self.n);
        for i in 0..self.n {
            t.push(i, i, a);
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push(i, c, b * v);
            }
        }
        t.finalize().expect("affine stays in bounds")
    }

    /// self + alpha·other on the union pattern.
    pub fn add_scaled(&self, alpha: C64, other: &Self) -> Result<Self> {
        if other.n != self.n {
            return Err(LinalgError::DimensionMismatch { expected: self.n, found: other.n });
        }
        let mut t = TripletBuilder::with_capacity(self.n, self.nnz() + other.nnz());
        t.extend_from(self);
        for i in 0..other.n {
            let (cols, vals) = other.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push(i, c, alpha * v);
            }
        }
        t.finalize()
    }

    /// Returns a copy where each listed row is replaced wholesale.
    ///
    /// Untouched rows keep their storage bit for bit. A row may be given
    /// as a dense block over arbitrary columns.
    pub fn with_rows_replaced(&self, rows: &[(usize, Vec<(usize, C64)>)]) -> Result<Self> {
        let mut replacement: Vec<Option<&Vec<(usize, C64)>>> = vec![None; self.n];
        for (r, entries) in rows {
            if *r >= self.n {
                return Err(LinalgError::OutOfBounds { row: *r, col: 0, n: self.n });
            }
            if let Some(&(c, _)) = entries.iter().find(|e| e.0 >= self.n) {
                return Err(LinalgError::OutOfBounds { row: *r, col: c, n: self.n });
            }
            replacement[*r] = Some(entries);
        }
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::with_capacity(self.nnz());
        let mut vals = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for (i, rep) in replacement.iter().enumerate() {
            match rep {
                None => {
                    let (c, v) = self.row(i);
                    cols.extend_from_slice(c);
                    vals.extend_from_slice(v);
                }
                Some(entries) => {
                    let mut e: Vec<(usize, C64)> = entries.to_vec();
                    e.sort_by_key(|x| x.0);
                    for (c, v) in e {
                        if cols.len() > row_ptr[i] && *cols.last().unwrap() == c {
                            *vals.last_mut().unwrap() += v;
                        } else {
                            cols.push(c);
                            vals.push(v);
                        }
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { n: self.n, row_ptr, cols, vals })
    }

    /// Multiplies row `i` by `f(i)` for every row where it returns a factor.
    pub fn scale_rows(&mut self, f: impl Fn(usize) -> Option<C64>) {
        for i in 0..self.n {
            if let Some(s) = f(i) {
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    self.vals[p] *= s;
                }
            }
        }
    }

    /// Principal submatrix on `keep` (new index = position in `keep`).
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &old in keep {
            let (c, v) = self.row(old);
            for (&cc, &vv) in c.iter().zip(v) {
                if map[cc] != usize::MAX {
                    cols.push(map[cc]);
                    vals.push(vv);
                }
            }
            row_ptr.push(cols.len());
        }
        // `keep` is ascending in every caller, which keeps columns sorted.
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        Self { n: keep.len(), row_ptr, cols, vals }
    }

    /// Rows whose stored values are all exactly zero.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.n).find(|&i| self.row(i).1.iter().all(|v| *v == C64::default()))
    }
}
