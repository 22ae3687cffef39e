use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LuError;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use num_complex::Complex64 as C64;

use super::{LinalgError, Result, SparseComplexMatrix};

/// Sparse LU with a cached symbolic analysis.
///
/// The row-compressed storage of A is handed to the backend as the column
/// storage of Aᵀ, so solves go through the transposed factors.
pub struct LuFactorization {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    symbolic: SymbolicLu<usize>,
    numeric: Lu<usize, C64>,
    factorizations: usize,
}

impl std::fmt::Debug for LuFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactorization")
            .field("n", &self.n)
            .field("nnz", &self.cols.len())
            .field("factorizations", &self.factorizations)
            .finish()
    }
}

fn map_lu_error(e: LuError) -> LinalgError {
    match e {
        LuError::SymbolicSingular { index } => LinalgError::StructurallySingular { row: index },
        LuError::Generic(g) => LinalgError::Backend(format!("{g:?}")),
    }
}

fn check_structure(a: &SparseComplexMatrix) -> Result<()> {
    if let Some(row) = a.first_empty_row() {
        return Err(LinalgError::StructurallySingular { row });
    }
    Ok(())
}

impl LuFactorization {
    pub fn new(a: &SparseComplexMatrix) -> Result<Self> {
        check_structure(a)?;
        let n = a.dim();
        let row_ptr = a.row_ptr().to_vec();
        let cols = a.col_indices().to_vec();
        let sym_ref = SymbolicSparseColMatRef::new_checked(n, n, &row_ptr, None, &cols);
        let symbolic = SymbolicLu::try_new(sym_ref).map_err(|e| LinalgError::Backend(format!("{e:?}")))?;
        let mat = SparseColMatRef::new(sym_ref, a.values());
        let numeric = Lu::try_new_with_symbolic(symbolic.clone(), mat).map_err(map_lu_error)?;
        Ok(Self { n, row_ptr, cols, symbolic, numeric, factorizations: 1 })
    }

    /// Numeric refactorization reusing the symbolic analysis.
    pub fn refactor(&mut self, a: &SparseComplexMatrix) -> Result<()> {
        if a.dim() != self.n || a.row_ptr() != self.row_ptr || a.col_indices() != self.cols {
            return Err(LinalgError::PatternChanged);
        }
        check_structure(a)?;
        let sym_ref = SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.cols);
        let mat = SparseColMatRef::new(sym_ref, a.values());
        self.numeric = Lu::try_new_with_symbolic(self.symbolic.clone(), mat).map_err(map_lu_error)?;
        self.factorizations += 1;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of numeric factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    /// Overwrites `b` with the solution of A x = b.
    pub fn solve_in_place(&self, b: &mut [C64]) -> Result<()> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let view = MatMut::from_column_major_slice_mut(b, self.n, 1);
        self.numeric.solve_transpose_in_place(view);
        if let Some(row) = b.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(LinalgError::PivotBreakdown { row });
        }
        Ok(())
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

/// ‖A x − b‖₂ / ‖b‖₂ (or ‖A x‖₂ when b vanishes).
pub fn relative_residual(a: &SparseComplexMatrix, x: &[C64], b: &[C64]) -> f64 {
    let ax = a.matvec(x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// One-shot factorize-and-solve with a residual check.
///
/// A relative residual above `1e-8` is reported as an inaccurate solve; the
/// backend pivots partially, so this only triggers on near-singular input.
pub fn lu_solve(a: &SparseComplexMatrix, b: &[C64]) -> Result<Vec<C64>> {
    let lu = LuFactorization::new(a)?;
    let x = lu.solve(b)?;
    let residual = relative_residual(a, &x, b);
    if !(residual <= 1e-8) {
        return Err(LinalgError::InaccurateSolve { residual });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::super::TripletBuilder;
    use super::*;

    /// Gaussian elimination with partial pivoting on a dense copy.
    fn dense_solve(n: usize, mut a: Vec<C64>, mut b: Vec<C64>) -> Vec<C64> {
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm())).unwrap();
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i * n + k] / a[k * n + k];
                for j in k..n {
                    let v = a[k * n + j];
                    a[i * n + j] -= f * v;
                }
                let bk = b[k];
                b[i] -= f * bk;
            }
        }
        let mut x = vec![C64::default(); n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        x
    }

    fn random_matrix(n: usize, seed: u64) -> SparseComplexMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.push(i, i, C64::new(4.0 + next(), next()));
            for _ in 0..3 {
                let j = ((next() + 0.5) * n as f64) as usize % n;
                b.push(i, j, C64::new(next(), next()));
            }
        }
        b.finalize().unwrap()
    }

    #[test]
    fn identity_solve() {
        let a = SparseComplexMatrix::identity(5);
        let b: Vec<C64> = (0..5).map(|k| C64::new(k as f64, 1.0)).collect();
        assert_eq!(lu_solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn matches_dense_oracle() {
        let n = 40;
        let a = random_matrix(n, 7);
        let b: Vec<C64> = (0..n).map(|k| C64::new((k as f64).sin(), (k as f64).cos())).collect();
        let x = lu_solve(&a, &b).unwrap();
        let y = dense_solve(n, a.to_dense(), b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_row_is_singular() {
        let mut b = TripletBuilder::new(3);
        b.push(0, 0, C64::new(1.0, 0.0));
        b.push(2, 2, C64::new(1.0, 0.0));
        b.push(1, 1, C64::new(0.0, 0.0));
        let a = b.finalize().unwrap();
        let err = lu_solve(&a, &[C64::new(1.0, 0.0); 3]).unwrap_err();
        assert_eq!(err, LinalgError::StructurallySingular { row: 1 });
    }

    #[test]
    fn refactor_requires_same_pattern() {
        let a = random_matrix(10, 3);
        let mut lu = LuFactorization::new(&a).unwrap();
        let mut a2 = a.clone();
        for v in a2.values_mut() {
            *v *= 2.0;
        }
        lu.refactor(&a2).unwrap();
        assert_eq!(lu.factorizations(), 2);
        let other = random_matrix(10, 4);
        assert_eq!(lu.refactor(&other).unwrap_err(), LinalgError::PatternChanged);
    }
}
