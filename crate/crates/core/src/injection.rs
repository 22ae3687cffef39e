//! Incoming-wave sources for absorbing-layer runs.
//!
//! The incoming wave is subtracted from the unknown inside the injection
//! lead, so the lead carries only the scattered field. Matrix entries that
//! couple the lead to the rest of the mesh then move the incoming wave to
//! the right-hand side.

use num_complex::Complex64 as C64;

use crate::linalg::SparseComplexMatrix;

/// Matrix entries crossing the lead interface, with the sign they carry
/// into the source term.
#[derive(Debug, Clone, Default)]
pub struct CrossingCoupling {
    entries: Vec<(usize, usize, C64)>,
}

impl CrossingCoupling {
    /// `in_lead[k]` marks unknowns on the lead side of the interface.
    pub fn new(matrix: &SparseComplexMatrix, in_lead: &[bool]) -> Self {
        let mut entries = Vec::new();
        for i in 0..matrix.dim() {
            let (cols, vals) = matrix.row(i);
            for (&k, &v) in cols.iter().zip(vals) {
                if in_lead[i] != in_lead[k] && v != C64::default() {
                    let sign = if in_lead[i] { 1.0 } else { -1.0 };
                    entries.push((i, k, sign * v));
                }
            }
        }
        Self { entries }
    }

    /// Source vector for the incoming wave sampled as `phi`.
    pub fn source(&self, phi: &[C64]) -> Vec<C64> {
        let mut b = vec![C64::default(); phi.len()];
        for &(i, k, v) in &self.entries {
            b[i] += v * phi[k];
        }
        b
    }

    /// Rows receiving a nonzero source.
    pub fn support(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.entries.iter().map(|e| e.0).collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}
