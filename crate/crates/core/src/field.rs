//! Complex wavefunction storage.

use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field has {found} values but the grid has {expected} points")]
    LengthMismatch { expected: usize, found: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

/// Wavefunction samples on a 1D grid or a reduced 2D mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub values: Vec<C64>,
    pub time_index: usize,
}

impl ComplexField {
    pub fn new(values: Vec<C64>) -> Self {
        Self { values, time_index: 0 }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![C64::default(); n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_len(&self, expected: usize) -> Result<(), FieldError> {
        if self.values.len() != expected {
            return Err(FieldError::LengthMismatch { expected, found: self.values.len() });
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<(), FieldError> {
        match self.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            Some(i) => Err(FieldError::NonFinite(i)),
            None => Ok(()),
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// `weight · Σ |v|²` over `values`.
pub fn weighted_norm_sqr(values: &[C64], weight: f64) -> f64 {
    weight * values.iter().map(|v| v.norm_sqr()).sum::<f64>()
}
