//! Central finite-difference stencils of orders 2, 4 and 6 and their
//! two-dimensional Kronecker-sum assembly.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{SparseComplexMatrix, TripletBuilder};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StencilError {
    #[error("{n} points are too few for a stencil of half-width {half_width}")]
    TooFewPoints { n: usize, half_width: usize },
    #[error("operator sizes {found} do not match the {n1}x{n2} grid")]
    DimensionMismatch { n1: usize, n2: usize, found: String },
}

/// Formal accuracy of a central stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StencilOrder {
    Second,
    Fourth,
    Sixth,
}

impl TryFrom<u8> for StencilOrder {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            6 => Ok(Self::Sixth),
            _ => Err(format!("stencil order must be 2, 4 or 6, got {v}")),
        }
    }
}

impl From<StencilOrder> for u8 {
    fn from(o: StencilOrder) -> u8 {
        o.accuracy() as u8
    }
}

impl StencilOrder {
    pub const ALL: [StencilOrder; 3] = [Self::Second, Self::Fourth, Self::Sixth];

    pub fn half_width(self) -> usize {
        match self {
            Self::Second => 1,
            Self::Fourth => 2,
            Self::Sixth => 3,
        }
    }

    pub fn accuracy(self) -> u32 {
        2 * self.half_width() as u32
    }

    /// First-derivative weights on offsets −h..=h, to be divided by `dx`.
    pub fn first_derivative_weights(self) -> Vec<f64> {
        let (num, den): (&[f64], f64) = match self {
            Self::Second => (&[-1.0, 0.0, 1.0], 2.0),
            Self::Fourth => (&[1.0, -8.0, 0.0, 8.0, -1.0], 12.0),
            Self::Sixth => (&[-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0], 60.0),
        };
        num.iter().map(|w| w / den).collect()
    }

    /// Second-derivative weights on offsets −h..=h, to be divided by `dx²`.
    pub fn second_derivative_weights(self) -> Vec<f64> {
        let (num, den): (&[f64], f64) = match self {
            Self::Second => (&[1.0, -2.0, 1.0], 1.0),
            Self::Fourth => (&[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0),
            Self::Sixth => (&[2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0], 180.0),
        };
        num.iter().map(|w| w / den).collect()
    }
}

/// Treatment of stencil points that fall outside the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    /// Outside values are zero.
    Dirichlet,
    /// Ghost values mirror the interior about the end node.
    Neumann,
}

/// A finite-difference operator together with how it was closed.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: SparseComplexMatrix,
    pub order: StencilOrder,
    pub closure: Closure,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Largest |i − j| over stored entries, plus one for the diagonal.
    pub fn bandwidth(&self) -> usize {
        let mut w = 0;
        for i in 0..self.matrix.dim() {
            for &j in self.matrix.row(i).0 {
                w = w.max(i.abs_diff(j));
            }
        }
        2 * w + 1
    }
}

fn banded(weights: &[f64], scale: f64, n: usize, closure: Closure) -> Result<SparseComplexMatrix, StencilError> {
    let h = weights.len() / 2;
    if n <= 2 * h {
        return Err(StencilError::TooFewPoints { n, half_width: h });
    }
    let last = (n - 1) as isize;
    let mut b = TripletBuilder::with_capacity(n, n * weights.len());
    for i in 0..n {
        b.push(i, i, C64::default());
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let q = i as isize + k as isize - h as isize;
            let target = if (0..=last).contains(&q) {
                Some(q)
            } else {
                match closure {
                    Closure::Dirichlet => None,
                    Closure::Neumann if q < 0 => Some(-q),
                    Closure::Neumann => Some(2 * last - q),
                }
            };
            if let Some(t) = target {
                b.push(i, t as usize, C64::new(w * scale, 0.0));
            }
        }
    }
    Ok(b.finalize().expect("stencil indices are in range"))
}

/// First-derivative operator.
pub fn d1(order: StencilOrder, dx: f64, n: usize, closure: Closure) -> Result<OperatorMatrix, StencilError> {
    let matrix = banded(&order.first_derivative_weights(), 1.0 / dx, n, closure)?;
    Ok(OperatorMatrix { matrix, order, closure })
}

/// Second-derivative operator.
pub fn d2(order: StencilOrder, dx: f64, n: usize, closure: Closure) -> Result<OperatorMatrix, StencilError> {
    let matrix = banded(&order.second_derivative_weights(), 1.0 / (dx * dx), n, closure)?;
    Ok(OperatorMatrix { matrix, order, closure })
}

/// A ⊗ I on an n1×n2 grid with index j = j1·n2 + j2.
pub fn kron_left(a: &SparseComplexMatrix, n2: usize) -> SparseComplexMatrix {
    let n1 = a.dim();
    let mut b = TripletBuilder::with_capacity(n1 * n2, a.nnz() * n2);
    for i1 in 0..n1 {
        let (cols, vals) = a.row(i1);
        for i2 in 0..n2 {
            for (&c, &v) in cols.iter().zip(vals) {
                b.push(i1 * n2 + i2, c * n2 + i2, v);
            }
        }
    }
    b.finalize().expect("kron indices are in range")
}

/// I ⊗ B on an n1×n2 grid with index j = j1·n2 + j2.
pub fn kron_right(n1: usize, bm: &SparseComplexMatrix) -> SparseComplexMatrix {
    let n2 = bm.dim();
    let mut b = TripletBuilder::with_capacity(n1 * n2, bm.nnz() * n1);
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let (cols, vals) = bm.row(i2);
            for (&c, &v) in cols.iter().zip(vals) {
                b.push(i1 * n2 + i2, i1 * n2 + c, v);
            }
        }
    }
    b.finalize().expect("kron indices are in range")
}

/// Kronecker sum op_x1 ⊗ I + I ⊗ op_x2.
pub fn tensor_laplacian_2d(
    op_x1: &SparseComplexMatrix,
    op_x2: &SparseComplexMatrix,
    n1: usize,
    n2: usize,
) -> Result<SparseComplexMatrix, StencilError> {
    if op_x1.dim() != n1 || op_x2.dim() != n2 {
        return Err(StencilError::DimensionMismatch {
            n1,
            n2,
            found: format!("{}x{}", op_x1.dim(), op_x2.dim()),
        });
    }
    Ok(kron_left(op_x1, n2)
        .add_scaled(C64::new(1.0, 0.0), &kron_right(n1, op_x2))
        .expect("both factors have size n1*n2"))
}
