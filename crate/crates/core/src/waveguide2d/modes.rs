use num_complex::Complex64 as C64;

use super::WaveguideError;
use crate::linalg::{dense_hermitian_eigs, tridiag_eigs};
use crate::stencils::{d2, Closure, StencilOrder};
use crate::units::UnitSystem;

/// Eigenpairs of the discrete transverse Hamiltonian of one lead.
///
/// Vectors live on the retained transverse range and are real,
/// orthonormal under ⟨u, v⟩ = dx·Σ u v̄.
#[derive(Debug, Clone, PartialEq)]
pub struct TransverseModeBasis {
    /// Ascending mode energies in meV.
    pub energies: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub dx: f64,
}

impl TransverseModeBasis {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Coefficient dx·Σ φ χ⁽ᵐ⁾ of a column slice.
    pub fn coefficient(&self, m: usize, column: &[C64]) -> C64 {
        self.dx * column.iter().zip(&self.modes[m]).map(|(v, &c)| v * c).sum::<C64>()
    }

    /// All M coefficients of a column slice.
    pub fn project(&self, column: &[C64]) -> Vec<C64> {
        (0..self.len()).map(|m| self.coefficient(m, column)).collect()
    }

    /// Σ c⁽ᵐ⁾ χ⁽ᵐ⁾.
    pub fn reconstruct(&self, coefficients: &[C64]) -> Vec<C64> {
        let n = self.modes.first().map_or(0, Vec::len);
        let mut out = vec![C64::default(); n];
        for (c, mode) in coefficients.iter().zip(&self.modes) {
            out.iter_mut().zip(mode).for_each(|(o, &x)| *o += c * x);
        }
        out
    }

    /// Number of modes with E⁽ᵐ⁾ < energy.
    pub fn propagating(&self, energy: f64) -> usize {
        self.energies.iter().take_while(|&&e| e < energy).count()
    }
}

/// Modes of −ħ²/(2m*)∂² + V on a contiguous transverse range with zero
/// values just outside it.
pub fn transverse_modes(
    units: &UnitSystem,
    profile: &[f64],
    dx: f64,
    order: StencilOrder,
) -> Result<TransverseModeBasis, WaveguideError> {
    let m = profile.len();
    if m == 0 {
        return Err(WaveguideError::EmptyLead);
    }
    let pref = units.kinetic_prefactor();
    let (energies, modes) = if order == StencilOrder::Second || m <= 2 * order.half_width() {
        let c = pref / (dx * dx);
        let diag: Vec<f64> = profile.iter().map(|v| 2.0 * c + v).collect();
        let off = vec![-c; m - 1];
        let e = tridiag_eigs(&diag, &off, m, dx)?;
        (e.values, e.vectors)
    } else {
        let lap = d2(order, dx, m, Closure::Dirichlet)?.matrix;
        let mut dense: Vec<C64> = lap.to_dense().into_iter().map(|v| -pref * v).collect();
        for (i, v) in profile.iter().enumerate() {
            dense[i * m + i] += v;
        }
        let e = dense_hermitian_eigs(m, &dense)?;
        let scale = 1.0 / dx.sqrt();
        let vectors = e
            .vectors
            .into_iter()
            .map(|v| {
                // rotate so the largest entry is real and positive
                let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
                let phase = big.conj() / big.norm();
                v.iter().map(|x| (x * phase).re * scale).collect()
            })
            .collect();
        (e.values, vectors)
    };
    Ok(TransverseModeBasis { energies, modes, dx })
}
