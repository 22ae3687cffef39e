//! Two-dimensional waveguides on a reduced mesh: transverse lead modes,
//! Hamiltonian assembly with an optional magnetic flux tube, stationary
//! scattering states, transmission and bound states.

mod magnetic;
mod modes;
mod stationary;

pub use magnetic::MagneticField;
pub use modes::{transverse_modes, TransverseModeBasis};
pub use stationary::{
    assemble_stationary_2d, bound_states, dtbc_rows_2d, flux_sweep, pml_injection_2d, solve_scattering_2d, transmission,
    BoundaryRow, ScatteringSolution2D, StationarySystem2D,
};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtbc1d::DtbcError;
use crate::grid::{build_grid_2d, reduce_mesh, BoundaryLayout, Grid2D, GridError, LeadRange};
use crate::linalg::{LinalgError, SparseComplexMatrix, TripletBuilder};
use crate::pml::{build_stretched_d2, PmlError, PmlProfile, PmlSettings};
use crate::potential::Potential;
use crate::sim1d::Lead;
use crate::stencils::{d1, d2, kron_left, kron_right, Closure, StencilError, StencilOrder};
use crate::units::UnitSystem;

#[derive(Debug, Error)]
pub enum WaveguideError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error(transparent)]
    Pml(#[from] PmlError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Dtbc(#[from] DtbcError),
    #[error("lead has no retained transverse point")]
    EmptyLead,
    #[error("{modes} modes propagate in the {lead:?} lead at this energy; use a current-based transmission instead")]
    MultiMode { lead: Lead, modes: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Boundary treatment along x1. The walls at x2 = 0 and x2 = L2 are
/// always hard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method2D {
    /// Hard walls at x1 = 0 and x1 = L1 too.
    Closed,
    /// Mode-resolved transparent boundary rows (second order only).
    Dtbc,
    Pml(PmlSettings),
}

/// Geometry and discretization of a device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    pub length: f64,
    pub width: f64,
    pub dx: f64,
    pub potential: Potential,
    pub order: StencilOrder,
    pub method: Method2D,
    pub magnetic: Option<MagneticField>,
    /// Points with V above this value (meV) are eliminated.
    pub threshold: f64,
}

impl DeviceSpec {
    pub fn new(length: f64, width: f64, dx: f64, potential: Potential, order: StencilOrder, method: Method2D) -> Self {
        Self { length, width, dx, potential, order, method, magnetic: None, threshold: f64::INFINITY }
    }
}

/// Mesh, operators and lead bases of a 2D device.
#[derive(Debug, Clone)]
pub struct Problem2D {
    pub units: UnitSystem,
    pub grid: Grid2D,
    pub potential: Potential,
    pub order: StencilOrder,
    pub method: Method2D,
    pub magnetic: Option<MagneticField>,
    kinetic: SparseComplexMatrix,
    /// Symmetrized convection operator per tesla of B0.
    convection: Option<SparseComplexMatrix>,
    /// e²|A|²/(2m*) per T².
    diamagnetic: Vec<f64>,
    static_potential: Vec<f64>,
    bases: [TransverseModeBasis; 2],
}

fn side(lead: Lead) -> usize {
    match lead {
        Lead::Left => 0,
        Lead::Right => 1,
    }
}

impl Problem2D {
    pub fn new(units: UnitSystem, spec: DeviceSpec) -> Result<Self, WaveguideError> {
        let DeviceSpec { length, width, dx, potential, order, method, magnetic, threshold } = spec;
        if method == Method2D::Dtbc && order != StencilOrder::Second {
            return Err(WaveguideError::Invalid("transparent boundary rows require the second-order stencil".into()));
        }
        let layout = match method {
            // the onset clears the widest stencil reaching out of the device
            Method2D::Pml(s) => BoundaryLayout::Pml {
                layer_width: s.layer_width,
                onset_offset: order.half_width().max(2) as f64 * dx,
            },
            _ => BoundaryLayout::Dtbc,
        };
        let full = build_grid_2d(length, width, dx, layout)?;
        let grid = reduce_mesh(&full, |x1, x2| potential.value_2d(&units, x1, x2, 0.0), threshold)?;
        let (n1, n2) = (grid.n1(), grid.n2());
        let keep = grid.retained();

        let op1 = match method {
            Method2D::Pml(s) => {
                let profile = PmlProfile::new(&s, grid.axis1().pml().expect("layout has zoning"));
                build_stretched_d2(&profile, order, grid.axis1())?.matrix
            }
            _ => d2(order, dx, n1, Closure::Dirichlet)?.matrix,
        };
        let op2 = d2(order, dx, n2, Closure::Dirichlet)?.matrix;
        let lap = kron_left(&op1, n2).add_scaled(C64::new(1.0, 0.0), &kron_right(n1, &op2))?;
        let kinetic = lap.restrict(keep).affine(C64::default(), C64::new(-units.kinetic_prefactor(), 0.0));

        let static_potential: Vec<f64> = keep
            .iter()
            .map(|&f| {
                let (j1, j2) = grid.split(f);
                potential.value_2d(&units, grid.x1(j1), grid.x2(j2), 0.0)
            })
            .collect();

        let (convection, diamagnetic) = match &magnetic {
            Some(field) => {
                let shapes: Vec<(f64, f64)> = (0..grid.full_len())
                    .map(|f| {
                        let (j1, j2) = grid.split(f);
                        field.shape(grid.x1(j1), grid.x2(j2))
                    })
                    .collect();
                let e = units.charge_times_field(1.0);
                let c = -units.hbar() / (2.0 * units.mass()) * e;
                let dx1 = kron_left(&d1(order, dx, n1, Closure::Dirichlet)?.matrix, n2);
                let dx2 = kron_right(n1, &d1(order, dx, n2, Closure::Dirichlet)?.matrix);
                let mut b = TripletBuilder::with_capacity(grid.full_len(), dx1.nnz() + dx2.nnz());
                // −i(ħ/2m)(diag(eA)·D + D·diag(eA)) per component
                for (op, comp) in [(&dx1, 0usize), (&dx2, 1)] {
                    let a = |f: usize| if comp == 0 { shapes[f].0 } else { shapes[f].1 };
                    for i in 0..op.dim() {
                        let (cols, vals) = op.row(i);
                        for (&k, &v) in cols.iter().zip(vals) {
                            let w = v.re * (a(i) + a(k));
                            if w != 0.0 {
                                b.push(i, k, C64::new(0.0, c * w));
                            }
                        }
                    }
                }
                let conv = b.finalize()?.restrict(keep);
                let dia = keep
                    .iter()
                    .map(|&f| e * e * (shapes[f].0.powi(2) + shapes[f].1.powi(2)) / (2.0 * units.mass()))
                    .collect();
                (Some(conv), dia)
            }
            None => (None, vec![0.0; keep.len()]),
        };

        let basis = |lead: LeadRange| -> Result<TransverseModeBasis, WaveguideError> {
            let x1 = grid.x1(lead.column);
            let profile: Vec<f64> =
                (lead.j2_lo..=lead.j2_hi).map(|j2| potential.value_2d(&units, x1, grid.x2(j2), 0.0)).collect();
            transverse_modes(&units, &profile, dx, order)
        };
        let bases = [basis(grid.lead(0))?, basis(grid.lead(1))?];
        Ok(Self {
            units,
            grid,
            potential,
            order,
            method,
            magnetic,
            kinetic,
            convection,
            diamagnetic,
            static_potential,
            bases,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn kinetic(&self) -> &SparseComplexMatrix {
        &self.kinetic
    }

    pub fn basis(&self, lead: Lead) -> &TransverseModeBasis {
        &self.bases[side(lead)]
    }

    pub fn lead_range(&self, lead: Lead) -> LeadRange {
        self.grid.lead(side(lead))
    }

    /// Reduced indices of the lead's transverse range at column `j1`.
    pub fn column(&self, lead: Lead, j1: usize) -> Vec<usize> {
        self.grid.column_indices(j1, self.lead_range(lead))
    }

    /// Device boundary column on the given side.
    pub fn boundary_column(&self, lead: Lead) -> usize {
        match lead {
            Lead::Left => self.grid.axis1().device_lo(),
            Lead::Right => self.grid.axis1().device_hi(),
        }
    }

    pub fn potential_at(&self, t: f64) -> Vec<f64> {
        if !self.potential.is_time_dependent() {
            return self.static_potential.clone();
        }
        self.grid
            .retained()
            .iter()
            .map(|&f| {
                let (j1, j2) = self.grid.split(f);
                self.potential.value_2d(&self.units, self.grid.x1(j1), self.grid.x2(j2), t)
            })
            .collect()
    }

    /// B0 at time `t` in tesla, zero without a field.
    pub fn field_strength(&self, t: f64) -> f64 {
        self.magnetic.as_ref().map_or(0.0, |m| m.b0.value(t))
    }

    pub fn is_time_dependent(&self) -> bool {
        self.potential.is_time_dependent() || self.magnetic.as_ref().is_some_and(MagneticField::is_time_dependent)
    }

    /// H for the potential `v` (reduced) and field strength `b` (tesla).
    ///
    /// The sparsity pattern does not depend on `b`.
    pub fn hamiltonian_with(&self, v: &[f64], b: f64) -> SparseComplexMatrix {
        let diag: Vec<C64> = v.iter().zip(&self.diamagnetic).map(|(&v, &d)| C64::new(v + b * b * d, 0.0)).collect();
        let h = self.kinetic.add_scaled(C64::new(1.0, 0.0), &SparseComplexMatrix::diagonal(&diag)).expect("same size");
        match &self.convection {
            Some(c) => h.add_scaled(C64::new(b, 0.0), c).expect("same size"),
            None => h,
        }
    }

    /// out = H u without assembling H.
    pub fn apply_hamiltonian(&self, v: &[f64], b: f64, u: &[C64], out: &mut [C64]) {
        self.kinetic.matvec_into(u, out);
        for (((o, &x), &vi), &d) in out.iter_mut().zip(u).zip(v).zip(&self.diamagnetic) {
            *o += (vi + b * b * d) * x;
        }
        if let (Some(c), true) = (&self.convection, b != 0.0) {
            let mut tmp = vec![C64::default(); u.len()];
            c.matvec_into(u, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += b * t);
        }
    }

    pub fn hamiltonian(&self, t: f64) -> SparseComplexMatrix {
        self.hamiltonian_with(&self.potential_at(t), self.field_strength(t))
    }

    /// Copy with B0 fixed at `tesla`.
    pub fn with_field_strength(&self, tesla: f64) -> Result<Self, WaveguideError> {
        let mut p = self.clone();
        let field = p.magnetic.as_mut().ok_or_else(|| WaveguideError::Invalid("device has no magnetic field".into()))?;
        field.b0 = crate::potential::Waveform::constant(tesla);
        Ok(p)
    }

    /// Unknowns on the lead side of the injection interface.
    pub fn lead_mask(&self, lead: Lead) -> Vec<bool> {
        let (lo, hi) = (self.grid.axis1().device_lo(), self.grid.axis1().device_hi());
        self.grid
            .retained()
            .iter()
            .map(|&f| {
                let j1 = self.grid.split(f).0;
                match lead {
                    Lead::Left => j1 < lo,
                    Lead::Right => j1 > hi,
                }
            })
            .collect()
    }

    /// amplitude·χ⁽⁰⁾(x2)·e^{±ik(x1 − x_b)} on the reduced mesh, zero
    /// outside the lead's transverse range.
    pub fn incoming_profile(&self, lead: Lead, k: f64, amplitude: f64) -> Vec<C64> {
        let range = self.lead_range(lead);
        let chi = &self.basis(lead).modes[0];
        let x_b = self.grid.x1(self.boundary_column(lead));
        let sign = if lead == Lead::Left { 1.0 } else { -1.0 };
        self.grid
            .retained()
            .iter()
            .map(|&f| {
                let (j1, j2) = self.grid.split(f);
                if (range.j2_lo..=range.j2_hi).contains(&j2) {
                    C64::from_polar(amplitude * chi[j2 - range.j2_lo], sign * k * (self.grid.x1(j1) - x_b))
                } else {
                    C64::default()
                }
            })
            .collect()
    }

    /// Values on the device columns of the full mesh (eliminated points
    /// zero), ordered j1-major.
    pub fn device_values(&self, u: &[C64]) -> Vec<C64> {
        let full = self.grid.expand(u);
        let n2 = self.grid.n2();
        let ax = self.grid.axis1();
        full[ax.device_lo() * n2..(ax.device_hi() + 1) * n2].to_vec()
    }

    /// `f(x1, x2)` sampled in the layout of [`Self::device_values`], zero
    /// at eliminated points.
    pub fn device_samples(&self, f: impl Fn(f64, f64) -> C64) -> Vec<C64> {
        let samples: Vec<C64> = self
            .grid
            .retained()
            .iter()
            .map(|&r| {
                let (j1, j2) = self.grid.split(r);
                f(self.grid.x1(j1), self.grid.x2(j2))
            })
            .collect();
        self.device_values(&samples)
    }

    /// dx²-weighted squared norm over the device columns.
    pub fn device_norm_sqr(&self, u: &[C64]) -> f64 {
        let dx = self.dx();
        self.device_values(u).iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn guide(method: Method2D, order: StencilOrder, magnetic: Option<MagneticField>) -> Problem2D {
        let mut spec = DeviceSpec::new(
            40.0,
            30.0,
            1.0,
            Potential::ParabolicGuide { omega: 50.0, center: 15.0 },
            order,
            method,
        );
        spec.magnetic = magnetic;
        Problem2D::new(UnitSystem::default(), spec).unwrap()
    }

    fn max_abs_diff(a: &SparseComplexMatrix, b: &SparseComplexMatrix) -> f64 {
        (0..a.dim())
            .flat_map(|i| {
                let (cols, vals) = a.row(i);
                cols.iter().zip(vals).map(move |(&j, &v)| (v - b.get(j, i).conj()).norm()).collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn magnetic_hamiltonian_is_hermitian() {
        for order in StencilOrder::ALL {
            let p = guide(Method2D::Closed, order, Some(MagneticField::centered(2.0, 5.0, 40.0, 30.0)));
            let h = p.hamiltonian(0.0);
            let ht = h.conj_transpose();
            assert!(max_abs_diff(&h, &ht) <= 1e-12 * h.max_abs());
            assert!(p.convection.as_ref().unwrap().max_abs() > 0.0);
        }
    }

    #[test]
    fn zero_field_matches_plain_operator() {
        let plain = guide(Method2D::Closed, StencilOrder::Fourth, None);
        let mut f = MagneticField::centered(0.0, 5.0, 40.0, 30.0);
        f.b0 = crate::potential::Waveform::constant(0.0);
        let mag = guide(Method2D::Closed, StencilOrder::Fourth, Some(f));
        let x: Vec<C64> = (0..plain.len()).map(|j| C64::new((j as f64).cos(), 0.1 * j as f64)).collect();
        assert_eq!(plain.hamiltonian(0.0).matvec(&x), mag.hamiltonian(0.0).matvec(&x));
    }

    #[test]
    fn dtbc_needs_second_order() {
        let spec = DeviceSpec::new(40.0, 30.0, 1.0, Potential::Zero, StencilOrder::Sixth, Method2D::Dtbc);
        assert!(matches!(Problem2D::new(UnitSystem::default(), spec), Err(WaveguideError::Invalid(_))));
    }

    #[test]
    fn lead_blocks_are_first_and_last() {
        let p = guide(Method2D::Dtbc, StencilOrder::Second, None);
        let m = p.basis(Lead::Left).len();
        assert_eq!(p.column(Lead::Left, 0), (0..m).collect::<Vec<_>>());
        let n = p.len();
        assert_eq!(p.column(Lead::Right, p.boundary_column(Lead::Right)), (n - m..n).collect::<Vec<_>>());
    }
}
