//! One-dimensional drivers: stationary scattering states and transient
//! Crank–Nicolson / Runge–Kutta evolution with either boundary strategy.

mod protocol;
mod stationary;
mod transient;

pub use protocol::{
    critical_bias, oscillating_bias, run_transient_scattering_1d, run_with_observer, ObservableSample, Snapshot1D,
    Trajectory1D, TransientScenario1D,
};
pub use stationary::{assemble_stationary_1d, solve_scattering_1d, ScatteringSolution1D, StationarySystem1D};
pub use transient::{rk4_stability_limit, Integrator, Transient1D, TransientStats};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtbc1d::{continuous_k, discrete_k, DtbcError};
use crate::field::FieldError;
use crate::grid::{build_grid_1d, BoundaryLayout, Grid1D, GridError};
use crate::linalg::{LinalgError, SparseComplexMatrix};
use crate::pml::{build_stretched_d2, PmlError, PmlProfile, PmlSettings};
use crate::potential::Potential;
use crate::stencils::{d2, Closure, StencilError, StencilOrder};
use crate::units::UnitSystem;

#[derive(Debug, Error)]
pub enum SimError {
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
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("time step {dt} ps exceeds the RK4 stability limit {limit} ps")]
    Unstable { dt: f64, limit: f64 },
}

/// Boundary treatment of a 1D run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method1D {
    /// Closed box with the given closure at both ends.
    Closed(Closure),
    /// Discrete transparent boundary conditions (second order only).
    Dtbc,
    /// Absorbing layers outside the device.
    Pml(PmlSettings),
}

/// Lead through which the incoming wave enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lead {
    Left,
    Right,
}

/// Amplitude factor applied every step after `start` (absorbing layers only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeDecay {
    pub start: f64,
    pub factor_per_step: f64,
}

/// Incoming plane wave with kinetic energy `energy` in the injection lead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub lead: Lead,
    pub energy: f64,
    pub amplitude: f64,
    pub decay: Option<AmplitudeDecay>,
}

impl Injection {
    pub fn left(energy: f64) -> Self {
        Self { lead: Lead::Left, energy, amplitude: 1.0, decay: None }
    }

    /// Amplitude at time `t` for a run with step `dt`.
    pub fn amplitude_at(&self, t: f64, dt: f64) -> f64 {
        match self.decay {
            Some(d) if t > d.start => self.amplitude * d.factor_per_step.powf((t - d.start) / dt),
            _ => self.amplitude,
        }
    }
}

/// Wave number used for injection at a given order.
///
/// The second-order scheme uses the exact discrete dispersion; higher
/// orders fall back to the continuum relation.
pub fn injection_k(units: &UnitSystem, order: StencilOrder, e_kin: f64, dx: f64) -> Result<f64, DtbcError> {
    match order {
        StencilOrder::Second => discrete_k(units, e_kin, dx),
        _ => continuous_k(units, e_kin),
    }
}

/// Grid, potential and spatial operator of a 1D problem.
#[derive(Debug, Clone)]
pub struct Problem1D {
    pub units: UnitSystem,
    pub grid: Grid1D,
    pub potential: Potential,
    pub order: StencilOrder,
    pub method: Method1D,
    /// −ħ²/(2m*)·D² including stretching and closure.
    kinetic: SparseComplexMatrix,
}

impl Problem1D {
    /// Device [origin, origin + length] discretized with spacing `dx`.
    pub fn new(
        units: UnitSystem,
        length: f64,
        dx: f64,
        potential: Potential,
        order: StencilOrder,
        method: Method1D,
    ) -> Result<Self, SimError> {
        Self::with_origin(units, 0.0, length, dx, potential, order, method)
    }

    pub fn with_origin(
        units: UnitSystem,
        origin: f64,
        length: f64,
        dx: f64,
        potential: Potential,
        order: StencilOrder,
        method: Method1D,
    ) -> Result<Self, SimError> {
        let layout = match method {
            Method1D::Pml(s) => BoundaryLayout::pml(s.layer_width, dx),
            _ => BoundaryLayout::Dtbc,
        };
        if method == Method1D::Dtbc && order != StencilOrder::Second {
            return Err(SimError::Invalid("transparent boundary conditions require the second-order stencil".into()));
        }
        let grid = build_grid_1d(length, dx, layout)?.shifted(origin);
        let d = match method {
            Method1D::Closed(c) => d2(order, dx, grid.len(), c)?,
            Method1D::Dtbc => d2(order, dx, grid.len(), Closure::Dirichlet)?,
            Method1D::Pml(s) => {
                let profile = PmlProfile::new(&s, grid.pml().expect("layout has zoning"));
                build_stretched_d2(&profile, order, &grid)?
            }
        };
        let mut kinetic = d.matrix;
        let pref = -units.kinetic_prefactor();
        kinetic.values_mut().iter_mut().for_each(|v| *v *= pref);
        Ok(Self { units, grid, potential, order, method, kinetic })
    }

    pub fn kinetic(&self) -> &SparseComplexMatrix {
        &self.kinetic
    }

    pub fn potential_at(&self, t: f64) -> Vec<f64> {
        (0..self.grid.len()).map(|j| self.potential.value_1d(&self.units, self.grid.x(j), t)).collect()
    }

    /// Kinetic part plus diag(V(t)).
    pub fn hamiltonian(&self, t: f64) -> SparseComplexMatrix {
        let v: Vec<C64> = self.potential_at(t).into_iter().map(|x| C64::new(x, 0.0)).collect();
        self.kinetic.add_scaled(C64::new(1.0, 0.0), &SparseComplexMatrix::diagonal(&v)).expect("same size")
    }

    /// Potential at the device boundary on the given side.
    pub fn lead_potential(&self, lead: Lead, t: f64) -> f64 {
        let j = match lead {
            Lead::Left => self.grid.device_lo(),
            Lead::Right => self.grid.device_hi(),
        };
        self.potential.value_1d(&self.units, self.grid.x(j), t)
    }

    /// Incoming wave A·e^{±ik(x − x_b)} sampled on the whole grid.
    pub fn incoming_profile(&self, injection: &Injection, k: f64) -> Vec<C64> {
        let (x_b, sign) = match injection.lead {
            Lead::Left => (self.grid.x(self.grid.device_lo()), 1.0),
            Lead::Right => (self.grid.x(self.grid.device_hi()), -1.0),
        };
        (0..self.grid.len())
            .map(|j| C64::from_polar(injection.amplitude, sign * k * (self.grid.x(j) - x_b)))
            .collect()
    }

    /// Unknowns on the lead side of the injection interface.
    pub fn lead_mask(&self, lead: Lead) -> Vec<bool> {
        (0..self.grid.len())
            .map(|j| match lead {
                Lead::Left => j < self.grid.device_lo(),
                Lead::Right => j > self.grid.device_hi(),
            })
            .collect()
    }

    /// dx-weighted squared norm over the device.
    pub fn device_norm_sqr(&self, psi: &[C64]) -> f64 {
        crate::field::weighted_norm_sqr(&psi[self.grid.device()], self.grid.dx())
    }
}
