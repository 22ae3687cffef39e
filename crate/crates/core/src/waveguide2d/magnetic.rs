use serde::{Deserialize, Serialize};

use crate::potential::Waveform;
use crate::units::UnitSystem;

/// Flux tube of radius `r0`: uniform field B0(t) inside, zero outside, in
/// the Coulomb gauge. The vector potential is cut to zero within `delta`
/// of either contact so the leads stay field-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    /// B0(t) in tesla.
    pub b0: Waveform,
    pub r0: f64,
    pub center: (f64, f64),
    pub delta: f64,
    /// Device length L1; the cut applies for x1 > L1 − delta.
    pub length: f64,
}

impl MagneticField {
    /// Static field centered in a device of `length` × `width`.
    pub fn centered(tesla: f64, r0: f64, length: f64, width: f64) -> Self {
        Self { b0: Waveform::constant(tesla), r0, center: (0.5 * length, 0.5 * width), delta: 2.5, length }
    }

    /// Field that encloses `flux` (T·nm²) in the disc of radius r0.
    pub fn tesla_for_flux(&self, flux: f64) -> f64 {
        flux / (std::f64::consts::PI * self.r0 * self.r0)
    }

    /// Vector potential per tesla of B0, in nm.
    pub fn shape(&self, x1: f64, x2: f64) -> (f64, f64) {
        if x1 < self.delta || x1 > self.length - self.delta {
            return (0.0, 0.0);
        }
        let (x, y) = (x1 - self.center.0, x2 - self.center.1);
        let r2 = x * x + y * y;
        let r02 = self.r0 * self.r0;
        let f = if r2 <= r02 { 0.5 } else { 0.5 * r02 / r2 };
        (-f * y, f * x)
    }

    /// A(x, t) in T·nm.
    pub fn vector_potential(&self, x1: f64, x2: f64, t: f64) -> (f64, f64) {
        let b = self.b0.value(t);
        let (a1, a2) = self.shape(x1, x2);
        (b * a1, b * a2)
    }

    /// Flux through the disc, B0·π·r0².
    pub fn flux(&self, t: f64) -> f64 {
        self.b0.value(t) * std::f64::consts::PI * self.r0 * self.r0
    }

    /// Enclosed flux in units of the flux quantum.
    pub fn flux_in_quanta(&self, units: &UnitSystem, t: f64) -> f64 {
        self.flux(t) / units.flux_quantum()
    }

    pub fn is_time_dependent(&self) -> bool {
        !self.b0.is_constant()
    }
}
