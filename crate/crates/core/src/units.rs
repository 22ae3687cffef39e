//! Internal unit system: lengths in nm, times in ps, energies in meV.
//!
//! Magnetic fields are kept in tesla at the API surface and converted with
//! [`UnitSystem::charge_times_field`]. Applied voltages in mV map one-to-one
//! onto potential energies in meV.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Reduced Planck constant in meV·ps.
pub const HBAR: f64 = 0.658_211_956_9;
/// Speed of light in nm/ps.
pub const SPEED_OF_LIGHT: f64 = 299_792.458;
/// Electron rest energy in meV.
pub const ELECTRON_REST_ENERGY: f64 = 510_998.950_00e3;
/// GaAs conduction-band effective mass ratio.
pub const GAAS_MASS_RATIO: f64 = 0.067;
/// e·(1 T) in meV·ps/nm².
pub const CHARGE_TESLA: f64 = 1e-3;

/// Free electron mass in meV·ps²/nm².
pub fn electron_mass() -> f64 {
    ELECTRON_REST_ENERGY / (SPEED_OF_LIGHT * SPEED_OF_LIGHT)
}

/// Constants shared by every solver. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    hbar: f64,
    mass: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::with_mass_ratio(GAAS_MASS_RATIO)
    }
}

impl UnitSystem {
    pub fn with_mass_ratio(ratio: f64) -> Self {
        Self { hbar: HBAR, mass: ratio * electron_mass() }
    }

    #[inline]
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Effective mass in meV·ps²/nm².
    #[inline]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// ħ²/(2m*) in meV·nm².
    #[inline]
    pub fn kinetic_prefactor(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }

    /// Potential energy (meV) of an electron at applied voltage `mv` (mV).
    #[inline]
    pub fn voltage_energy(&self, mv: f64) -> f64 {
        -mv
    }

    /// e·B in meV·ps/nm² for a field given in tesla.
    #[inline]
    pub fn charge_times_field(&self, tesla: f64) -> f64 {
        CHARGE_TESLA * tesla
    }

    /// e·Φ0 with Φ0 = h/(2e), in meV·ps.
    #[inline]
    pub fn charge_times_flux_quantum(&self) -> f64 {
        PI * self.hbar
    }

    /// Flux quantum h/(2e) expressed in T·nm².
    #[inline]
    pub fn flux_quantum(&self) -> f64 {
        self.charge_times_flux_quantum() / CHARGE_TESLA
    }

    /// Continuum energy ħ²k²/(2m*).
    #[inline]
    pub fn free_energy(&self, k: f64) -> f64 {
        self.kinetic_prefactor() * k * k
    }

    /// Harmonic level spacing ħω for ω in 1/ps.
    #[inline]
    pub fn quantum_energy(&self, omega: f64) -> f64 {
        self.hbar * omega
    }
}

/// Physical dimension of a configured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Energy,
    Voltage,
    MagneticField,
    Rate,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Energy => "energy",
            Dimension::Voltage => "voltage",
            Dimension::MagneticField => "magnetic field",
            Dimension::Rate => "inverse time",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum UnitError {
    #[error("quantity `{0}` has no unit suffix")]
    MissingUnit(String),
    #[error("cannot parse number in `{0}`")]
    BadNumber(String),
    #[error("unknown {dimension} unit `{unit}`")]
    UnknownUnit { unit: String, dimension: Dimension },
}

fn scale_for(unit: &str, dimension: Dimension) -> Option<f64> {
    let s = match (dimension, unit) {
        (Dimension::Length, "nm") => 1.0,
        (Dimension::Length, "pm") => 1e-3,
        (Dimension::Length, "A") => 0.1,
        (Dimension::Length, "um") => 1e3,
        (Dimension::Length, "m") => 1e9,
        (Dimension::Time, "ps") => 1.0,
        (Dimension::Time, "fs") => 1e-3,
        (Dimension::Time, "ns") => 1e3,
        (Dimension::Time, "s") => 1e12,
        (Dimension::Energy, "meV") => 1.0,
        (Dimension::Energy, "ueV") => 1e-3,
        (Dimension::Energy, "eV") => 1e3,
        (Dimension::Voltage, "mV") => 1.0,
        (Dimension::Voltage, "uV") => 1e-3,
        (Dimension::Voltage, "V") => 1e3,
        (Dimension::MagneticField, "T") => 1.0,
        (Dimension::MagneticField, "mT") => 1e-3,
        (Dimension::Rate, "1/ps") => 1.0,
        (Dimension::Rate, "1/fs") => 1e3,
        (Dimension::Rate, "1/s") => 1e-12,
        _ => return None,
    };
    Some(s)
}

/// Parses strings like `"0.5 nm"` or `"-25mV"` into internal units.
///
/// Times come back in ps, energies in meV, voltages in mV, fields in T and
/// rates in 1/ps.
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64, UnitError> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            c.is_ascii_alphabetic() && !(matches!(c, 'e' | 'E') && exponent_marker(t, i))
                || (c == '1' && t[i..].starts_with("1/"))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| UnitError::MissingUnit(t.to_string()))?;
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| UnitError::BadNumber(t.to_string()))?;
    let unit = unit.trim();
    let scale = scale_for(unit, dimension)
        .ok_or_else(|| UnitError::UnknownUnit { unit: unit.to_string(), dimension })?;
    Ok(value * scale)
}

/// True when the `e` at byte `i` is part of a float exponent.
fn exponent_marker(t: &str, i: usize) -> bool {
    let before = t[..i].chars().last();
    let after = t[i + 1..].chars().next();
    matches!(before, Some(c) if c.is_ascii_digit() || c == '.')
        && matches!(after, Some(c) if c.is_ascii_digit() || c == '-' || c == '+')
}
