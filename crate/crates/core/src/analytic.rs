//! Closed-form reference solutions and error metrics.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::UnitSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("reference has zero norm on the comparison region")]
    ZeroReference,
    #[error("field and reference lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("{0} is a two-dimensional reference")]
    NotOneDimensional(&'static str),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Analytic solutions of the free, harmonic and guided problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// e^{i(kx − ωt)} with ω = ħk²/(2m*).
    PlaneWave { k: f64 },
    /// Coherent state of the oscillator (m*/2)ω²x² starting at `x0`.
    CoherentState { omega: f64, x0: f64 },
    /// Spreading Gaussian of width `sigma` centred at `x0`, mean wave number `k`.
    GaussianPacket { sigma: f64, x0: f64, k: f64 },
    /// Oscillator eigenfunction n in x2, centred at `center`.
    HermiteMode { n: usize, omega: f64, center: f64 },
    /// e^{i(kx1 − ωt)} times transverse mode `mode`, ω = (ħ²k²/2m* + E_mode)/ħ.
    GuideTransient { k: f64, omega: f64, center: f64, mode: usize },
    /// Gaussian packet in x1 carried by transverse mode `mode`.
    GuidePacket { sigma: f64, x0: f64, k: f64, omega: f64, center: f64, mode: usize },
    Sum(Vec<Reference>),
}

/// Physicists' Hermite polynomial by upward recurrence.
pub fn hermite(n: usize, y: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * y);
    if n == 0 {
        return h0;
    }
    for m in 1..n {
        let h2 = 2.0 * y * h1 - 2.0 * m as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Normalized oscillator eigenfunction and its energy ħω(n + 1/2).
pub fn oscillator_mode(units: &UnitSystem, n: usize, omega: f64, y: f64) -> f64 {
    let s = units.mass() * omega / units.hbar();
    let norm = (s / std::f64::consts::PI).powf(0.25) / ((2f64.powi(n as i32)) * factorial(n)).sqrt();
    norm * hermite(n, s.sqrt() * y) * (-0.5 * s * y * y).exp()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn gaussian_packet(units: &UnitSystem, sigma: f64, x0: f64, k: f64, x: f64, t: f64) -> C64 {
    let tau = 2.0 * units.mass() * sigma * sigma / units.hbar();
    let z = C64::new(1.0, t / tau);
    let d = x - x0;
    let arg = C64::new(-(d / (2.0 * sigma)).powi(2), k * d - sigma * sigma * k * k * t / tau);
    (arg / z).exp() / z.sqrt()
}

impl Reference {
    /// Value at (x, t) for the one-dimensional references.
    pub fn eval_1d(&self, units: &UnitSystem, x: f64, t: f64) -> Result<C64, AnalyticError> {
        Ok(match self {
            Self::PlaneWave { k } => C64::from_polar(1.0, k * x - units.hbar() * k * k / (2.0 * units.mass()) * t),
            Self::CoherentState { omega, x0 } => {
                let s = units.mass() * omega / units.hbar();
                let e1 = C64::from_polar(1.0, -omega * t);
                let e2 = e1 * e1;
                let inner = x * x - 2.0 * x * x0 * e1 + 0.5 * x0 * x0 * e2 + 0.5 * x0 * x0;
                (s / std::f64::consts::PI).powf(0.25) * (-0.5 * s * inner - C64::new(0.0, 0.5 * omega * t)).exp()
            }
            Self::GaussianPacket { sigma, x0, k } => gaussian_packet(units, *sigma, *x0, *k, x, t),
            Self::Sum(parts) => {
                let mut acc = C64::default();
                for p in parts {
                    acc += p.eval_1d(units, x, t)?;
                }
                acc
            }
            Self::HermiteMode { .. } => return Err(AnalyticError::NotOneDimensional("hermite_mode")),
            Self::GuideTransient { .. } => return Err(AnalyticError::NotOneDimensional("guide_transient")),
            Self::GuidePacket { .. } => return Err(AnalyticError::NotOneDimensional("guide_packet")),
        })
    }

    /// Value at (x1, x2, t); one-dimensional references depend on x1 only.
    pub fn eval_2d(&self, units: &UnitSystem, x1: f64, x2: f64, t: f64) -> C64 {
        match self {
            Self::HermiteMode { n, omega, center } => C64::new(oscillator_mode(units, *n, *omega, x2 - center), 0.0),
            Self::GuideTransient { k, omega, center, mode } => {
                let e = units.hbar() * units.hbar() * k * k / (2.0 * units.mass())
                    + units.quantum_energy(*omega) * (*mode as f64 + 0.5);
                oscillator_mode(units, *mode, *omega, x2 - center) * C64::from_polar(1.0, k * x1 - e * t / units.hbar())
            }
            Self::GuidePacket { sigma, x0, k, omega, center, mode } => {
                let e = units.quantum_energy(*omega) * (*mode as f64 + 0.5);
                gaussian_packet(units, *sigma, *x0, *k, x1, t)
                    * C64::from_polar(oscillator_mode(units, *mode, *omega, x2 - center), -e * t / units.hbar())
            }
            Self::Sum(parts) => parts.iter().map(|p| p.eval_2d(units, x1, x2, t)).sum(),
            other => other.eval_1d(units, x1, t).expect("one-dimensional variant"),
        }
    }

    /// The three-packet superposition with mean energies 0, 25 and 75 meV.
    pub fn three_packets(units: &UnitSystem, sigma: f64, x0: f64) -> Self {
        let k = |e: f64| (2.0 * units.mass() * e).sqrt() / units.hbar();
        Self::Sum([0.0, 25.0, 75.0].iter().map(|&e| Self::GaussianPacket { sigma, x0, k: k(e) }).collect())
    }
}

/// ‖field − reference‖ / ‖reference‖ with uniform weights.
pub fn relative_error(field: &[C64], reference: &[C64]) -> Result<f64, AnalyticError> {
    if field.len() != reference.len() {
        return Err(AnalyticError::LengthMismatch(field.len(), reference.len()));
    }
    let den: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        return Err(AnalyticError::ZeroReference);
    }
    let num: f64 = field.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok((num / den).sqrt())
}

/// Left-injected scattering state of the continuous equation for a
/// piecewise-smooth potential, sampled at `samples` inside [0, length].
///
/// Integrates ψ'' = (2m*/ħ²)(V − E)ψ from x = length back to 0 with
/// classical RK4 on steps of `h` (which should divide the kinks'
/// positions), starting from the outgoing or decaying lead solution, and
/// normalizes the incoming amplitude at x = 0 to one.
pub fn shooting_reference(
    units: &UnitSystem,
    potential: impl Fn(f64) -> f64,
    length: f64,
    e_kin: f64,
    h: f64,
    samples: &[f64],
) -> Result<Vec<C64>, AnalyticError> {
    if e_kin <= 0.0 || h <= 0.0 {
        return Err(AnalyticError::Invalid("energy and step must be positive".into()));
    }
    let c = 2.0 * units.mass() / (units.hbar() * units.hbar());
    let v_l = potential(0.0);
    let energy = e_kin + v_l;
    let q2 = c * (energy - potential(length));
    // outgoing / decaying derivative at the right edge
    let d_right = if q2 >= 0.0 { C64::new(0.0, q2.sqrt()) } else { C64::new(-(-q2).sqrt(), 0.0) };
    let steps = (length / h).round() as usize;
    let h = length / steps as f64;
    let f = |x: f64, y: [C64; 2]| [y[1], c * (potential(x) - energy) * y[0]];

    let mut y = [C64::new(1.0, 0.0), d_right];
    let mut values = vec![y[0]; steps + 1];
    values[steps] = y[0];
    for s in (0..steps).rev() {
        let x = (s + 1) as f64 * h;
        let k1 = f(x, y);
        let k2 = f(x - 0.5 * h, [y[0] - 0.5 * h * k1[0], y[1] - 0.5 * h * k1[1]]);
        let k3 = f(x - 0.5 * h, [y[0] - 0.5 * h * k2[0], y[1] - 0.5 * h * k2[1]]);
        let k4 = f(x - h, [y[0] - h * k3[0], y[1] - h * k3[1]]);
        for i in 0..2 {
            y[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        values[s] = y[0];
    }
    let k = (c * e_kin).sqrt();
    let incoming = 0.5 * (y[0] + y[1] / C64::new(0.0, k));
    samples
        .iter()
        .map(|&x| {
            let pos = x / h;
            let j = pos.round();
            if (pos - j).abs() > 1e-6 || j < 0.0 || j as usize > steps {
                return Err(AnalyticError::Invalid(format!("sample {x} is not on the integration mesh")));
            }
            Ok(values[j as usize] / incoming)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units() -> UnitSystem {
        UnitSystem::default()
    }

    /// Residual of iħψ_t + (ħ²/2m*)ψ_xx − Vψ via central differences.
    fn residual_1d(r: &Reference, v: impl Fn(f64) -> f64, x: f64, t: f64) -> f64 {
        let u = units();
        let (hx, ht) = (1e-3, 1e-6);
        let p = |x, t| r.eval_1d(&u, x, t).unwrap();
        let dt = (p(x, t + ht) - p(x, t - ht)) / (2.0 * ht);
        let dxx = (p(x + hx, t) - 2.0 * p(x, t) + p(x - hx, t)) / (hx * hx);
        let res = C64::new(0.0, u.hbar()) * dt + u.kinetic_prefactor() * dxx - v(x) * p(x, t);
        res.norm() / (u.kinetic_prefactor() * dxx).norm().max(1e-3)
    }

    #[test]
    fn references_satisfy_their_equations() {
        let u = units();
        let g = Reference::GaussianPacket { sigma: 7.5, x0: 60.0, k: 0.4 };
        let pw = Reference::PlaneWave { k: 0.3 };
        let cs = Reference::CoherentState { omega: 25.0, x0: 10.0 };
        for &(x, t) in &[(55.0, 0.0), (63.0, 0.3), (70.0, 1.1)] {
            assert!(residual_1d(&g, |_| 0.0, x, t) < 1e-5);
            assert!(residual_1d(&pw, |_| 0.0, x, t) < 1e-5);
        }
        let harmonic = |x: f64| 0.5 * u.mass() * 25.0 * 25.0 * x * x;
        for &(x, t) in &[(8.0, 0.0), (-3.0, 0.05), (12.0, 0.2)] {
            assert!(residual_1d(&cs, harmonic, x, t) < 1e-5, "{}", residual_1d(&cs, harmonic, x, t));
        }
    }

    #[test]
    fn coherent_state_peaks_at_start() {
        let u = units();
        let cs = Reference::CoherentState { omega: 25.0, x0: 10.0 };
        let peak = cs.eval_1d(&u, 10.0, 0.0).unwrap().norm();
        for i in -40..40 {
            let x = 10.0 + i as f64 * 0.25;
            assert!(cs.eval_1d(&u, x, 0.0).unwrap().norm() <= peak + 1e-15);
        }
        let s = u.mass() * 25.0 / u.hbar();
        assert!((peak - (s / std::f64::consts::PI).powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn hermite_mode_normalized() {
        let u = units();
        for n in 0..3 {
            let sum: f64 = (-3000..=3000).map(|j| oscillator_mode(&u, n, 50.0, j as f64 * 0.1).powi(2) * 0.1).sum();
            assert!((sum - 1.0).abs() < 1e-6, "n={n}: {sum}");
        }
        // closed-form H_3
        assert!((hermite(3, 0.7) - (8.0 * 0.343 - 12.0 * 0.7)).abs() < 1e-12);
    }

    #[test]
    fn guide_mode_energies() {
        let u = units();
        let e0 = u.quantum_energy(50.0) * 0.5;
        assert!((e0 - 16.455).abs() < 0.01);
        assert!((3.0 * e0 - 49.36).abs() < 0.02);
    }

    #[test]
    fn packet_width_from_moments() {
        let u = units();
        let g = Reference::GaussianPacket { sigma: 5.0, x0: 0.0, k: 0.0 };
        let tau = 2.0 * u.mass() * 25.0 / u.hbar();
        for t in [0.0, 0.5 * tau, 2.0 * tau] {
            let (mut m0, mut m2) = (0.0, 0.0);
            for j in -20000..=20000 {
                let x = j as f64 * 0.01;
                let d = g.eval_1d(&u, x, t).unwrap().norm_sqr();
                m0 += d;
                m2 += d * x * x;
            }
            let width = (m2 / m0).sqrt();
            assert!((width - 5.0 * (1.0 + (t / tau).powi(2)).sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn relative_error_basics() {
        let a = vec![C64::new(1.0, 2.0), C64::new(-0.5, 0.1)];
        let b: Vec<C64> = a.iter().map(|v| 2.0 * v).collect();
        assert_eq!(relative_error(&a, &a).unwrap(), 0.0);
        assert!((relative_error(&b, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(relative_error(&a, &[C64::default(); 2]), Err(AnalyticError::ZeroReference));
    }

    #[test]
    fn shooting_reproduces_free_plane_wave() {
        let u = units();
        let k = (2.0 * u.mass() * 30.0).sqrt() / u.hbar();
        let xs: Vec<f64> = (0..=24).map(|j| j as f64 * 5.0).collect();
        let r = shooting_reference(&u, |_| 0.0, 120.0, 30.0, 1e-3, &xs).unwrap();
        for (x, v) in xs.iter().zip(&r) {
            assert!((v - C64::from_polar(1.0, k * x)).norm() < 1e-9);
        }
    }
}
