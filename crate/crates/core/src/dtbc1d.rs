//! Discrete transparent boundary conditions for the second-order scheme:
//! dispersion relations, stationary boundary multipliers, the Crank–Nicolson
//! convolution kernel and the gauge factors for time-dependent leads.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::units::UnitSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtbcError {
    #[error("kinetic energy {0} meV is negative; no real wave number")]
    NegativeEnergy(f64),
    #[error("kinetic energy {energy} meV exceeds the grid band edge {limit} meV (2ħ²/(m*dx²))")]
    BeyondBand { energy: f64, limit: f64 },
    #[error("history holds {found} steps but {expected} are required")]
    HistoryMismatch { expected: usize, found: usize },
    #[error("gauge sequence holds {found} entries but step {needed} was requested")]
    GaugeTooShort { needed: usize, found: usize },
}

/// Dimensionless m*·E·dx²/ħ².
fn reduced_energy(units: &UnitSystem, e_kin: f64, dx: f64) -> f64 {
    units.mass() * e_kin * dx * dx / (units.hbar() * units.hbar())
}

/// k = √(2m*E)/ħ.
pub fn continuous_k(units: &UnitSystem, e_kin: f64) -> Result<f64, DtbcError> {
    if e_kin < 0.0 {
        return Err(DtbcError::NegativeEnergy(e_kin));
    }
    Ok((2.0 * units.mass() * e_kin).sqrt() / units.hbar())
}

/// k = arccos(1 − m*E dx²/ħ²)/dx for the three-point Laplacian.
pub fn discrete_k(units: &UnitSystem, e_kin: f64, dx: f64) -> Result<f64, DtbcError> {
    if e_kin < 0.0 {
        return Err(DtbcError::NegativeEnergy(e_kin));
    }
    let a = reduced_energy(units, e_kin, dx);
    if a > 2.0 {
        return Err(DtbcError::BeyondBand { energy: e_kin, limit: discrete_energy_limit(units, dx) });
    }
    Ok((1.0 - a).acos() / dx)
}

/// Largest kinetic energy carried by the three-point scheme.
pub fn discrete_energy_limit(units: &UnitSystem, dx: f64) -> f64 {
    2.0 * units.hbar() * units.hbar() / (units.mass() * dx * dx)
}

/// Kinetic energy of a discrete plane wave e^{ikx}.
pub fn discrete_energy(units: &UnitSystem, k: f64, dx: f64) -> f64 {
    units.hbar() * units.hbar() * (1.0 - (k * dx).cos()) / (units.mass() * dx * dx)
}

/// Crank–Nicolson frequency ω = (2/dt)·arctan(E dt/(2ħ)).
pub fn discrete_omega(units: &UnitSystem, energy: f64, dt: f64) -> f64 {
    2.0 / dt * (energy * dt / (2.0 * units.hbar())).atan()
}

/// Multiplier α with φ_j = αʲ solving the free discrete equation.
///
/// The branch satisfies |α| ≤ 1, with Im α ≥ 0 on the unit circle, so that
/// αʲ is right-going or decays to the right.
pub fn stationary_alpha(units: &UnitSystem, e_kin: f64, dx: f64) -> C64 {
    let a = reduced_energy(units, e_kin, dx);
    if (0.0..=2.0).contains(&a) {
        C64::new(1.0 - a, (2.0 * a - a * a).max(0.0).sqrt())
    } else {
        let root = (a * a - 2.0 * a).sqrt();
        let alpha = if a < 0.0 { 1.0 - a - root } else { 1.0 - a + root };
        C64::new(alpha, 0.0)
    }
}

/// Coefficients of the two stationary boundary equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryRows {
    /// Coefficients of (φ0, φ1) and the right-hand side.
    pub left: [C64; 2],
    pub left_rhs: C64,
    /// Coefficients of (φ_{J−1}, φ_J); the right-hand side is zero.
    pub right: [C64; 2],
}

/// φ0 − α_ℓφ1 = A(1 − α_ℓ²) and α_r φ_{J−1} − φ_J = 0.
pub fn stationary_dtbc_rows(alpha_l: C64, alpha_r: C64, amplitude: C64) -> StationaryRows {
    StationaryRows {
        left: [C64::new(1.0, 0.0), -alpha_l],
        left_rhs: amplitude * (1.0 - alpha_l * alpha_l),
        right: [alpha_r, C64::new(-1.0, 0.0)],
    }
}

/// R = 4m*dx²/(ħ dt).
pub fn kernel_ratio(units: &UnitSystem, dx: f64, dt: f64) -> f64 {
    4.0 * units.mass() * dx * dx / (units.hbar() * dt)
}

/// Convolution coefficients s⁽ⁿ⁾ of the transient boundary condition.
#[derive(Debug, Clone)]
pub struct ConvolutionKernel {
    pub r: f64,
    pub phi: f64,
    pub mu: f64,
    pub alpha: C64,
    s: Vec<C64>,
    legendre: (f64, f64),
}

/// Kernel with coefficients s⁽⁰⁾..=s⁽ⁿ_max⁾.
pub fn kernel_coefficients(r: f64, n_max: usize) -> ConvolutionKernel {
    let phi = (4.0 / r).atan();
    let mu = r / (r * r + 16.0).sqrt();
    let alpha = C64::new(0.0, 0.5) * (r * r * (r * r + 16.0)).powf(0.25) * C64::from_polar(1.0, 0.5 * phi);
    let mut k = ConvolutionKernel { r, phi, mu, alpha, s: Vec::new(), legendre: (0.0, 0.0) };
    k.extend_to(n_max);
    k
}

impl ConvolutionKernel {
    /// Appends coefficients until s⁽ⁿ_max⁾ is available.
    ///
    /// P_n(μ) comes from the upward three-term recurrence; only the last two
    /// values are kept between calls.
    pub fn extend_to(&mut self, n_max: usize) {
        while self.s.len() <= n_max {
            let n = self.s.len();
            // legendre = (P_{n-1}, P_{n-2}) on entry
            let (p1, p2) = self.legendre;
            let pn = match n {
                0 => 1.0,
                1 => self.mu,
                _ => ((2 * n - 1) as f64 * self.mu * p1 - (n - 1) as f64 * p2) / n as f64,
            };
            let mut s = self.alpha * C64::from_polar(1.0, -(n as f64) * self.phi) * (pn - p2)
                / (2.0 * n as f64 - 1.0);
            if n == 0 {
                s += C64::new(1.0, -0.5 * self.r);
            } else if n == 1 {
                s += C64::new(1.0, 0.5 * self.r);
            }
            self.s.push(s);
            self.legendre = (pn, p1);
        }
    }

    #[inline]
    pub fn s(&self, n: usize) -> C64 {
        self.s[n]
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.s
    }

    /// Σ_{ℓ=1}^{n} s⁽ⁿ⁺¹⁻ˡ⁾ h_ℓ with `history[ℓ−1] = h_ℓ`.
    pub fn convolve(&self, history: &[C64]) -> C64 {
        let n = history.len();
        debug_assert!(self.s.len() > n);
        history.iter().enumerate().map(|(l, &h)| self.s[n - l] * h).sum()
    }
}

/// A boundary row: `coeffs[0]·ψ_inner + coeffs[1]·ψ_boundary = rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientRow {
    pub inner: C64,
    pub boundary: C64,
    pub rhs: C64,
}

/// Rows for step n+1 with zero exterior data.
///
/// `history_*` hold boundary values ψ⁽¹⁾..ψ⁽ⁿ⁾, `inner_*` the previous
/// inner neighbor ψ_1⁽ⁿ⁾ (left) and ψ_{J−1}⁽ⁿ⁾ (right).
pub fn homogeneous_dtbc_rows(
    kernel: &ConvolutionKernel,
    history_left: &[C64],
    history_right: &[C64],
    inner_left: C64,
    inner_right: C64,
    n: usize,
) -> Result<(TransientRow, TransientRow), DtbcError> {
    for h in [history_left, history_right] {
        if h.len() != n {
            return Err(DtbcError::HistoryMismatch { expected: n, found: h.len() });
        }
    }
    let s0 = kernel.s(0);
    let row = |hist: &[C64], inner: C64| TransientRow {
        inner: C64::new(1.0, 0.0),
        boundary: -s0,
        rhs: kernel.convolve(hist) - inner,
    };
    Ok((row(history_left, inner_left), row(history_right, inner_right)))
}

/// Unit-modulus phase sequences absorbing lead energies into the boundary data.
#[derive(Debug, Clone)]
pub struct GaugeFactors {
    /// Per-step phase of β.
    beta_phase: f64,
    /// Per-step phase of γ.
    gamma_phase: f64,
    /// Accumulated phases of ε⁽⁰⁾..ε⁽ⁿ⁾.
    epsilon: Vec<f64>,
    half: f64,
}

fn cn_phase(energy: f64, half: f64) -> f64 {
    2.0 * (half * energy).atan()
}

impl GaugeFactors {
    /// `energy` is the total energy E of the stationary state, `v_right0`
    /// the right-lead potential at t = 0.
    pub fn new(units: &UnitSystem, dt: f64, energy: f64, v_right0: f64) -> Self {
        let half = dt / (2.0 * units.hbar());
        Self {
            beta_phase: -cn_phase(energy, half),
            gamma_phase: cn_phase(v_right0, half) - cn_phase(energy, half),
            epsilon: vec![0.0],
            half,
        }
    }

    /// β⁽ⁿ⁾ = exp(−2in·arctan(dt E/(2ħ))).
    pub fn beta(&self, n: usize) -> C64 {
        C64::from_polar(1.0, n as f64 * self.beta_phase)
    }

    /// γ⁽ⁿ⁾ = exp(2in(arctan(dt V_r⁽⁰⁾/(2ħ)) − arctan(dt E/(2ħ)))).
    pub fn gamma(&self, n: usize) -> C64 {
        C64::from_polar(1.0, n as f64 * self.gamma_phase)
    }

    /// Appends ε⁽ⁿ⁺¹⁾ given V_r at t_{n+1/2}.
    pub fn push_right_potential(&mut self, v_half: f64) {
        let last = *self.epsilon.last().expect("epsilon starts at n = 0");
        self.epsilon.push(last + cn_phase(v_half, self.half));
    }

    /// ε⁽ⁿ⁾ = exp(i Σ_{ℓ<n} 2·arctan(dt V_r^{(ℓ+1/2)}/(2ħ))).
    pub fn epsilon(&self, n: usize) -> Result<C64, DtbcError> {
        self.epsilon
            .get(n)
            .map(|&p| C64::from_polar(1.0, p))
            .ok_or(DtbcError::GaugeTooShort { needed: n, found: self.epsilon.len() })
    }

    pub fn epsilon_len(&self) -> usize {
        self.epsilon.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn units() -> UnitSystem {
        UnitSystem::default()
    }

    #[test]
    fn zero_energy() {
        assert_eq!(discrete_k(&units(), 0.0, 0.5), Ok(0.0));
        assert_eq!(continuous_k(&units(), 0.0), Ok(0.0));
        assert_eq!(stationary_alpha(&units(), 0.0, 0.5), C64::new(1.0, 0.0));
    }

    #[test]
    fn discrete_and_continuous_close() {
        let u = units();
        let kc = continuous_k(&u, 25.0).unwrap();
        let kd = discrete_k(&u, 25.0, 0.5).unwrap();
        assert!(((kd - kc) / kc).abs() < 0.01);
        assert!((discrete_energy(&u, kd, 0.5) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn beyond_band() {
        let u = units();
        let lim = discrete_energy_limit(&u, 0.5);
        assert!(matches!(discrete_k(&u, lim * 1.01, 0.5), Err(DtbcError::BeyondBand { .. })));
    }

    #[test]
    fn alpha_solves_free_recursion() {
        let u = units();
        let dx = 0.5;
        let t = u.kinetic_prefactor() / (dx * dx);
        for e in [-40.0, -1.0, 0.3, 25.0, 1000.0, 5000.0, 1e4] {
            let a = stationary_alpha(&u, e, dx);
            let residual = -t * (a - 2.0 + 1.0 / a) - e;
            assert!(residual.norm() < 1e-12 * e.abs().max(1.0), "{e}: {residual}");
            assert!(a.norm() <= 1.0 + 1e-14);
        }
        let a = stationary_alpha(&u, 25.0, dx);
        assert!((a.norm() - 1.0).abs() < 1e-14);
        assert!((a - C64::from_polar(1.0, discrete_k(&u, 25.0, dx).unwrap() * dx)).norm() < 1e-14);
    }

    #[test]
    fn plane_wave_satisfies_rows() {
        let a = stationary_alpha(&units(), 25.0, 0.5);
        let rows = stationary_dtbc_rows(a, a, C64::new(1.0, 0.0));
        let phi = |j: i32| a.powi(j);
        assert!((rows.left[0] * phi(0) + rows.left[1] * phi(1) - rows.left_rhs).norm() < 1e-14);
        let jj = 240;
        assert!((rows.right[0] * phi(jj - 1) + rows.right[1] * phi(jj)).norm() < 1e-12);
    }

    /// Inverse Z-transform of (1 + z⁻¹)/ν(z) on |z| = ρ, ν the decaying root
    /// of ν + 1/ν − 2 = −iR(z − 1)/(z + 1).
    fn z_oracle(r: f64, count: usize) -> Vec<C64> {
        let rho = 1.05;
        let samples = 4096;
        let mut out = vec![C64::default(); count];
        for k in 0..samples {
            let z = C64::from_polar(rho, 2.0 * PI * k as f64 / samples as f64);
            let b = 2.0 + C64::new(0.0, -r) * (z - 1.0) / (z + 1.0);
            let disc = (b * b - 4.0).sqrt();
            let (r1, r2) = ((b + disc) / 2.0, (b - disc) / 2.0);
            let nu = if r1.norm() < 1.0 { r1 } else { r2 };
            let f = (1.0 + 1.0 / z) / nu;
            for (n, o) in out.iter_mut().enumerate() {
                *o += f * z.powi(n as i32) / samples as f64;
            }
        }
        out
    }

    #[test]
    fn kernel_matches_inverse_z_transform() {
        for r in [0.3, 3.7, 46.3] {
            let k = kernel_coefficients(r, 12);
            let oracle = z_oracle(r, 13);
            for n in 0..13 {
                assert!((k.s(n) - oracle[n]).norm() < 1e-9 * (1.0 + oracle[n].norm()), "R={r} n={n}");
            }
        }
    }

    #[test]
    fn first_coefficients() {
        let k = kernel_coefficients(5.0, 2);
        assert!((k.s(0) - (C64::new(1.0, -2.5) - k.alpha)).norm() < 1e-14);
        assert!((k.s(1) - (C64::new(1.0, 2.5) + k.alpha * C64::from_polar(1.0, -k.phi) * k.mu)).norm() < 1e-14);
    }

    #[test]
    fn kernel_decays() {
        let r = kernel_ratio(&units(), 0.5, 1e-4);
        let k = kernel_coefficients(r, 4000);
        // envelope of |s_n| n^{3/2} stays bounded beyond n = 50
        let scaled: Vec<f64> = (50..4000).map(|n| k.s(n).norm() * (n as f64).powf(1.5)).collect();
        let max_early = scaled[..100].iter().cloned().fold(0.0, f64::max);
        let max_late = scaled[3000..].iter().cloned().fold(0.0, f64::max);
        assert!(max_late <= 1.5 * max_early);
    }

    #[test]
    fn zero_history_zero_rhs() {
        let k = kernel_coefficients(10.0, 1);
        let (l, r) = homogeneous_dtbc_rows(&k, &[], &[], C64::default(), C64::default(), 0).unwrap();
        assert_eq!(l.rhs, C64::default());
        assert_eq!(r.rhs, C64::default());
        assert!(homogeneous_dtbc_rows(&k, &[C64::default()], &[], C64::default(), C64::default(), 0).is_err());
    }

    #[test]
    fn gauge_factors_unit_modulus() {
        let u = units();
        let mut g = GaugeFactors::new(&u, 1e-4, 25.0, 10.0);
        for n in 0..200 {
            g.push_right_potential(10.0 + (n as f64).sin());
        }
        for n in 0..200 {
            assert!((g.beta(n).norm() - 1.0).abs() < 1e-14);
            assert!((g.gamma(n).norm() - 1.0).abs() < 1e-14);
            assert!((g.epsilon(n).unwrap().norm() - 1.0).abs() < 1e-14);
        }
        assert!(g.epsilon(500).is_err());
    }

    #[test]
    fn discrete_omega_taylor() {
        let u = units();
        let dt = 1e-4;
        let e = 25.0;
        let w = discrete_omega(&u, e, dt);
        let x = e * dt / (2.0 * u.hbar());
        assert!((w / (e / u.hbar()) - 1.0).abs() <= x * x / 3.0 * 1.0001);
    }
}
