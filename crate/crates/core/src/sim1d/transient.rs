use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{solve_scattering_1d, Injection, Lead, Method1D, Problem1D, SimError};
use crate::dtbc1d::{kernel_coefficients, kernel_ratio, ConvolutionKernel, GaugeFactors};
use crate::field::ComplexField;
use crate::injection::CrossingCoupling;
use crate::linalg::{LuFactorization, SparseComplexMatrix};
use crate::units::UnitSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    CrankNicolson,
    RungeKutta4,
}

/// Largest RK4 step κ·dx² for an N-dimensional problem, κ = 9m*/(8√2·N·ħ).
pub fn rk4_stability_limit(units: &UnitSystem, dx: f64, dims: usize) -> f64 {
    9.0 * units.mass() / (8.0 * std::f64::consts::SQRT_2 * dims as f64 * units.hbar()) * dx * dx
}

/// Counters collected while stepping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransientStats {
    pub steps: usize,
    pub factorizations: usize,
}

/// One open end of a transparent-boundary run.
#[derive(Debug, Clone)]
struct DtbcSide {
    boundary: usize,
    inner: usize,
    gauge: GaugeFactors,
    /// Stationary exterior data at the boundary and inner point.
    phi_b: C64,
    phi_i: C64,
    /// ε⁽ˡ⁾ψ_b⁽ˡ⁾ − γ⁽ˡ⁾φ_b for ℓ = 1..=n.
    history: Vec<C64>,
}

impl DtbcSide {
    /// Right-hand side of the row ψ_i − s⁽⁰⁾ψ_b at step n+1, divided by ε⁽ⁿ⁺¹⁾.
    fn rhs(&self, kernel: &ConvolutionKernel, psi: &[C64], n: usize) -> C64 {
        let eps_n = self.gauge.epsilon(n).expect("gauge advanced");
        let eps_next = self.gauge.epsilon(n + 1).expect("gauge advanced");
        let (g_n, g_next) = (self.gauge.gamma(n), self.gauge.gamma(n + 1));
        let s0 = kernel.s(0);
        let value = kernel.convolve(&self.history) - (eps_n * psi[self.inner] - g_n * self.phi_i)
            + g_next * (self.phi_i - s0 * self.phi_b);
        value / eps_next
    }

    fn record(&mut self, psi: &[C64], n_new: usize) {
        let eps = self.gauge.epsilon(n_new).expect("gauge advanced");
        self.history.push(eps * psi[self.boundary] - self.gauge.gamma(n_new) * self.phi_b);
    }
}

#[derive(Debug, Clone)]
struct DtbcState {
    kernel: ConvolutionKernel,
    sides: [DtbcSide; 2],
}

/// Incoming wave for absorbing-layer runs: a(t)·e^{−iωt}·c(φ).
#[derive(Debug, Clone)]
struct Source {
    injection: Injection,
    coupling_profile: Vec<C64>,
    energy: f64,
}

#[derive(Debug)]
struct CnCache {
    lu: LuFactorization,
    potential: Vec<f64>,
}

/// Time-dependent state ψ⁽ⁿ⁾ with its integrator.
#[derive(Debug)]
pub struct Transient1D {
    problem: Problem1D,
    integrator: Integrator,
    dt: f64,
    step: usize,
    psi: Vec<C64>,
    dtbc: Option<DtbcState>,
    source: Option<Source>,
    cn: Option<CnCache>,
    static_potential: Option<Vec<f64>>,
    stats: TransientStats,
}

impl Transient1D {
    /// Free evolution of `initial` (no incoming wave).
    pub fn new(problem: Problem1D, integrator: Integrator, dt: f64, initial: Vec<C64>) -> Result<Self, SimError> {
        let limit = rk4_stability_limit(&problem.units, problem.grid.dx(), 1);
        if integrator == Integrator::RungeKutta4 && dt > limit {
            return Err(SimError::Unstable { dt, limit });
        }
        Self::new_unchecked(problem, integrator, dt, initial)
    }

    /// Like [`Transient1D::new`] without the explicit-step stability check.
    pub fn new_unchecked(
        problem: Problem1D,
        integrator: Integrator,
        dt: f64,
        initial: Vec<C64>,
    ) -> Result<Self, SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::Invalid(format!("time step must be positive, got {dt}")));
        }
        if integrator == Integrator::RungeKutta4 && problem.method == Method1D::Dtbc {
            return Err(SimError::Invalid("transparent boundary conditions require Crank-Nicolson".into()));
        }
        let field = ComplexField::new(initial);
        field.check_len(problem.grid.len())?;
        field.check_finite()?;
        let static_potential = (!problem.potential.is_time_dependent()).then(|| problem.potential_at(0.0));
        let mut state = Self {
            dtbc: None,
            source: None,
            cn: None,
            static_potential,
            psi: field.values,
            problem,
            integrator,
            dt,
            step: 0,
            stats: TransientStats::default(),
        };
        if state.problem.method == Method1D::Dtbc {
            state.dtbc = Some(state.dtbc_state(None, 0.0));
        }
        Ok(state)
    }

    /// Transient scattering: starts from the stationary state at t = 0 and
    /// keeps injecting the same incoming wave.
    pub fn scattering(problem: Problem1D, integrator: Integrator, dt: f64, injection: Injection) -> Result<Self, SimError> {
        if problem.method == Method1D::Dtbc && injection.lead != Lead::Left {
            return Err(SimError::Invalid("transient injection is supported from the left lead only".into()));
        }
        let stationary = solve_scattering_1d(&problem, &injection, 0.0)?;
        let energy = stationary.energy;
        let k = stationary.k;
        let mut state = Self::new(problem, integrator, dt, stationary.field.values)?;
        match state.problem.method {
            Method1D::Dtbc => {
                let phi = state.psi.clone();
                state.dtbc = Some(state.dtbc_state(Some(&phi), energy));
            }
            Method1D::Pml(_) => {
                let h = state.problem.kinetic().clone();
                let coupling = CrossingCoupling::new(&h, &state.problem.lead_mask(injection.lead));
                let profile = state.problem.incoming_profile(&Injection { amplitude: 1.0, ..injection }, k);
                state.source = Some(Source { injection, coupling_profile: coupling.source(&profile), energy });
            }
            Method1D::Closed(_) => unreachable!("rejected by the stationary solve"),
        }
        Ok(state)
    }

    fn dtbc_state(&self, phi: Option<&[C64]>, energy: f64) -> DtbcState {
        let p = &self.problem;
        let n = p.grid.len();
        let r = kernel_ratio(&p.units, p.grid.dx(), self.dt);
        let side = |boundary: usize, inner: usize, lead: Lead| {
            let v0 = p.lead_potential(lead, 0.0);
            let (phi_b, phi_i) = phi.map_or((C64::default(), C64::default()), |f| (f[boundary], f[inner]));
            DtbcSide {
                boundary,
                inner,
                gauge: GaugeFactors::new(&p.units, self.dt, energy, v0),
                phi_b,
                phi_i,
                history: Vec::new(),
            }
        };
        DtbcState {
            kernel: kernel_coefficients(r, 64),
            sides: [side(0, 1, Lead::Left), side(n - 1, n - 2, Lead::Right)],
        }
    }

    pub fn problem(&self) -> &Problem1D {
        &self.problem
    }

    pub fn psi(&self) -> &[C64] {
        &self.psi
    }

    pub fn field(&self) -> ComplexField {
        ComplexField { values: self.psi.clone(), time_index: self.step }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn stats(&self) -> TransientStats {
        self.stats
    }

    /// dx-weighted ℓ² norm squared over the device.
    pub fn device_norm_sqr(&self) -> f64 {
        self.problem.device_norm_sqr(&self.psi)
    }

    /// ℓ² norm squared over every grid point.
    pub fn total_norm_sqr(&self) -> f64 {
        crate::field::weighted_norm_sqr(&self.psi, self.problem.grid.dx())
    }

    /// Values at the two device edges.
    pub fn boundary_values(&self) -> (C64, C64) {
        let g = &self.problem.grid;
        (self.psi[g.device_lo()], self.psi[g.device_hi()])
    }

    fn potential(&self, t: f64) -> Vec<f64> {
        match &self.static_potential {
            Some(v) => v.clone(),
            None => self.problem.potential_at(t),
        }
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), SimError> {
        for _ in 0..steps {
            match self.integrator {
                Integrator::CrankNicolson => self.cn_step()?,
                Integrator::RungeKutta4 => self.rk4_step(),
            }
        }
        Ok(())
    }

    /// Crank–Nicolson step with V sampled at t_{n+1/2}.
    pub fn cn_step(&mut self) -> Result<(), SimError> {
        let n = self.step;
        let t_half = (n as f64 + 0.5) * self.dt;
        let tau = C64::new(0.0, self.dt / (2.0 * self.problem.units.hbar()));
        let v = self.potential(t_half);
        let h = {
            let d: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
            self.problem.kinetic().add_scaled(C64::new(1.0, 0.0), &SparseComplexMatrix::diagonal(&d))?
        };
        let hpsi = h.matvec(&self.psi);
        let mut rhs: Vec<C64> = self.psi.iter().zip(&hpsi).map(|(p, hp)| p - tau * hp).collect();

        if let Some(src) = &self.source {
            let omega_phase = -2.0 * (self.dt * src.energy / (2.0 * self.problem.units.hbar())).atan();
            let at = |m: usize| {
                let t = m as f64 * self.dt;
                src.injection.amplitude_at(t, self.dt) * C64::from_polar(1.0, m as f64 * omega_phase)
            };
            let w = tau * (at(n + 1) + at(n));
            for (r, c) in rhs.iter_mut().zip(&src.coupling_profile) {
                *r += w * c;
            }
        }

        let mut replaced = Vec::new();
        if let Some(state) = self.dtbc.as_mut() {
            state.kernel.extend_to(n + 1);
            let s0 = state.kernel.s(0);
            for side in state.sides.iter_mut() {
                if side.gauge.epsilon_len() == n + 1 {
                    side.gauge.push_right_potential(v[side.boundary]);
                }
                rhs[side.boundary] = side.rhs(&state.kernel, &self.psi, n);
                replaced.push((side.boundary, vec![(side.inner, C64::new(1.0, 0.0)), (side.boundary, -s0)]));
            }
        }

        let needs_factor = self.cn.as_ref().is_none_or(|c| c.potential != v);
        if needs_factor {
            let mut p = h.affine(C64::new(1.0, 0.0), tau);
            if !replaced.is_empty() {
                p = p.with_rows_replaced(&replaced)?;
            }
            match self.cn.as_mut() {
                Some(c) => {
                    c.lu.refactor(&p)?;
                    c.potential = v;
                }
                None => self.cn = Some(CnCache { lu: LuFactorization::new(&p)?, potential: v }),
            }
            self.stats.factorizations += 1;
        }
        self.cn.as_ref().expect("factorized").lu.solve_in_place(&mut rhs)?;
        self.psi = rhs;
        self.step += 1;
        if let Some(state) = self.dtbc.as_mut() {
            for side in state.sides.iter_mut() {
                side.record(&self.psi, n + 1);
            }
        }
        self.stats.steps += 1;
        Ok(())
    }

    /// du/dt = −(i/ħ)(H(t)u − a(t)e^{−iEt/ħ}c(φ)).
    fn rhs_rk4(&self, t: f64, u: &[C64], out: &mut [C64]) {
        let hbar = self.problem.units.hbar();
        self.problem.kinetic().matvec_into(u, out);
        let v = self.potential(t);
        let scale = C64::new(0.0, -1.0 / hbar);
        for ((o, &ui), &vi) in out.iter_mut().zip(u).zip(&v) {
            *o = scale * (*o + vi * ui);
        }
        if let Some(src) = &self.source {
            let w = -scale
                * src.injection.amplitude_at(t, self.dt)
                * C64::from_polar(1.0, -src.energy * t / hbar);
            for (o, c) in out.iter_mut().zip(&src.coupling_profile) {
                *o += w * c;
            }
        }
    }

    /// Classical fourth-order Runge–Kutta step.
    pub fn rk4_step(&mut self) {
        let n = self.psi.len();
        let t = self.time();
        let dt = self.dt;
        let mut k1 = vec![C64::default(); n];
        let mut k2 = vec![C64::default(); n];
        let mut k3 = vec![C64::default(); n];
        let mut k4 = vec![C64::default(); n];
        let mut tmp = vec![C64::default(); n];
        self.rhs_rk4(t, &self.psi, &mut k1);
        axpy_into(&self.psi, 0.5 * dt, &k1, &mut tmp);
        self.rhs_rk4(t + 0.5 * dt, &tmp, &mut k2);
        axpy_into(&self.psi, 0.5 * dt, &k2, &mut tmp);
        self.rhs_rk4(t + 0.5 * dt, &tmp, &mut k3);
        axpy_into(&self.psi, dt, &k3, &mut tmp);
        self.rhs_rk4(t + dt, &tmp, &mut k4);
        let w = dt / 6.0;
        for i in 0..n {
            self.psi[i] += w * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        self.step += 1;
        self.stats.steps += 1;
    }

    /// Replaces ψ by its complex conjugate (closed boxes only).
    pub fn conjugate(&mut self) -> Result<(), SimError> {
        if !matches!(self.problem.method, Method1D::Closed(_)) {
            return Err(SimError::Invalid("conjugation is only meaningful in a closed box".into()));
        }
        self.psi.iter_mut().for_each(|v| *v = v.conj());
        Ok(())
    }
}

fn axpy_into(x: &[C64], a: f64, y: &[C64], out: &mut [C64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}
