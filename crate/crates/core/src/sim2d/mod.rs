//! Transient 2D evolution on the reduced mesh: Crank–Nicolson with
//! mode-resolved transparent boundaries or absorbing layers, and explicit
//! Runge–Kutta with absorbing layers.

mod aharonov_bohm;

pub use aharonov_bohm::{run_aharonov_bohm, AbProtocol, AbTrajectory, TrajectorySample};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::dtbc1d::{kernel_coefficients, kernel_ratio, ConvolutionKernel, GaugeFactors};
use crate::field::{ComplexField, FieldError};
use crate::injection::CrossingCoupling;
use crate::linalg::{LinalgError, LuFactorization, SparseComplexMatrix};
use crate::sim1d::{rk4_stability_limit, Injection, Integrator, Lead, TransientStats};
use crate::waveguide2d::{solve_scattering_2d, transmission, Method2D, Problem2D, WaveguideError};

#[derive(Debug, Error)]
pub enum Sim2dError {
    #[error(transparent)]
    Waveguide(#[from] WaveguideError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("time step {dt} ps exceeds the RK4 stability limit {limit} ps")]
    Unstable { dt: f64, limit: f64 },
}

/// One lead mode at one contact: gauge, stationary data and history.
#[derive(Debug, Clone)]
struct ModeChannel {
    gauge: GaugeFactors,
    /// Transverse energy E⁽ᵐ⁾, the channel's constant lead potential.
    energy: f64,
    /// Stationary mode coefficients at the boundary and inner column.
    phi_b: C64,
    phi_i: C64,
    /// ε⁽ˡ⁾c_b⁽ˡ⁾ − γ⁽ˡ⁾φ_b for ℓ = 1..=n.
    history: Vec<C64>,
}

#[derive(Debug, Clone)]
struct Contact {
    boundary: Vec<usize>,
    inner: Vec<usize>,
    modes: Vec<Vec<f64>>,
    channels: Vec<ModeChannel>,
}

impl Contact {
    fn coefficient(&self, m: usize, idx: &[usize], psi: &[C64], dx: f64) -> C64 {
        dx * idx.iter().zip(&self.modes[m]).map(|(&r, &c)| psi[r] * c).sum::<C64>()
    }
}

#[derive(Debug, Clone)]
struct DtbcState {
    kernel: ConvolutionKernel,
    contacts: [Contact; 2],
}

#[derive(Debug, Clone)]
struct Source {
    injection: Injection,
    /// Crossing-coupling source of the unit-amplitude incoming wave.
    coupling: Vec<C64>,
    energy: f64,
}

#[derive(Debug)]
struct CnCache {
    lu: LuFactorization,
    potential: Vec<f64>,
    field: f64,
}

/// Time-dependent wavefunction on a 2D device.
#[derive(Debug)]
pub struct Transient2D {
    problem: Problem2D,
    integrator: Integrator,
    dt: f64,
    step: usize,
    psi: Vec<C64>,
    injection: Option<Injection>,
    dtbc: Option<DtbcState>,
    source: Option<Source>,
    cn: Option<CnCache>,
    stats: TransientStats,
}

impl Transient2D {
    /// Free evolution of `initial`.
    pub fn new(problem: Problem2D, integrator: Integrator, dt: f64, initial: Vec<C64>) -> Result<Self, Sim2dError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Sim2dError::Invalid(format!("time step must be positive, got {dt}")));
        }
        if integrator == Integrator::RungeKutta4 {
            if problem.method == Method2D::Dtbc {
                return Err(Sim2dError::Invalid("transparent boundary rows require Crank-Nicolson".into()));
            }
            let limit = rk4_stability_limit(&problem.units, problem.dx(), 2);
            if dt > limit {
                return Err(Sim2dError::Unstable { dt, limit });
            }
        }
        Self::new_unchecked(problem, integrator, dt, initial)
    }

    /// Like [`Transient2D::new`] without the explicit-step stability check.
    pub fn new_unchecked(
        problem: Problem2D,
        integrator: Integrator,
        dt: f64,
        initial: Vec<C64>,
    ) -> Result<Self, Sim2dError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Sim2dError::Invalid(format!("time step must be positive, got {dt}")));
        }
        if integrator == Integrator::RungeKutta4 && problem.method == Method2D::Dtbc {
            return Err(Sim2dError::Invalid("transparent boundary rows require Crank-Nicolson".into()));
        }
        let field = ComplexField::new(initial);
        field.check_len(problem.len())?;
        field.check_finite()?;
        let mut state = Self {
            psi: field.values,
            problem,
            integrator,
            dt,
            step: 0,
            injection: None,
            dtbc: None,
            source: None,
            cn: None,
            stats: TransientStats::default(),
        };
        if state.problem.method == Method2D::Dtbc {
            state.dtbc = Some(state.dtbc_state(None, 0.0));
        }
        Ok(state)
    }

    /// Starts from the stationary scattering state at t = 0 and keeps
    /// injecting the same mode-0 wave.
    pub fn scattering(
        problem: Problem2D,
        integrator: Integrator,
        dt: f64,
        injection: Injection,
    ) -> Result<Self, Sim2dError> {
        if problem.method == Method2D::Dtbc {
            if injection.lead != Lead::Left {
                return Err(Sim2dError::Invalid("transient injection is supported from the left lead only".into()));
            }
            if injection.decay.is_some() {
                return Err(Sim2dError::Invalid("amplitude decay needs absorbing layers".into()));
            }
        }
        let stationary = solve_scattering_2d(&problem, &injection, 0.0)?;
        let (energy, k) = (stationary.energy, stationary.k);
        let mut state = Self::new(problem, integrator, dt, stationary.field.values)?;
        state.injection = Some(injection);
        match state.problem.method {
            Method2D::Dtbc => {
                let phi = state.psi.clone();
                state.dtbc = Some(state.dtbc_state(Some(&phi), energy));
            }
            Method2D::Pml(_) => {
                let p = &state.problem;
                let coupling = CrossingCoupling::new(p.kinetic(), &p.lead_mask(injection.lead))
                    .source(&p.incoming_profile(injection.lead, k, 1.0));
                state.source = Some(Source { injection, coupling, energy });
            }
            Method2D::Closed => unreachable!("rejected by the stationary solve"),
        }
        Ok(state)
    }

    fn dtbc_state(&self, phi: Option<&[C64]>, energy: f64) -> DtbcState {
        let p = &self.problem;
        let dx = p.dx();
        let contact = |lead: Lead| {
            let b = p.boundary_column(lead);
            let i = if lead == Lead::Left { b + 1 } else { b - 1 };
            let basis = p.basis(lead);
            let mut c = Contact {
                boundary: p.column(lead, b),
                inner: p.column(lead, i),
                modes: basis.modes.clone(),
                channels: Vec::with_capacity(basis.len()),
            };
            for m in 0..basis.len() {
                let (phi_b, phi_i) = match phi {
                    Some(f) => (c.coefficient(m, &c.boundary, f, dx), c.coefficient(m, &c.inner, f, dx)),
                    None => (C64::default(), C64::default()),
                };
                let gauge = GaugeFactors::new(&p.units, self.dt, energy, basis.energies[m]);
                c.channels.push(ModeChannel { gauge, energy: basis.energies[m], phi_b, phi_i, history: Vec::new() });
            }
            c
        };
        DtbcState {
            kernel: kernel_coefficients(kernel_ratio(&p.units, dx, self.dt), 64),
            contacts: [contact(Lead::Left), contact(Lead::Right)],
        }
    }

    pub fn problem(&self) -> &Problem2D {
        &self.problem
    }

    pub fn psi(&self) -> &[C64] {
        &self.psi
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

    pub fn device_norm_sqr(&self) -> f64 {
        self.problem.device_norm_sqr(&self.psi)
    }

    /// Current incident amplitude, zero without injection.
    pub fn incident_amplitude(&self) -> f64 {
        self.injection.map_or(0.0, |i| i.amplitude_at(self.time(), self.dt))
    }

    /// Transmission of the current field relative to the original incident
    /// amplitude.
    pub fn transmission(&self) -> Result<f64, Sim2dError> {
        let inj = self.injection.ok_or_else(|| Sim2dError::Invalid("no incoming wave".into()))?;
        Ok(transmission(&self.problem, &self.psi, &inj)?.1)
    }

    /// Largest |history entry| of one mode channel, for diagnostics.
    pub fn history_magnitude(&self, lead: Lead, mode: usize) -> Option<f64> {
        let s = match lead {
            Lead::Left => 0,
            Lead::Right => 1,
        };
        let ch = self.dtbc.as_ref()?.contacts[s].channels.get(mode)?;
        Some(ch.history.iter().map(|h| h.norm()).fold(0.0, f64::max))
    }

    /// Number of stored history values over all channels.
    pub fn history_len(&self) -> usize {
        self.dtbc
            .as_ref()
            .map_or(0, |d| d.contacts.iter().flat_map(|c| &c.channels).map(|ch| ch.history.len()).sum())
    }

    pub fn advance(&mut self, steps: usize) -> Result<(), Sim2dError> {
        for _ in 0..steps {
            self.cn_or_rk4_step()?;
        }
        Ok(())
    }

    /// One step of the configured integrator.
    pub fn cn_or_rk4_step(&mut self) -> Result<(), Sim2dError> {
        match self.integrator {
            Integrator::CrankNicolson => self.cn_step(),
            Integrator::RungeKutta4 => {
                self.rk4_step();
                Ok(())
            }
        }
    }

    /// Crank–Nicolson step with V and B0 sampled at t_{n+1/2}.
    pub fn cn_step(&mut self) -> Result<(), Sim2dError> {
        let n = self.step;
        let t_half = (n as f64 + 0.5) * self.dt;
        let hbar = self.problem.units.hbar();
        let tau = C64::new(0.0, self.dt / (2.0 * hbar));
        let v = self.problem.potential_at(t_half);
        let b = self.problem.field_strength(t_half);
        let h = self.problem.hamiltonian_with(&v, b);
        let hpsi = h.matvec(&self.psi);
        let mut rhs: Vec<C64> = self.psi.iter().zip(&hpsi).map(|(p, hp)| p - tau * hp).collect();

        if let Some(src) = &self.source {
            let phase = -2.0 * (self.dt * src.energy / (2.0 * hbar)).atan();
            let at = |m: usize| {
                src.injection.amplitude_at(m as f64 * self.dt, self.dt) * C64::from_polar(1.0, m as f64 * phase)
            };
            let w = tau * (at(n + 1) + at(n));
            rhs.iter_mut().zip(&src.coupling).for_each(|(r, c)| *r += w * c);
        }

        let dx = self.problem.dx();
        let needs_factor = self.cn.as_ref().is_none_or(|c| c.potential != v || c.field != b);
        let mut replaced = Vec::new();
        if let Some(state) = self.dtbc.as_mut() {
            state.kernel.extend_to(n + 1);
            let kernel = &state.kernel;
            let s0 = kernel.s(0);
            let psi = &self.psi;
            for contact in state.contacts.iter_mut() {
                let values: Vec<(usize, C64)> = contact
                    .channels
                    .par_iter_mut()
                    .enumerate()
                    .map(|(m, ch)| {
                        if ch.gauge.epsilon_len() == n + 1 {
                            ch.gauge.push_right_potential(ch.energy);
                        }
                        let eps_n = ch.gauge.epsilon(n).expect("gauge advanced");
                        let eps_next = ch.gauge.epsilon(n + 1).expect("gauge advanced");
                        let (g_n, g_next) = (ch.gauge.gamma(n), ch.gauge.gamma(n + 1));
                        let c_i = dx
                            * contact.inner.iter().zip(&contact.modes[m]).map(|(&r, &c)| psi[r] * c).sum::<C64>();
                        let value = kernel.convolve(&ch.history) - (eps_n * c_i - g_n * ch.phi_i)
                            + g_next * (ch.phi_i - s0 * ch.phi_b);
                        (contact.boundary[m], value / eps_next)
                    })
                    .collect();
                for (m, (row, value)) in values.into_iter().enumerate() {
                    rhs[row] = value;
                    if needs_factor {
                        let mut entries = Vec::with_capacity(2 * contact.inner.len());
                        for (j, &c) in contact.modes[m].iter().enumerate() {
                            entries.push((contact.inner[j], C64::new(dx * c, 0.0)));
                            entries.push((contact.boundary[j], -s0 * dx * c));
                        }
                        replaced.push((row, entries));
                    }
                }
            }
        }

        if needs_factor {
            let mut p = h.affine(C64::new(1.0, 0.0), tau);
            if !replaced.is_empty() {
                p = p.with_rows_replaced(&replaced)?;
            }
            match self.cn.as_mut() {
                Some(c) => {
                    c.lu.refactor(&p)?;
                    c.potential = v;
                    c.field = b;
                }
                None => self.cn = Some(CnCache { lu: LuFactorization::new(&p)?, potential: v, field: b }),
            }
            self.stats.factorizations += 1;
        }
        self.cn.as_ref().expect("factorized").lu.solve_in_place(&mut rhs)?;
        self.psi = rhs;
        self.step += 1;
        if let Some(state) = self.dtbc.as_mut() {
            let psi = &self.psi;
            for contact in state.contacts.iter_mut() {
                let Contact { boundary, modes, channels, .. } = contact;
                channels.par_iter_mut().enumerate().for_each(|(m, ch)| {
                    let c_b = dx * boundary.iter().zip(&modes[m]).map(|(&r, &c)| psi[r] * c).sum::<C64>();
                    let eps = ch.gauge.epsilon(n + 1).expect("gauge advanced");
                    ch.history.push(eps * c_b - ch.gauge.gamma(n + 1) * ch.phi_b);
                });
            }
        }
        self.stats.steps += 1;
        Ok(())
    }

    /// du/dt = −(i/ħ)(H(t)u − a(t)e^{−iEt/ħ}c).
    fn rk4_rhs(&self, t: f64, v: &[f64], u: &[C64], out: &mut [C64]) {
        let hbar = self.problem.units.hbar();
        self.problem.apply_hamiltonian(v, self.problem.field_strength(t), u, out);
        let scale = C64::new(0.0, -1.0 / hbar);
        out.iter_mut().for_each(|o| *o *= scale);
        if let Some(src) = &self.source {
            let w = -scale * src.injection.amplitude_at(t, self.dt) * C64::from_polar(1.0, -src.energy * t / hbar);
            out.iter_mut().zip(&src.coupling).for_each(|(o, c)| *o += w * c);
        }
    }

    /// Classical fourth-order Runge–Kutta step.
    pub fn rk4_step(&mut self) {
        let n = self.psi.len();
        let t = self.time();
        let dt = self.dt;
        let p = &self.problem;
        let (v0, vh, v1) = (p.potential_at(t), p.potential_at(t + 0.5 * dt), p.potential_at(t + dt));
        let mut k = [vec![C64::default(); n], vec![C64::default(); n], vec![C64::default(); n], vec![
            C64::default();
            n
        ]];
        let mut tmp = vec![C64::default(); n];
        self.rk4_rhs(t, &v0, &self.psi, &mut k[0]);
        axpy_into(&self.psi, 0.5 * dt, &k[0], &mut tmp);
        self.rk4_rhs(t + 0.5 * dt, &vh, &tmp, &mut k[1]);
        axpy_into(&self.psi, 0.5 * dt, &k[1], &mut tmp);
        self.rk4_rhs(t + 0.5 * dt, &vh, &tmp, &mut k[2]);
        axpy_into(&self.psi, dt, &k[2], &mut tmp);
        self.rk4_rhs(t + dt, &v1, &tmp, &mut k[3]);
        let w = dt / 6.0;
        for i in 0..n {
            self.psi[i] += w * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        self.step += 1;
        self.stats.steps += 1;
    }

    /// The CN operators P = I + iτH and Q = I − iτH at time `t`.
    pub fn cn_operators(&self, t: f64) -> (SparseComplexMatrix, SparseComplexMatrix) {
        let tau = C64::new(0.0, self.dt / (2.0 * self.problem.units.hbar()));
        let h = self.problem.hamiltonian(t);
        (h.affine(C64::new(1.0, 0.0), tau), h.affine(C64::new(1.0, 0.0), -tau))
    }
}

fn axpy_into(x: &[C64], a: f64, y: &[C64], out: &mut [C64]) {
    for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}
