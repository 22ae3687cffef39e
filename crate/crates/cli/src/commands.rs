//! Subcommand implementations on top of a validated [`Scenario`].

use std::path::PathBuf;
use std::time::Instant;

use qwave_core::analytic::{relative_error, Reference};
use qwave_core::linalg::shift_invert_eigs;
use qwave_core::sim1d::{
    solve_scattering_1d, Injection, Method1D, Problem1D, ScatteringSolution1D, SimError, Transient1D, TransientStats,
};
use qwave_core::sim2d::{Sim2dError, Transient2D};
use qwave_core::units::UnitSystem;
use qwave_core::waveguide2d::{
    bound_states, flux_sweep, solve_scattering_2d, transmission, DeviceSpec, MagneticField, Method2D, Problem2D,
    WaveguideError,
};
use qwave_core::C64;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::output::{num, OutputDir};
use crate::scenario::{Boundary, InitialState, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Invalid(_) | SimError::Unstable { .. } => Self::Validation(e.to_string()),
            other => Self::Numerical(other.to_string()),
        }
    }
}

impl From<WaveguideError> for CliError {
    fn from(e: WaveguideError) -> Self {
        match e {
            WaveguideError::Invalid(_) | WaveguideError::MultiMode { .. } | WaveguideError::EmptyLead => {
                Self::Validation(e.to_string())
            }
            other => Self::Numerical(other.to_string()),
        }
    }
}

impl From<Sim2dError> for CliError {
    fn from(e: Sim2dError) -> Self {
        match e {
            Sim2dError::Waveguide(w) => w.into(),
            Sim2dError::Invalid(_) | Sim2dError::Unstable { .. } => Self::Validation(e.to_string()),
            other => Self::Numerical(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Validation(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Energy,
    Flux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl std::str::FromStr for Sweep {
    type Err = String;

    /// `param:lo:hi:n:log|lin`, energies in meV, fluxes in flux quanta.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [param, lo, hi, n, scale] = parts[..] else {
            return Err(format!("expected param:lo:hi:n:log|lin, got `{s}`"));
        };
        let param = match param {
            "energy" => SweepParam::Energy,
            "flux" => SweepParam::Flux,
            other => return Err(format!("unknown sweep parameter `{other}` (energy | flux)")),
        };
        let number = |t: &str| t.parse::<f64>().map_err(|_| format!("cannot parse `{t}` as a number"));
        let (lo, hi) = (number(lo)?, number(hi)?);
        let n: usize = n.parse().map_err(|_| format!("cannot parse `{n}` as a point count"))?;
        if n == 0 || !(hi >= lo) {
            return Err("sweep needs n ≥ 1 and hi ≥ lo".into());
        }
        let at = |u: f64| match scale {
            "lin" => Ok(lo + (hi - lo) * u),
            "log" if lo > 0.0 => Ok((lo.ln() + (hi.ln() - lo.ln()) * u).exp()),
            "log" => Err("log sweeps need lo > 0".to_string()),
            other => Err(format!("unknown sweep scale `{other}` (log | lin)")),
        };
        let values = (0..n).map(|k| at(if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 })).collect::<std::result::Result<_, _>>()?;
        Ok(Self { param, values })
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub sweep: Option<Sweep>,
    pub snapshot_every: Option<usize>,
    pub binary: bool,
}

fn method_1d(b: Boundary) -> Method1D {
    match b {
        Boundary::Closed(c) => Method1D::Closed(c),
        Boundary::Dtbc => Method1D::Dtbc,
        Boundary::Pml(s) => Method1D::Pml(s),
    }
}

fn problem_1d(s: &Scenario) -> Result<Problem1D> {
    Ok(Problem1D::new(UnitSystem::default(), s.length, s.dx, s.potential.clone(), s.order, method_1d(s.boundary))?)
}

fn problem_2d(s: &Scenario) -> Result<Problem2D> {
    let width = s.width.expect("validated two-dimensional scenario");
    let method = match s.boundary {
        Boundary::Closed(_) => Method2D::Closed,
        Boundary::Dtbc => Method2D::Dtbc,
        Boundary::Pml(p) => Method2D::Pml(p),
    };
    let mut spec = DeviceSpec::new(s.length, width, s.dx, s.potential.clone(), s.order, method);
    spec.threshold = s.threshold;
    spec.magnetic = s.magnetic.as_ref().map(|m| {
        let mut f = MagneticField::centered(0.0, m.r0, s.length, width);
        f.b0 = m.field.clone();
        f
    });
    Ok(Problem2D::new(UnitSystem::default(), spec)?)
}

fn injection(s: &Scenario) -> Result<Injection> {
    match s.injection {
        Some(i) => Ok(Injection { lead: i.lead, energy: i.energy, amplitude: i.amplitude, decay: None }),
        None => invalid("this command needs an [injection] table with `energy`"),
    }
}

fn stats_json(stats: TransientStats, history: usize) -> serde_json::Value {
    json!({ "steps": stats.steps, "factorizations": stats.factorizations, "history_length": history })
}

fn complex_cols(v: C64) -> [String; 2] {
    [num(v.re), num(v.im)]
}

fn short_hash(s: &Scenario) -> &str {
    &s.hash[..8]
}

/// Relative distance of the device field to the unit incoming plane wave,
/// for force-free devices.
fn plane_wave_error(problem: &Problem1D, sol: &ScatteringSolution1D) -> Option<f64> {
    if problem.potential != qwave_core::potential::Potential::Zero || matches!(problem.method, Method1D::Closed(_)) {
        return None;
    }
    let g = &problem.grid;
    let x0 = g.x(g.device_lo());
    let reference: Vec<C64> = g.device().map(|j| C64::from_polar(1.0, sol.k * (g.x(j) - x0))).collect();
    relative_error(&sol.field.values[g.device()], &reference).ok()
}

pub fn scatter(s: &Scenario, opts: &RunOptions) -> Result<Vec<String>> {
    let inj = injection(s)?;
    let mut out = OutputDir::create(&opts.out)?;
    let unknowns;
    if s.dimension == 1 {
        let problem = problem_1d(s)?;
        unknowns = problem.grid.len();
        match &opts.sweep {
            Some(sweep) => {
                if sweep.param != SweepParam::Energy {
                    return invalid("one-dimensional devices can only sweep `energy`");
                }
                let clock = Instant::now();
                let rows = sweep
                    .values
                    .par_iter()
                    .map(|&e| {
                        let sol = solve_scattering_1d(&problem, &Injection { energy: e, ..inj }, 0.0)?;
                        let pwe = plane_wave_error(&problem, &sol).map_or(String::new(), num);
                        Ok(vec![num(e), num(sol.k), num(sol.reflection), num(sol.transmission), pwe])
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.time("sweep", clock.elapsed().as_secs_f64());
                out.csv("sweep.csv", &["energy_mev", "k_per_nm", "reflection", "transmission", "plane_wave_error"], rows)?;
            }
            None => {
                let clock = Instant::now();
                let sol = solve_scattering_1d(&problem, &inj, 0.0)?;
                out.time("solve", clock.elapsed().as_secs_f64());
                let g = &problem.grid;
                let rows = g.device().map(|j| {
                    let v = sol.field.values[j];
                    vec![num(g.x(j)), num(v.re), num(v.im), num(v.norm_sqr())]
                });
                out.csv("field.csv", &["x_nm", "re", "im", "density"], rows)?;
                if opts.binary {
                    let v = &sol.field.values[g.device()];
                    out.binary("field.bin", v.len(), 1, v)?;
                }
                let [rr, ri] = complex_cols(sol.reflected);
                let [tr, ti] = complex_cols(sol.transmitted);
                let pwe = plane_wave_error(&problem, &sol).map_or(String::new(), num);
                out.csv(
                    "summary.csv",
                    &["energy_mev", "k_per_nm", "reflection", "transmission", "r_re", "r_im", "t_re", "t_im", "plane_wave_error"],
                    [vec![num(sol.energy), num(sol.k), num(sol.reflection), num(sol.transmission), rr, ri, tr, ti, pwe]],
                )?;
            }
        }
    } else {
        let problem = problem_2d(s)?;
        unknowns = problem.len();
        match &opts.sweep {
            Some(Sweep { param: SweepParam::Flux, values }) => {
                if problem.magnetic.is_none() {
                    return invalid("flux sweeps need a [magnetic] table");
                }
                let clock = Instant::now();
                let points = flux_sweep(&problem, inj.energy, values)?;
                out.time("sweep", clock.elapsed().as_secs_f64());
                out.csv("sweep.csv", &["flux_quanta", "transmission"], points.iter().map(|&(q, t)| vec![num(q), num(t)]))?;
            }
            Some(Sweep { param: SweepParam::Energy, values }) => {
                let clock = Instant::now();
                let rows = values
                    .par_iter()
                    .map(|&e| {
                        let i = Injection { energy: e, ..inj };
                        let sol = solve_scattering_2d(&problem, &i, 0.0)?;
                        let (_, t) = transmission(&problem, &sol.field.values, &i)?;
                        Ok(vec![num(e), num(sol.k), num(t)])
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.time("sweep", clock.elapsed().as_secs_f64());
                out.csv("sweep.csv", &["energy_mev", "k_per_nm", "transmission"], rows)?;
            }
            None => {
                let clock = Instant::now();
                let sol = solve_scattering_2d(&problem, &inj, 0.0)?;
                out.time("solve", clock.elapsed().as_secs_f64());
                let (amp, t) = transmission(&problem, &sol.field.values, &inj)?;
                write_device_field_2d(&mut out, &problem, &sol.field.values, "field", opts.binary)?;
                let [ar, ai] = complex_cols(amp);
                out.csv(
                    "summary.csv",
                    &["energy_mev", "k_per_nm", "transmission", "t_re", "t_im", "unknowns"],
                    [vec![num(sol.energy), num(sol.k), num(t), ar, ai, problem.len().to_string()]],
                )?;
            }
        }
    }
    Ok(out.finish("scatter", &s.hash, json!({ "unknowns": unknowns }))?)
}

fn write_device_field_2d(out: &mut OutputDir, p: &Problem2D, u: &[C64], stem: &str, binary: bool) -> Result<()> {
    let values = p.device_values(u);
    let n2 = p.grid.n2();
    let ax = p.grid.axis1();
    if binary {
        out.binary(&format!("{stem}.bin"), values.len() / n2, n2, &values)?;
    } else {
        let rows = values.iter().enumerate().map(|(i, v)| {
            let (j1, j2) = (ax.device_lo() + i / n2, i % n2);
            vec![num(p.grid.x1(j1)), num(p.grid.x2(j2)), num(v.re), num(v.im), num(v.norm_sqr())]
        });
        out.csv(&format!("{stem}.csv"), &["x1_nm", "x2_nm", "re", "im", "density"], rows)?;
    }
    Ok(())
}

fn initial_values_1d(units: &UnitSystem, problem: &Problem1D, init: InitialState) -> Result<Vec<C64>> {
    let k = |e: f64| (2.0 * units.mass() * e).sqrt() / units.hbar();
    let reference = match init {
        InitialState::ThreePackets { sigma, center } => Reference::three_packets(units, sigma, center),
        InitialState::Gaussian { sigma, center, energy } => Reference::GaussianPacket { sigma, x0: center, k: k(energy) },
        InitialState::Coherent { omega, center } => Reference::CoherentState { omega, x0: center },
    };
    (0..problem.grid.len())
        .map(|j| reference.eval_1d(units, problem.grid.x(j), 0.0).map_err(|e| CliError::Validation(e.to_string())))
        .collect()
}

pub fn evolve(s: &Scenario, opts: &RunOptions) -> Result<Vec<String>> {
    let Some(time) = s.time else { return invalid("evolve needs a [time] table") };
    if opts.sweep.is_some() {
        return invalid("--sweep applies to scatter only");
    }
    let snap = opts.snapshot_every.or(s.snapshot_every);
    if snap == Some(0) {
        return invalid("--snapshot-every must be positive");
    }
    let steps = time.steps();
    let mut out = OutputDir::create(&opts.out)?;
    let tag = short_hash(s).to_string();
    let snap_due = |n: usize| snap.is_some_and(|k| n % k == 0);
    let mut rows = Vec::with_capacity(steps / time.sample_every + 1);
    let units = UnitSystem::default();
    let stats;
    if s.dimension == 1 {
        let problem = problem_1d(s)?;
        let mut run = match (s.initial, s.injection) {
            (Some(init), _) => {
                let psi = initial_values_1d(&units, &problem, init)?;
                Transient1D::new(problem, time.integrator, time.dt, psi)?
            }
            (None, Some(_)) => Transient1D::scattering(problem, time.integrator, time.dt, injection(s)?)?,
            (None, None) => return invalid("evolve needs an [initial] state or an [injection]"),
        };
        let clock = Instant::now();
        for n in 0..=steps {
            if n % time.sample_every == 0 {
                let (l, r) = run.boundary_values();
                let [lr, li] = complex_cols(l);
                let [rr, ri] = complex_cols(r);
                rows.push(vec![n.to_string(), num(run.time()), num(run.device_norm_sqr()), lr, li, rr, ri]);
                out.time(format!("step {n}"), clock.elapsed().as_secs_f64());
            }
            if snap_due(n) {
                let g = &run.problem().grid;
                let v = &run.psi()[g.device()];
                let name = format!("snap_{tag}_{n:08}");
                if opts.binary {
                    out.binary(&format!("{name}.bin"), v.len(), 1, v)?;
                } else {
                    let rows = g.device().map(|j| {
                        let v = run.psi()[j];
                        vec![num(g.x(j)), num(v.re), num(v.im)]
                    });
                    out.csv(&format!("{name}.csv"), &["x_nm", "re", "im"], rows)?;
                }
            }
            if n < steps {
                run.advance(1)?;
            }
        }
        run.field().check_finite().map_err(|e| CliError::Numerical(e.to_string()))?;
        stats = stats_json(run.stats(), run.step_index());
        out.csv("trajectory.csv", &["step", "t_ps", "device_norm", "left_re", "left_im", "right_re", "right_im"], rows)?;
    } else {
        if s.initial.is_some() {
            return invalid("two-dimensional runs start from the stationary scattering state; drop [initial]");
        }
        let problem = problem_2d(s)?;
        let field = problem.magnetic.clone();
        let mut run = Transient2D::scattering(problem, time.integrator, time.dt, injection(s)?)?;
        let clock = Instant::now();
        for n in 0..=steps {
            if n % time.sample_every == 0 {
                let t = run.time();
                let flux = field.as_ref().map_or(0.0, |f| f.flux_in_quanta(&units, t));
                rows.push(vec![n.to_string(), num(t), num(run.device_norm_sqr()), num(run.transmission()?), num(flux)]);
                out.time(format!("step {n}"), clock.elapsed().as_secs_f64());
            }
            if snap_due(n) {
                write_device_field_2d(&mut out, run.problem(), run.psi(), &format!("snap_{tag}_{n:08}"), opts.binary)?;
            }
            if n < steps {
                run.cn_or_rk4_step()?;
            }
        }
        if run.psi().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(CliError::Numerical("field became non-finite".into()));
        }
        stats = stats_json(run.stats(), run.history_len());
        out.csv("trajectory.csv", &["step", "t_ps", "device_norm", "transmission", "flux_quanta"], rows)?;
    }
    Ok(out.finish("evolve", &s.hash, stats)?)
}

pub fn modes(s: &Scenario, opts: &RunOptions) -> Result<Vec<String>> {
    if s.dimension != 2 {
        return invalid("transverse modes need a two-dimensional device");
    }
    let Some(count) = s.mode_count else { return invalid("modes needs a [modes] table with `count`") };
    let mut out = OutputDir::create(&opts.out)?;
    let clock = Instant::now();
    let problem = problem_2d(s)?;
    out.time("assemble", clock.elapsed().as_secs_f64());
    let mut table = Vec::new();
    let mut vectors = Vec::new();
    for (name, lead) in [("left", qwave_core::sim1d::Lead::Left), ("right", qwave_core::sim1d::Lead::Right)] {
        let basis = problem.basis(lead);
        if count > basis.len() {
            return invalid(format!("{count} modes requested but the {name} lead supports {}", basis.len()));
        }
        let range = problem.lead_range(lead);
        for m in 0..count {
            table.push(vec![name.to_string(), m.to_string(), num(basis.energies[m])]);
            for (i, &v) in basis.modes[m].iter().enumerate() {
                vectors.push(vec![name.to_string(), m.to_string(), num(problem.grid.x2(range.j2_lo + i)), num(v)]);
            }
        }
    }
    out.csv("modes.csv", &["lead", "mode", "energy_mev"], table)?;
    out.csv("mode_vectors.csv", &["lead", "mode", "x2_nm", "value"], vectors)?;
    Ok(out.finish("modes", &s.hash, json!({ "unknowns": problem.len() }))?)
}

pub fn eigs(s: &Scenario, opts: &RunOptions) -> Result<Vec<String>> {
    let Some((shift, count)) = s.eigs else { return invalid("eigs needs an [eigs] table with `shift` and `count`") };
    if !matches!(s.boundary, Boundary::Closed(_)) {
        return invalid("bound states need `method = \"closed\"`");
    }
    let mut out = OutputDir::create(&opts.out)?;
    let clock = Instant::now();
    let (pairs, coords): (_, Vec<Vec<String>>) = if s.dimension == 1 {
        let p = problem_1d(s)?;
        let pairs = shift_invert_eigs(&p.hamiltonian(0.0), shift, count)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        (pairs, (0..p.grid.len()).map(|j| vec![num(p.grid.x(j))]).collect())
    } else {
        let p = problem_2d(s)?;
        let pairs = bound_states(&p, shift, count)?;
        let coords = p
            .grid
            .retained()
            .iter()
            .map(|&f| {
                let (j1, j2) = p.grid.split(f);
                vec![num(p.grid.x1(j1)), num(p.grid.x2(j2))]
            })
            .collect();
        (pairs, coords)
    };
    out.time("eigs", clock.elapsed().as_secs_f64());
    out.csv("eigs.csv", &["index", "energy_mev"], pairs.values.iter().enumerate().map(|(i, &e)| vec![i.to_string(), num(e)]))?;
    let header: &[&str] = if s.dimension == 1 { &["index", "x_nm", "re", "im"] } else { &["index", "x1_nm", "x2_nm", "re", "im"] };
    let rows = pairs.vectors.iter().enumerate().flat_map(|(i, vec)| {
        vec.iter().zip(&coords).map(move |(v, c)| {
            let mut row = vec![i.to_string()];
            row.extend(c.iter().cloned());
            row.extend(complex_cols(*v));
            row
        })
    });
    out.csv("eigenvectors.csv", header, rows)?;
    Ok(out.finish("eigs", &s.hash, json!({ "unknowns": coords.len() }))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grids() {
        let s: Sweep = "energy:1e-3:1e3:7:log".parse().unwrap();
        assert_eq!(s.param, SweepParam::Energy);
        assert_eq!(s.values.len(), 7);
        assert!((s.values[0] - 1e-3).abs() < 1e-15 && (s.values[6] - 1e3).abs() < 1e-9);
        assert!((s.values[3] - 1.0).abs() < 1e-12);
        let f: Sweep = "flux:0:4:17:lin".parse().unwrap();
        assert_eq!(f.values[4], 1.0);
        assert!("energy:0:1:3:log".parse::<Sweep>().is_err());
        assert!("energy:1:2:0:lin".parse::<Sweep>().is_err());
        assert!("mass:1:2:3:lin".parse::<Sweep>().is_err());
        assert!("energy:1:2:3".parse::<Sweep>().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
        assert_eq!(CliError::Io(std::io::Error::other("x")).exit_code(), 4);
        assert_eq!(CliError::from(SimError::Unstable { dt: 1.0, limit: 0.5 }).exit_code(), 2);
    }
}
