use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Sim2dError, Transient2D};
use crate::potential::{Potential, RingGuide, WaveComponent, Waveform};
use crate::sim1d::{AmplitudeDecay, Injection, Integrator, TransientStats};
use crate::stencils::StencilOrder;
use crate::units::UnitSystem;
use crate::waveguide2d::{DeviceSpec, MagneticField, Method2D, Problem2D};

/// Switching run on the standard ring: stationary start at B0 = 0, flux
/// switched on and (optionally) off again with smoothsteps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbProtocol {
    pub dx: f64,
    pub dt: f64,
    pub integrator: Integrator,
    pub order: StencilOrder,
    pub method: Method2D,
    pub e_kin: f64,
    pub t_end: f64,
    /// Enclosed flux after switch-on, in flux quanta.
    pub flux_quanta: f64,
    pub r0: f64,
    pub switch_on: (f64, f64),
    pub switch_off: Option<(f64, f64)>,
    pub decay: Option<AmplitudeDecay>,
    /// Mesh elimination threshold in meV.
    pub threshold: f64,
    /// Steps between trajectory samples.
    pub sample_every: usize,
    /// Steps between full-grid snapshots.
    pub snapshot_every: Option<usize>,
}

impl Default for AbProtocol {
    fn default() -> Self {
        Self {
            dx: 1.0,
            dt: 5e-4,
            integrator: Integrator::CrankNicolson,
            order: StencilOrder::Second,
            method: Method2D::Dtbc,
            e_kin: 21.5,
            t_end: 8.0,
            flux_quanta: 1.0,
            r0: 10.0,
            switch_on: (2.0, 2.25),
            switch_off: Some((6.0, 6.25)),
            decay: None,
            threshold: 750.0,
            sample_every: 20,
            snapshot_every: None,
        }
    }
}

impl AbProtocol {
    /// B0(t) in tesla.
    pub fn field_waveform(&self, units: &UnitSystem) -> Waveform {
        let b = self.flux_quanta * units.flux_quantum() / (std::f64::consts::PI * self.r0 * self.r0);
        let on = WaveComponent::Step { t0: self.switch_on.0, t1: self.switch_on.1, delta: b };
        let w = Waveform::default().with(on);
        match self.switch_off {
            Some((t0, t1)) => w.with(WaveComponent::Step { t0, t1, delta: -b }),
            None => w,
        }
    }

    pub fn problem(&self, units: &UnitSystem) -> Result<Problem2D, Sim2dError> {
        let ring = RingGuide::standard();
        let (length, width) = (2.0 * ring.center.0, 2.0 * ring.center.1);
        let mut field = MagneticField::centered(0.0, self.r0, length, width);
        field.b0 = self.field_waveform(units);
        let mut spec = DeviceSpec::new(length, width, self.dx, Potential::Ring(ring), self.order, self.method);
        spec.magnetic = Some(field);
        spec.threshold = self.threshold;
        Ok(Problem2D::new(*units, spec)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub transmission: f64,
    pub device_norm: f64,
    /// Enclosed flux in flux quanta.
    pub flux: f64,
}

#[derive(Debug, Clone)]
pub struct AbTrajectory {
    pub samples: Vec<TrajectorySample>,
    /// (t, values on the full mesh with eliminated points zero).
    pub snapshots: Vec<(f64, Vec<C64>)>,
    pub stats: TransientStats,
    pub unknowns: usize,
}

impl AbTrajectory {
    /// max − min of the device norm over samples with t in [t0, t1],
    /// relative to its mean.
    pub fn norm_variation(&self, t0: f64, t1: f64) -> f64 {
        let v: Vec<f64> =
            self.samples.iter().filter(|s| s.t >= t0 && s.t <= t1).map(|s| s.device_norm).collect();
        if v.is_empty() {
            return 0.0;
        }
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (hi - lo) / mean
    }

    /// Largest deviation of the device norm from its least-squares line
    /// over [t0, t1], relative to the mean. Slow monotone relaxation does
    /// not count as oscillation.
    pub fn norm_oscillation(&self, t0: f64, t1: f64) -> f64 {
        let pts: Vec<(f64, f64)> =
            self.samples.iter().filter(|s| s.t >= t0 && s.t <= t1).map(|s| (s.t, s.device_norm)).collect();
        if pts.len() < 3 {
            return 0.0;
        }
        let n = pts.len() as f64;
        let (mt, mv) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, v)| (a + t / n, b + v / n));
        let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), &(t, v)| (a + (t - mt) * (v - mv), b + (t - mt).powi(2)));
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        pts.iter().map(|&(t, v)| (v - mv - slope * (t - mt)).abs()).fold(0.0, f64::max) / mv
    }

    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> Option<&TrajectorySample> {
        self.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}

/// Runs the protocol and records T(t), the device norm and snapshots.
pub fn run_aharonov_bohm(units: &UnitSystem, protocol: &AbProtocol) -> Result<AbTrajectory, Sim2dError> {
    let problem = protocol.problem(units)?;
    let unknowns = problem.len();
    let injection = Injection { decay: protocol.decay, ..Injection::left(protocol.e_kin) };
    let mut run = Transient2D::scattering(problem, protocol.integrator, protocol.dt, injection)?;
    let steps = (protocol.t_end / protocol.dt).round() as usize;
    let every = protocol.sample_every.max(1);
    let mut samples = Vec::with_capacity(steps / every + 1);
    let mut snapshots = Vec::new();
    let field = run.problem().magnetic.clone().expect("protocol adds a field");
    for n in 0..=steps {
        if n % every == 0 {
            let t = run.time();
            samples.push(TrajectorySample {
                t,
                transmission: run.transmission()?,
                device_norm: run.device_norm_sqr(),
                flux: field.flux_in_quanta(units, t),
            });
        }
        if protocol.snapshot_every.is_some_and(|s| s > 0 && n % s == 0) {
            snapshots.push((run.time(), run.problem().grid.expand(run.psi())));
        }
        if n < steps {
            run.cn_or_rk4_step()?;
        }
    }
    Ok(AbTrajectory { samples, snapshots, stats: run.stats(), unknowns })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trajectory(norms: impl Fn(f64) -> f64) -> AbTrajectory {
        let samples = (0..=100)
            .map(|k| {
                let t = k as f64 * 0.1;
                TrajectorySample { t, transmission: 0.0, device_norm: norms(t), flux: 0.0 }
            })
            .collect();
        AbTrajectory { samples, snapshots: Vec::new(), stats: TransientStats::default(), unknowns: 0 }
    }

    #[test]
    fn linear_drift_is_not_oscillation() {
        let tr = trajectory(|t| 10.0 + 0.5 * t);
        assert!(tr.norm_oscillation(0.0, 10.0) < 1e-12);
        assert!((tr.norm_variation(0.0, 10.0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ripple_is_measured_relative_to_mean() {
        let tr = trajectory(|t| 10.0 + 0.1 * (3.0 * t).sin());
        let o = tr.norm_oscillation(0.0, 10.0);
        assert!((o - 0.01).abs() < 2e-3, "{o}");
        assert_eq!(tr.at(4.96).unwrap().t, 5.0);
    }

    #[test]
    fn default_field_switches_one_quantum() {
        let u = UnitSystem::default();
        let p = AbProtocol::default();
        let w = p.field_waveform(&u);
        let b = w.value(4.0);
        assert!((b * std::f64::consts::PI * p.r0 * p.r0 / u.flux_quantum() - 1.0).abs() < 1e-12);
        assert_eq!(w.value(1.0), 0.0);
        assert!(w.value(7.0).abs() < 1e-15);
    }
}
