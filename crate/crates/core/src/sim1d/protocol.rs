//! Driven transient-scattering runs: a scattering state at t = 0 evolved
//! under a time-dependent bias, with observables sampled along the way.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Injection, Integrator, Method1D, Problem1D, SimError, Transient1D, TransientStats};
use crate::potential::{Potential, WaveComponent, Waveform};
use crate::stencils::StencilOrder;
use crate::units::UnitSystem;

/// Biased device driven by a voltage waveform, fed from the left lead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientScenario1D {
    pub length: f64,
    pub dx: f64,
    pub order: StencilOrder,
    pub method: Method1D,
    pub integrator: Integrator,
    pub dt: f64,
    pub t_end: f64,
    /// Linear ramp between these positions carries the bias.
    pub ramp: (f64, f64),
    /// U(t) in mV.
    pub voltage: Waveform,
    pub e_kin: f64,
    pub sample_every: usize,
    pub snapshot_every: Option<usize>,
}

impl TransientScenario1D {
    /// 120 nm device, ramp over [40, 80] nm, CN with dt = 0.1 fs.
    pub fn standard(method: Method1D, e_kin: f64, voltage: Waveform, t_end: f64) -> Self {
        Self {
            length: 120.0,
            dx: 0.5,
            order: StencilOrder::Second,
            method,
            integrator: Integrator::CrankNicolson,
            dt: 1e-4,
            t_end,
            ramp: (40.0, 80.0),
            voltage,
            e_kin,
            sample_every: 100,
            snapshot_every: None,
        }
    }

    pub fn potential(&self) -> Potential {
        Potential::Ramp { start: self.ramp.0, end: self.ramp.1, voltage: self.voltage.clone() }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Hold at −100 mV, then a slow large swing plus a fast small ripple on
/// [0.5, `release`] ps while the bias relaxes to zero; zero afterwards.
pub fn oscillating_bias(release: f64) -> Waveform {
    let span = release - 0.5;
    Waveform::constant(-100.0)
        .with(WaveComponent::Step { t0: 0.5, t1: release, delta: 100.0 })
        .with(WaveComponent::Burst { t0: 0.5, t1: release, amplitude: 60.0, frequency: 4.8 / span })
        .with(WaveComponent::Burst { t0: 0.5, t1: release, amplitude: 15.0, frequency: 48.0 / span })
}

/// Slow swing of half its magnitude around the critical bias −E_kin/e.
pub fn critical_bias(e_kin: f64, release: f64) -> Waveform {
    let span = release - 0.5;
    Waveform::constant(-e_kin).with(WaveComponent::Burst {
        t0: 0.5,
        t1: release,
        amplitude: 0.5 * e_kin,
        frequency: 3.0 / span,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableSample {
    pub t: f64,
    pub voltage: f64,
    pub device_norm: f64,
    pub left: C64,
    pub right: C64,
}

/// Device field at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot1D {
    pub t: f64,
    pub x: Vec<f64>,
    pub values: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory1D {
    pub samples: Vec<ObservableSample>,
    pub snapshots: Vec<Snapshot1D>,
    pub stats: TransientStats,
    /// Device field at `t_end`.
    pub last: Vec<C64>,
}

fn snapshot(state: &Transient1D) -> Snapshot1D {
    let g = &state.problem().grid;
    Snapshot1D {
        t: state.time(),
        x: g.device().map(|j| g.x(j)).collect(),
        values: state.psi()[g.device()].to_vec(),
    }
}

/// Initializes with the stationary state at U(0) and steps to `t_end`.
pub fn run_transient_scattering_1d(
    units: &UnitSystem,
    scenario: &TransientScenario1D,
) -> Result<Trajectory1D, SimError> {
    run_with_observer(units, scenario, |_| {})
}

/// As [`run_transient_scattering_1d`], calling `observe` after every sample.
pub fn run_with_observer(
    units: &UnitSystem,
    scenario: &TransientScenario1D,
    mut observe: impl FnMut(&Transient1D),
) -> Result<Trajectory1D, SimError> {
    if scenario.sample_every == 0 || scenario.snapshot_every == Some(0) {
        return Err(SimError::Invalid("sampling cadence must be positive".into()));
    }
    let problem = Problem1D::new(
        *units,
        scenario.length,
        scenario.dx,
        scenario.potential(),
        scenario.order,
        scenario.method,
    )?;
    let mut state = Transient1D::scattering(problem, scenario.integrator, scenario.dt, Injection::left(scenario.e_kin))?;
    let mut samples = Vec::new();
    let mut snapshots = Vec::new();
    let record = |state: &Transient1D, samples: &mut Vec<ObservableSample>| {
        let (left, right) = state.boundary_values();
        samples.push(ObservableSample {
            t: state.time(),
            voltage: scenario.voltage.value(state.time()),
            device_norm: state.device_norm_sqr(),
            left,
            right,
        });
    };
    record(&state, &mut samples);
    observe(&state);
    if scenario.snapshot_every.is_some() {
        snapshots.push(snapshot(&state));
    }
    for n in 1..=scenario.steps() {
        state.advance(1)?;
        if n % scenario.sample_every == 0 {
            record(&state, &mut samples);
            observe(&state);
        }
        if scenario.snapshot_every.is_some_and(|k| n % k == 0) {
            snapshots.push(snapshot(&state));
        }
    }
    let last = state.psi()[state.problem().grid.device()].to_vec();
    Ok(Trajectory1D { samples, snapshots, stats: state.stats(), last })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pml::PmlSettings;

    #[test]
    fn constant_bias_keeps_observables_fixed() {
        let u = UnitSystem::default();
        for method in [Method1D::Dtbc, Method1D::Pml(PmlSettings::default())] {
            let mut s = TransientScenario1D::standard(method, 25.0, Waveform::constant(-10.0), 0.5);
            s.sample_every = 500;
            s.snapshot_every = Some(2500);
            let first = std::cell::RefCell::new(None::<Vec<f64>>);
            let mut drift = 0.0f64;
            let tr = run_with_observer(&u, &s, |st| {
                let dens: Vec<f64> = st.psi()[st.problem().grid.device()].iter().map(|v| v.norm_sqr()).collect();
                let mut f = first.borrow_mut();
                match f.as_ref() {
                    None => *f = Some(dens),
                    Some(d0) => {
                        drift = d0.iter().zip(&dens).map(|(a, b)| (a - b).abs()).fold(drift, f64::max);
                    }
                }
            })
            .unwrap();
            assert!(drift < 1e-9, "{method:?}: {drift}");
            assert_eq!(tr.samples.len(), 11);
            assert_eq!(tr.snapshots.len(), 3);
            assert_eq!(tr.stats.factorizations, 1);
        }
    }

    #[test]
    fn waveforms_start_and_end_where_expected() {
        let w = oscillating_bias(3.0);
        assert_eq!(w.value(0.0), -100.0);
        assert_eq!(w.value(0.5), -100.0);
        assert_eq!(w.value(3.0), 0.0);
        assert!(w.value(1.7) != -100.0);
        let c = critical_bias(2.5, 3.0);
        assert_eq!(c.value(0.2), -2.5);
        assert_eq!(c.value(4.0), -2.5);
    }

    #[test]
    fn zero_cadence_rejected() {
        let mut s = TransientScenario1D::standard(Method1D::Dtbc, 25.0, Waveform::constant(0.0), 0.01);
        s.sample_every = 0;
        assert!(matches!(run_transient_scattering_1d(&UnitSystem::default(), &s), Err(SimError::Invalid(_))));
    }
}
