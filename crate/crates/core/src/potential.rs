//! Potential energy landscapes and their time modulation.

use serde::{Deserialize, Serialize};

use crate::units::UnitSystem;

/// One additive piece of a time-dependent amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaveComponent {
    Constant { value: f64 },
    /// Cubic smoothstep from 0 to `delta` over [t0, t1].
    Step { t0: f64, t1: f64, delta: f64 },
    /// sin²-windowed sinusoid active on [t0, t1]; `frequency` in 1/ps.
    Burst { t0: f64, t1: f64, amplitude: f64, frequency: f64 },
}

fn smoothstep(t: f64, t0: f64, t1: f64) -> f64 {
    if t <= t0 {
        0.0
    } else if t >= t1 {
        1.0
    } else {
        let u = (t - t0) / (t1 - t0);
        u * u * (3.0 - 2.0 * u)
    }
}

impl WaveComponent {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Step { t0, t1, delta } => delta * smoothstep(t, t0, t1),
            Self::Burst { t0, t1, amplitude, frequency } => {
                if t <= t0 || t >= t1 {
                    0.0
                } else {
                    let u = (t - t0) / (t1 - t0);
                    let window = (std::f64::consts::PI * u).sin().powi(2);
                    amplitude * window * (2.0 * std::f64::consts::PI * frequency * (t - t0)).sin()
                }
            }
        }
    }

    fn varies(&self) -> bool {
        !matches!(self, Self::Constant { .. })
    }
}

/// Sum of components; continuous in time by construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Waveform {
    pub components: Vec<WaveComponent>,
}

impl Waveform {
    pub fn constant(value: f64) -> Self {
        Self { components: vec![WaveComponent::Constant { value }] }
    }

    pub fn with(mut self, c: WaveComponent) -> Self {
        self.components.push(c);
        self
    }

    pub fn value(&self, t: f64) -> f64 {
        self.components.iter().map(|c| c.value(t)).sum()
    }

    pub fn is_constant(&self) -> bool {
        !self.components.iter().any(WaveComponent::varies)
    }

    /// Switch on at [on0, on1] and back off at [off0, off1].
    pub fn pulse(amplitude: f64, on: (f64, f64), off: (f64, f64)) -> Self {
        Self::default()
            .with(WaveComponent::Step { t0: on.0, t1: on.1, delta: amplitude })
            .with(WaveComponent::Step { t0: off.0, t1: off.1, delta: -amplitude })
    }
}

/// Elliptical ring joined to two straight leads along x2 = center.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingGuide {
    /// Confinement frequency in 1/ps.
    pub omega: f64,
    pub center: (f64, f64),
    /// Semi-axes of the ring centerline along x1 and x2.
    pub semi_axes: (f64, f64),
    /// Width of the smooth-minimum blend at the junctions.
    pub blend: f64,
    /// Upper clip of the potential.
    pub clip: f64,
}

impl RingGuide {
    /// Device of 300 nm × 90 nm with the ring centered at (150, 45) nm.
    pub fn standard() -> Self {
        Self { omega: 50.0, center: (150.0, 45.0), semi_axes: (60.0, 22.5), blend: 10.0, clip: 1000.0 }
    }

    /// Distance from (x1, x2) to the blended centerline.
    pub fn centerline_distance(&self, x1: f64, x2: f64) -> f64 {
        let (cx, cy) = self.center;
        let (a, b) = self.semi_axes;
        let dy = (x2 - cy).abs();
        let left_end = cx - a;
        let right_end = cx + a;
        let d_left = if x1 <= left_end { dy } else { (x1 - left_end).hypot(dy) };
        let d_right = if x1 >= right_end { dy } else { (right_end - x1).hypot(dy) };
        let d_ring = ellipse_distance(x1 - cx, x2 - cy, a, b);
        smooth_min(smooth_min(d_left, d_right, self.blend), d_ring, self.blend)
    }

    pub fn value(&self, mass: f64, x1: f64, x2: f64) -> f64 {
        let d = self.centerline_distance(x1, x2);
        (0.5 * mass * self.omega * self.omega * d * d).min(self.clip)
    }
}

/// Polynomial smooth minimum acting only where |a − b| < k.
fn smooth_min(a: f64, b: f64, k: f64) -> f64 {
    if k <= 0.0 {
        return a.min(b);
    }
    let h = (k - (a - b).abs()).max(0.0) / k;
    a.min(b) - 0.25 * h * h * k
}

/// Euclidean distance from (x, y) to the ellipse (a cos θ, b sin θ).
pub fn ellipse_distance(x: f64, y: f64, a: f64, b: f64) -> f64 {
    let (x, y) = (x.abs(), y.abs());
    let f = |t: f64| (a * t.cos() - x).powi(2) + (b * t.sin() - y).powi(2);
    let samples = 48;
    let h = std::f64::consts::FRAC_PI_2 / samples as f64;
    let mut best = 0.0;
    let mut best_f = f(0.0);
    for i in 1..=samples {
        let t = i as f64 * h;
        let v = f(t);
        if v < best_f {
            best_f = v;
            best = t;
        }
    }
    // Golden-section refinement inside the bracketing cells.
    let (mut lo, mut hi) = ((best - h).max(0.0), (best + h).min(std::f64::consts::FRAC_PI_2));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    f(0.5 * (lo + hi)).min(best_f).sqrt()
}

/// Potential energy landscapes in meV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Zero,
    /// Zero for x < start, linear to −e·U at `end`, constant beyond.
    /// `voltage` gives U(t) in mV.
    Ramp { start: f64, end: f64, voltage: Waveform },
    /// (m*/2)ω²(x − center)² along x (1D).
    Harmonic { omega: f64, center: f64 },
    /// (m*/2)ω²(x2 − center)², independent of x1.
    ParabolicGuide { omega: f64, center: f64 },
    Ring(RingGuide),
    /// Linear interpolation of samples at x0 + j·dx, constant beyond the ends.
    Tabulated { x0: f64, dx: f64, values: Vec<f64> },
}

impl Potential {
    pub fn ramp(start: f64, end: f64, voltage_mv: f64) -> Self {
        Self::Ramp { start, end, voltage: Waveform::constant(voltage_mv) }
    }

    /// Value on a 1D grid point at time `t`.
    pub fn value_1d(&self, units: &UnitSystem, x: f64, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Ramp { start, end, voltage } => {
                let top = units.voltage_energy(voltage.value(t));
                if x <= *start {
                    0.0
                } else if x >= *end {
                    top
                } else {
                    top * (x - start) / (end - start)
                }
            }
            Self::Harmonic { omega, center } | Self::ParabolicGuide { omega, center } => {
                0.5 * units.mass() * omega * omega * (x - center).powi(2)
            }
            Self::Ring(r) => r.value(units.mass(), x, r.center.1),
            Self::Tabulated { x0, dx, values } => {
                let s = ((x - x0) / dx).clamp(0.0, (values.len() - 1) as f64);
                let j = (s.floor() as usize).min(values.len().saturating_sub(2));
                let w = s - j as f64;
                if values.len() == 1 {
                    values[0]
                } else {
                    (1.0 - w) * values[j] + w * values[j + 1]
                }
            }
        }
    }

    /// Value on a 2D point at time `t`.
    pub fn value_2d(&self, units: &UnitSystem, x1: f64, x2: f64, t: f64) -> f64 {
        match self {
            Self::ParabolicGuide { omega, center } => 0.5 * units.mass() * omega * omega * (x2 - center).powi(2),
            Self::Ring(r) => r.value(units.mass(), x1, x2),
            other => other.value_1d(units, x1, t),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Self::Ramp { voltage, .. } if !voltage.is_constant())
    }
}
