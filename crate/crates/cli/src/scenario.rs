//! Scenario files: TOML with unit-suffixed quantities, validated into the
//! solver configuration. Every diagnostic carries the offending line.

use std::fmt;
use std::ops::Range;

use qwave_core::pml::PmlSettings;
use qwave_core::potential::{Potential, RingGuide, WaveComponent, Waveform};
use qwave_core::sim1d::{rk4_stability_limit, Integrator, Lead};
use qwave_core::stencils::{Closure, StencilOrder};
use qwave_core::units::{parse_quantity, Dimension, UnitSystem};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

/// A validation failure, located when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

type Result<T> = std::result::Result<T, ScenarioError>;

/// Maps byte offsets to 1-based line numbers.
struct Lines<'a>(&'a str);

impl Lines<'_> {
    fn at(&self, offset: usize) -> usize {
        self.0[..offset.min(self.0.len())].bytes().filter(|&b| b == b'\n').count() + 1
    }

    fn error(&self, span: Range<usize>, message: impl Into<String>) -> ScenarioError {
        ScenarioError { line: Some(self.at(span.start)), message: message.into() }
    }
}

type Quantity = Spanned<String>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    device: Spanned<RawDevice>,
    #[serde(default)]
    potential: Option<Spanned<RawPotential>>,
    boundary: Spanned<RawBoundary>,
    #[serde(default)]
    injection: Option<Spanned<RawInjection>>,
    #[serde(default)]
    time: Option<Spanned<RawTime>>,
    #[serde(default)]
    magnetic: Option<Spanned<RawMagnetic>>,
    #[serde(default)]
    initial: Option<Spanned<RawInitial>>,
    #[serde(default)]
    modes: Option<Spanned<RawModes>>,
    #[serde(default)]
    eigs: Option<Spanned<RawEigs>>,
    #[serde(default)]
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    dimension: Spanned<u8>,
    length: Quantity,
    #[serde(default)]
    width: Option<Quantity>,
    dx: Quantity,
    #[serde(default)]
    order: Option<Spanned<u8>>,
    #[serde(default)]
    threshold: Option<Quantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: Spanned<String>,
    #[serde(default)]
    start: Option<Quantity>,
    #[serde(default)]
    end: Option<Quantity>,
    #[serde(default)]
    voltage: Option<Quantity>,
    #[serde(default)]
    omega: Option<Quantity>,
    #[serde(default)]
    center: Option<Quantity>,
    #[serde(default)]
    modulation: Vec<Spanned<RawComponent>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComponent {
    kind: Spanned<String>,
    t0: Quantity,
    t1: Quantity,
    #[serde(default)]
    delta: Option<Quantity>,
    #[serde(default)]
    amplitude: Option<Quantity>,
    #[serde(default)]
    frequency: Option<Quantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    method: Spanned<String>,
    #[serde(default)]
    sigma0: Option<f64>,
    #[serde(default)]
    power: Option<i32>,
    #[serde(default)]
    width: Option<Quantity>,
    #[serde(default)]
    end: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInjection {
    #[serde(default)]
    energy: Option<Quantity>,
    #[serde(default)]
    lead: Option<Spanned<String>>,
    #[serde(default)]
    amplitude: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    integrator: Spanned<String>,
    dt: Quantity,
    t_end: Quantity,
    #[serde(default)]
    sample_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMagnetic {
    #[serde(default)]
    field: Option<Quantity>,
    #[serde(default)]
    flux_quanta: Option<f64>,
    r0: Quantity,
    #[serde(default)]
    switch_on: Option<Spanned<Vec<String>>>,
    #[serde(default)]
    switch_off: Option<Spanned<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: Spanned<String>,
    #[serde(default)]
    sigma: Option<Quantity>,
    #[serde(default)]
    center: Option<Quantity>,
    #[serde(default)]
    energy: Option<Quantity>,
    #[serde(default)]
    omega: Option<Quantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModes {
    count: Spanned<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEigs {
    shift: Quantity,
    count: Spanned<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default)]
    snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Closed(Closure),
    Dtbc,
    Pml(PmlSettings),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionSpec {
    pub lead: Lead,
    pub energy: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub integrator: Integrator,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
}

impl TimeSpec {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagneticSpec {
    /// B0(t) in tesla.
    pub field: Waveform,
    pub r0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Three Gaussians at 0, 25 and 75 meV.
    ThreePackets { sigma: f64, center: f64 },
    Gaussian { sigma: f64, center: f64, energy: f64 },
    Coherent { omega: f64, center: f64 },
}

/// A validated scenario in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Hex SHA-256 of the canonicalized scenario text.
    pub hash: String,
    pub dimension: u8,
    pub length: f64,
    pub width: Option<f64>,
    pub dx: f64,
    pub order: StencilOrder,
    pub threshold: f64,
    pub potential: Potential,
    pub boundary: Boundary,
    pub injection: Option<InjectionSpec>,
    pub time: Option<TimeSpec>,
    pub magnetic: Option<MagneticSpec>,
    pub initial: Option<InitialState>,
    pub mode_count: Option<usize>,
    pub eigs: Option<(f64, usize)>,
    pub snapshot_every: Option<usize>,
}

struct Ctx<'a> {
    lines: Lines<'a>,
}

impl Ctx<'_> {
    fn quantity(&self, q: &Quantity, dim: Dimension) -> Result<f64> {
        let v = parse_quantity(q.get_ref(), dim).map_err(|e| self.lines.error(q.span(), e.to_string()))?;
        if !v.is_finite() {
            return Err(self.lines.error(q.span(), "quantity must be finite"));
        }
        Ok(v)
    }

    fn required(&self, q: &Option<Quantity>, dim: Dimension, table: Range<usize>, name: &str) -> Result<f64> {
        match q {
            Some(q) => self.quantity(q, dim),
            None => Err(self.lines.error(table, format!("missing `{name}`"))),
        }
    }

    fn positive(&self, q: &Quantity, dim: Dimension, name: &str) -> Result<f64> {
        let v = self.quantity(q, dim)?;
        if v <= 0.0 {
            return Err(self.lines.error(q.span(), format!("`{name}` must be positive")));
        }
        Ok(v)
    }
}

fn canonical_hash(value: &toml::Value) -> String {
    // toml tables are ordered maps, so re-serialization is canonical.
    let text = toml::to_string(value).unwrap_or_default();
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let lines = Lines(text);
    let located = |e: toml::de::Error| ScenarioError {
        line: e.span().map(|s| lines.at(s.start)),
        message: e.message().to_string(),
    };
    let value: toml::Value = toml::from_str(text).map_err(located)?;
    let raw: RawScenario = toml::from_str(text).map_err(located)?;
    let ctx = Ctx { lines };
    validate(&ctx, raw, canonical_hash(&value))
}

fn closure(ctx: &Ctx, s: &Spanned<String>) -> Result<Closure> {
    match s.get_ref().as_str() {
        "dirichlet" => Ok(Closure::Dirichlet),
        "neumann" => Ok(Closure::Neumann),
        other => Err(ctx.lines.error(s.span(), format!("unknown end condition `{other}` (dirichlet | neumann)"))),
    }
}

fn waveform_components(ctx: &Ctx, raw: &[Spanned<RawComponent>], dim: Dimension) -> Result<Vec<WaveComponent>> {
    raw.iter()
        .map(|c| {
            let span = c.span();
            let c = c.get_ref();
            let t0 = ctx.quantity(&c.t0, Dimension::Time)?;
            let t1 = ctx.quantity(&c.t1, Dimension::Time)?;
            if t1 <= t0 {
                return Err(ctx.lines.error(c.t1.span(), "`t1` must exceed `t0`"));
            }
            match c.kind.get_ref().as_str() {
                "step" => Ok(WaveComponent::Step { t0, t1, delta: ctx.required(&c.delta, dim, span, "delta")? }),
                "burst" => Ok(WaveComponent::Burst {
                    t0,
                    t1,
                    amplitude: ctx.required(&c.amplitude, dim, span.clone(), "amplitude")?,
                    frequency: ctx.required(&c.frequency, Dimension::Rate, span, "frequency")?,
                }),
                other => Err(ctx.lines.error(c.kind.span(), format!("unknown modulation `{other}` (step | burst)"))),
            }
        })
        .collect()
}

fn potential(ctx: &Ctx, raw: Option<Spanned<RawPotential>>, device_width: Option<f64>) -> Result<Potential> {
    let Some(raw) = raw else { return Ok(Potential::Zero) };
    let span = raw.span();
    let p = raw.into_inner();
    let kind = p.kind.get_ref().as_str();
    if !p.modulation.is_empty() && kind != "ramp" {
        return Err(ctx.lines.error(p.modulation[0].span(), "only the ramp potential can be modulated in time"));
    }
    let omega = |ctx: &Ctx| -> Result<f64> {
        match &p.omega {
            Some(q) => ctx.positive(q, Dimension::Rate, "omega"),
            None => Err(ctx.lines.error(span.clone(), "missing `omega`")),
        }
    };
    Ok(match kind {
        "zero" => Potential::Zero,
        "ramp" => {
            let start = ctx.required(&p.start, Dimension::Length, span.clone(), "start")?;
            let end = ctx.required(&p.end, Dimension::Length, span.clone(), "end")?;
            if end <= start {
                return Err(ctx.lines.error(span, "ramp `end` must exceed `start`"));
            }
            let base = ctx.required(&p.voltage, Dimension::Voltage, span, "voltage")?;
            let mut voltage = Waveform::constant(base);
            for c in waveform_components(ctx, &p.modulation, Dimension::Voltage)? {
                voltage = voltage.with(c);
            }
            Potential::Ramp { start, end, voltage }
        }
        "harmonic" => Potential::Harmonic {
            omega: omega(ctx)?,
            center: p.center.as_ref().map_or(Ok(0.0), |q| ctx.quantity(q, Dimension::Length))?,
        },
        "parabolic_guide" => Potential::ParabolicGuide {
            omega: omega(ctx)?,
            center: match &p.center {
                Some(q) => ctx.quantity(q, Dimension::Length)?,
                None => 0.5 * device_width.unwrap_or(0.0),
            },
        },
        "ring" => {
            let mut ring = RingGuide::standard();
            if p.omega.is_some() {
                ring.omega = omega(ctx)?;
            }
            Potential::Ring(ring)
        }
        other => {
            return Err(ctx.lines.error(
                p.kind.span(),
                format!("unknown potential `{other}` (zero | ramp | harmonic | parabolic_guide | ring)"),
            ))
        }
    })
}

fn initial(ctx: &Ctx, raw: Spanned<RawInitial>) -> Result<InitialState> {
    let span = raw.span();
    let r = raw.into_inner();
    let len = |q: &Option<Quantity>, name| ctx.required(q, Dimension::Length, span.clone(), name);
    Ok(match r.kind.get_ref().as_str() {
        "three_packets" => InitialState::ThreePackets { sigma: len(&r.sigma, "sigma")?, center: len(&r.center, "center")? },
        "gaussian" => InitialState::Gaussian {
            sigma: len(&r.sigma, "sigma")?,
            center: len(&r.center, "center")?,
            energy: ctx.required(&r.energy, Dimension::Energy, span.clone(), "energy")?,
        },
        "coherent" => InitialState::Coherent {
            omega: ctx.required(&r.omega, Dimension::Rate, span.clone(), "omega")?,
            center: len(&r.center, "center")?,
        },
        other => {
            return Err(ctx.lines.error(
                r.kind.span(),
                format!("unknown initial state `{other}` (three_packets | gaussian | coherent)"),
            ))
        }
    })
}

fn interval(ctx: &Ctx, s: &Spanned<Vec<String>>) -> Result<(f64, f64)> {
    let v = s.get_ref();
    if v.len() != 2 {
        return Err(ctx.lines.error(s.span(), "expected [start, end]"));
    }
    let parse = |t: &str| parse_quantity(t, Dimension::Time).map_err(|e| ctx.lines.error(s.span(), e.to_string()));
    let (a, b) = (parse(&v[0])?, parse(&v[1])?);
    if b <= a {
        return Err(ctx.lines.error(s.span(), "interval end must exceed its start"));
    }
    Ok((a, b))
}

fn magnetic(ctx: &Ctx, raw: Spanned<RawMagnetic>, units: &UnitSystem) -> Result<MagneticSpec> {
    let span = raw.span();
    let m = raw.into_inner();
    let r0 = ctx.positive(&m.r0, Dimension::Length, "r0")?;
    let tesla = match (&m.field, m.flux_quanta) {
        (Some(q), None) => ctx.quantity(q, Dimension::MagneticField)?,
        (None, Some(n)) => n * units.flux_quantum() / (std::f64::consts::PI * r0 * r0),
        _ => return Err(ctx.lines.error(span, "give exactly one of `field` and `flux_quanta`")),
    };
    let field = match &m.switch_on {
        None => {
            if let Some(off) = &m.switch_off {
                return Err(ctx.lines.error(off.span(), "`switch_off` needs `switch_on`"));
            }
            Waveform::constant(tesla)
        }
        Some(on) => {
            let (t0, t1) = interval(ctx, on)?;
            let w = Waveform::default().with(WaveComponent::Step { t0, t1, delta: tesla });
            match &m.switch_off {
                Some(off) => {
                    let (s0, s1) = interval(ctx, off)?;
                    if s0 < t1 {
                        return Err(ctx.lines.error(off.span(), "switch-off must start after switch-on ends"));
                    }
                    w.with(WaveComponent::Step { t0: s0, t1: s1, delta: -tesla })
                }
                None => w,
            }
        }
    };
    Ok(MagneticSpec { field, r0 })
}

fn validate(ctx: &Ctx, raw: RawScenario, hash: String) -> Result<Scenario> {
    let units = UnitSystem::default();
    let device_span = raw.device.span();
    let dev = raw.device.into_inner();
    let dimension = *dev.dimension.get_ref();
    if !(1..=2).contains(&dimension) {
        return Err(ctx.lines.error(dev.dimension.span(), "dimension must be 1 or 2"));
    }
    let length = ctx.positive(&dev.length, Dimension::Length, "length")?;
    let dx = ctx.positive(&dev.dx, Dimension::Length, "dx")?;
    let width = match (&dev.width, dimension) {
        (Some(q), 2) => Some(ctx.positive(q, Dimension::Length, "width")?),
        (None, 2) => return Err(ctx.lines.error(device_span, "two-dimensional devices need `width`")),
        (Some(q), _) => return Err(ctx.lines.error(q.span(), "`width` only applies to two-dimensional devices")),
        (None, _) => None,
    };
    let order = match &dev.order {
        None => StencilOrder::Second,
        Some(o) => StencilOrder::try_from(*o.get_ref())
            .map_err(|_| ctx.lines.error(o.span(), "order must be 2, 4 or 6"))?,
    };
    let threshold = match &dev.threshold {
        Some(q) => ctx.positive(q, Dimension::Energy, "threshold")?,
        None if dimension == 2 => 750.0,
        None => f64::INFINITY,
    };

    let potential = potential(ctx, raw.potential, width)?;

    let b = raw.boundary.get_ref();
    let boundary = match b.method.get_ref().as_str() {
        "dtbc" => {
            if order != StencilOrder::Second {
                let at = dev.order.as_ref().map_or(b.method.span(), |o| o.span());
                return Err(ctx.lines.error(at, "transparent boundary conditions require order 2"));
            }
            Boundary::Dtbc
        }
        "pml" => {
            let mut s = PmlSettings::default();
            if let Some(v) = b.sigma0 {
                s.sigma0 = v;
            }
            if let Some(p) = b.power {
                s.power = p;
            }
            if let Some(q) = &b.width {
                s.layer_width = ctx.positive(q, Dimension::Length, "width")?;
            }
            if let Some(e) = &b.end {
                s.end = closure(ctx, e)?;
            }
            if !(s.sigma0 >= 0.0) || s.power < 0 {
                return Err(ctx.lines.error(raw.boundary.span(), "sigma0 and power must be non-negative"));
            }
            Boundary::Pml(s)
        }
        "closed" => Boundary::Closed(match &b.end {
            Some(e) => closure(ctx, e)?,
            None => Closure::Dirichlet,
        }),
        other => {
            return Err(ctx.lines.error(b.method.span(), format!("unknown boundary method `{other}` (dtbc | pml | closed)")))
        }
    };

    let injection = match raw.injection {
        None => None,
        Some(inj) => {
            let span = inj.span();
            let i = inj.into_inner();
            let energy = match &i.energy {
                Some(q) => ctx.positive(q, Dimension::Energy, "energy")?,
                None => return Err(ctx.lines.error(span, "missing `energy` (kinetic energy of the incoming wave)")),
            };
            let lead = match i.lead.as_ref().map(|l| (l.get_ref().as_str(), l.span())) {
                None | Some(("left", _)) => Lead::Left,
                Some(("right", _)) => Lead::Right,
                Some((other, s)) => return Err(ctx.lines.error(s, format!("unknown lead `{other}` (left | right)"))),
            };
            Some(InjectionSpec { lead, energy, amplitude: i.amplitude.unwrap_or(1.0) })
        }
    };

    let time = match raw.time {
        None => None,
        Some(t) => {
            let span = t.span();
            let t = t.into_inner();
            let integrator = match t.integrator.get_ref().as_str() {
                "cn" | "crank_nicolson" => Integrator::CrankNicolson,
                "rk4" | "runge_kutta4" => Integrator::RungeKutta4,
                other => return Err(ctx.lines.error(t.integrator.span(), format!("unknown integrator `{other}` (cn | rk4)"))),
            };
            let dt = ctx.positive(&t.dt, Dimension::Time, "dt")?;
            let t_end = ctx.positive(&t.t_end, Dimension::Time, "t_end")?;
            if integrator == Integrator::RungeKutta4 {
                if boundary == Boundary::Dtbc {
                    return Err(ctx.lines.error(t.integrator.span(), "transparent boundary conditions require cn"));
                }
                let limit = rk4_stability_limit(&units, dx, dimension as usize);
                if dt > limit {
                    return Err(ctx.lines.error(
                        t.dt.span(),
                        format!("dt = {dt} ps exceeds the RK4 stability limit {limit:.6} ps"),
                    ));
                }
            }
            let sample_every = t.sample_every.unwrap_or(100);
            if sample_every == 0 {
                return Err(ctx.lines.error(span, "`sample_every` must be positive"));
            }
            Some(TimeSpec { integrator, dt, t_end, sample_every })
        }
    };

    let magnetic = match raw.magnetic {
        None => None,
        Some(m) if dimension == 1 => return Err(ctx.lines.error(m.span(), "magnetic fields need a two-dimensional device")),
        Some(m) => Some(magnetic(ctx, m, &units)?),
    };
    let initial = raw.initial.map(|i| initial(ctx, i)).transpose()?;
    let mode_count = match raw.modes {
        None => None,
        Some(m) => {
            let c = m.get_ref().count.clone();
            if *c.get_ref() == 0 {
                return Err(ctx.lines.error(c.span(), "at least one mode must be requested"));
            }
            Some(*c.get_ref())
        }
    };
    let eigs = match raw.eigs {
        None => None,
        Some(e) => {
            let e = e.into_inner();
            if *e.count.get_ref() == 0 {
                return Err(ctx.lines.error(e.count.span(), "at least one eigenpair must be requested"));
            }
            Some((ctx.quantity(&e.shift, Dimension::Energy)?, *e.count.get_ref()))
        }
    };
    Ok(Scenario {
        hash,
        dimension,
        length,
        width,
        dx,
        order,
        threshold,
        potential,
        boundary,
        injection,
        time,
        magnetic,
        initial,
        mode_count,
        eigs,
        snapshot_every: raw.output.and_then(|o| o.snapshot_every),
    })
}
