//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment. Keys are dotted paths from a
//! fixed schema; anything else is rejected with its line number.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use qlbe_core::kinetics::KernelVariant;
use qlbe_core::physics::{GasSpec, ParticleSpec, PotentialSpec, UnitSystem};
use qlbe_core::quadrature::QuadratureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Dsf,
    Fdt,
    Xsec,
    Kinetic,
    Brownian,
    Friction,
    Covariance,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Dsf,
        Scenario::Fdt,
        Scenario::Xsec,
        Scenario::Kinetic,
        Scenario::Brownian,
        Scenario::Friction,
        Scenario::Covariance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Dsf => "dsf",
            Scenario::Fdt => "fdt",
            Scenario::Xsec => "xsec",
            Scenario::Kinetic => "kinetic",
            Scenario::Brownian => "brownian",
            Scenario::Friction => "friction",
            Scenario::Covariance => "covariance",
        }
    }

    fn needs_particle(self) -> bool {
        !matches!(self, Scenario::Dsf | Scenario::Fdt)
    }

    fn needs_seed(self) -> bool {
        matches!(self, Scenario::Kinetic | Scenario::Covariance)
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|x| x.name()).collect();
                format!("unknown scenario `{s}` (expected one of {})", names.join(", "))
            })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: Some(key.to_string()),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Float,
    Int,
    Text,
    FloatList,
    IntList,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Float => "a number",
            Kind::Int => "a non-negative integer",
            Kind::Text => "a word",
            Kind::FloatList => "a comma-separated list of numbers",
            Kind::IntList => "a comma-separated list of integers",
        }
    }
}

const SCHEMA: &[(&str, Kind)] = &[
    ("run.scenario", Kind::Text),
    ("run.seed", Kind::Int),
    ("units.hbar", Kind::Float),
    ("gas.mass", Kind::Float),
    ("gas.beta", Kind::Float),
    ("gas.density", Kind::Float),
    ("particle.mass", Kind::Float),
    ("potential.kind", Kind::Text),
    ("potential.g", Kind::Float),
    ("potential.r", Kind::Float),
    ("potential.q", Kind::FloatList),
    ("potential.t", Kind::FloatList),
    ("quad.abs_tol", Kind::Float),
    ("quad.rel_tol", Kind::Float),
    ("quad.max_intervals", Kind::Int),
    ("dsf.q_min", Kind::Float),
    ("dsf.q_max", Kind::Float),
    ("dsf.q_count", Kind::Int),
    ("dsf.e_min", Kind::Float),
    ("dsf.e_max", Kind::Float),
    ("dsf.e_count", Kind::Int),
    ("fdt.q", Kind::FloatList),
    ("fdt.t", Kind::FloatList),
    ("xsec.p", Kind::FloatList),
    ("xsec.variant", Kind::Text),
    ("kernel.variant", Kind::Text),
    ("mc.n_traj", Kind::Int),
    ("mc.horizon", Kind::Float),
    ("mc.initial", Kind::Text),
    ("mc.p0", Kind::FloatList),
    ("mc.snapshots", Kind::Int),
    ("mc.bins", Kind::Int),
    ("band.dp", Kind::Float),
    ("band.count", Kind::Int),
    ("band.offsets", Kind::IntList),
    ("band.center", Kind::Float),
    ("band.width", Kind::Float),
    ("band.dt", Kind::Float),
    ("band.steps", Kind::Int),
    ("band.snapshots", Kind::Int),
    ("band.shift", Kind::Float),
    ("brownian.eta", Kind::Float),
    ("brownian.dt", Kind::Float),
    ("brownian.steps", Kind::Int),
    ("brownian.monitor_every", Kind::Int),
    ("brownian.matrix_every", Kind::Int),
    ("grid.dx", Kind::Float),
    ("grid.count", Kind::Int),
    ("state.mean_x", Kind::Float),
    ("state.mean_p", Kind::Float),
    ("state.var_x", Kind::Float),
    ("state.var_p", Kind::Float),
    ("state.cov_xp", Kind::Float),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Float(f64),
    Int(u64),
    Text(String),
    FloatList(Vec<f64>),
    IntList(Vec<i64>),
}

fn parse_value(kind: Kind, raw: &str) -> Option<Value> {
    let list = |raw: &str| -> Vec<String> { raw.split(',').map(|s| s.trim().to_string()).collect() };
    match kind {
        Kind::Float => raw.parse().ok().filter(|v: &f64| v.is_finite()).map(Value::Float),
        Kind::Int => raw.parse().ok().map(Value::Int),
        Kind::Text => {
            let ok = !raw.is_empty() && raw.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            ok.then(|| Value::Text(raw.to_string()))
        }
        Kind::FloatList => list(raw)
            .iter()
            .map(|s| s.parse().ok().filter(|v: &f64| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .map(Value::FloatList),
        Kind::IntList => list(raw)
            .iter()
            .map(|s| s.parse().ok())
            .collect::<Option<Vec<i64>>>()
            .map(Value::IntList),
    }
}

/// Parsed `key = value` entries with the line each came from.
#[derive(Debug, Clone, Default)]
struct Entries {
    map: BTreeMap<&'static str, (Value, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line),
                    key: None,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(&(name, kind)) = SCHEMA.iter().find(|(k, _)| *k == key) else {
                return Err(err(Some(line), key, "unknown key"));
            };
            if let Some((_, first)) = map.get(name) {
                return Err(err(
                    Some(line),
                    key,
                    format!("duplicate key (first set on line {first})"),
                ));
            }
            let parsed = parse_value(kind, value).ok_or_else(|| {
                err(
                    Some(line),
                    key,
                    format!("type mismatch: expected {}, got `{value}`", kind.describe()),
                )
            })?;
            map.insert(name, (parsed, line));
        }
        Ok(Self { map })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|(_, l)| *l)
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.map.get(key).map(|(v, _)| v)
    }

    fn float(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    fn int(&self, key: &str) -> Option<u64> {
        match self.get(key)? {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.int(key) {
            Some(v) => usize::try_from(v).map_err(|_| err(self.line(key), key, "value too large")),
            None => Ok(default),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        match self.get(key)? {
            Value::Text(v) => Some(v),
            _ => None,
        }
    }

    fn floats(&self, key: &str) -> Option<&[f64]> {
        match self.get(key)? {
            Value::FloatList(v) => Some(v),
            _ => None,
        }
    }

    fn ints(&self, key: &str) -> Option<&[i64]> {
        match self.get(key)? {
            Value::IntList(v) => Some(v),
            _ => None,
        }
    }

    fn require_float(&self, key: &str, scenario: Scenario) -> Result<f64, ConfigError> {
        self.float(key).ok_or_else(|| missing(key, scenario))
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.float(key).unwrap_or(default);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(err(self.line(key), key, format!("must be positive, got {v}")))
        }
    }

    fn core<T>(&self, key: &str, r: qlbe_core::Result<T>) -> Result<T, ConfigError> {
        r.map_err(|e| err(self.line(key), key, e.to_string()))
    }
}

fn missing(key: &str, scenario: Scenario) -> ConfigError {
    err(
        None,
        key,
        format!("missing required key for scenario `{scenario}`"),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsfSettings {
    pub q_min: f64,
    pub q_max: f64,
    pub q_count: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub e_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdtSettings {
    /// Paired (q, t) evaluation points.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XsecSettings {
    pub momenta: Vec<f64>,
    pub variant: KernelVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum McInitial {
    Maxwell,
    Fixed([f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSettings {
    pub n_traj: usize,
    /// Absolute horizon; `None` means five mean free times.
    pub horizon: Option<f64>,
    pub initial: McInitial,
    pub snapshots: usize,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSettings {
    pub dp: f64,
    pub count: usize,
    pub offsets: Vec<i64>,
    pub center: f64,
    pub width: f64,
    /// `None` picks a tenth of the stability limit.
    pub dt: Option<f64>,
    pub steps: usize,
    pub snapshots: usize,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianSettings {
    /// `None` derives η from the collision physics.
    pub eta: Option<f64>,
    /// `None` uses the thermal position spread ħ/(2√(M/β)).
    pub dx: Option<f64>,
    pub count: usize,
    /// `None` uses the largest step the stability check allows, halved.
    pub dt: Option<f64>,
    pub steps: usize,
    pub monitor_every: usize,
    pub matrix_every: usize,
    pub state: [Option<f64>; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub units: UnitSystem,
    pub gas: GasSpec,
    pub particle: Option<ParticleSpec>,
    pub potential: Option<PotentialSpec>,
    pub quad: QuadratureSpec,
    pub kernel_variant: KernelVariant,
    pub dsf: DsfSettings,
    pub fdt: FdtSettings,
    pub xsec: XsecSettings,
    pub mc: McSettings,
    pub band: BandSettings,
    pub brownian: BrownianSettings,
}

fn variant(e: &Entries, key: &str) -> Result<KernelVariant, ConfigError> {
    match e.text(key).unwrap_or("exact") {
        "exact" => Ok(KernelVariant::Exact),
        "brownian_limit" | "limit" => Ok(KernelVariant::BrownianLimit),
        other => Err(err(
            e.line(key),
            key,
            format!("expected `exact` or `brownian_limit`, got `{other}`"),
        )),
    }
}

fn potential(e: &Entries, scenario: Scenario) -> Result<PotentialSpec, ConfigError> {
    match e.text("potential.kind").unwrap_or("gaussian") {
        "gaussian" => {
            let g = e.require_float("potential.g", scenario)?;
            let r = e.require_float("potential.r", scenario)?;
            e.core("potential.g", PotentialSpec::gaussian(g, r))
        }
        "tabulated" => {
            let q = e.floats("potential.q").ok_or_else(|| missing("potential.q", scenario))?;
            let t = e.floats("potential.t").ok_or_else(|| missing("potential.t", scenario))?;
            e.core("potential.t", PotentialSpec::tabulated(q.to_vec(), t.to_vec()))
        }
        other => Err(err(
            e.line("potential.kind"),
            "potential.kind",
            format!("expected `gaussian` or `tabulated`, got `{other}`"),
        )),
    }
}

/// Parses a configuration whose scenario is given by `run.scenario`.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_for(text, None)
}

/// Parses a configuration for `scenario`; a `run.scenario` entry, if
/// present, must agree with it.
pub fn parse_config_for(text: &str, scenario: Option<Scenario>) -> Result<RunConfig, ConfigError> {
    let e = Entries::parse(text)?;
    let named = match e.text("run.scenario") {
        Some(s) => Some(
            s.parse::<Scenario>()
                .map_err(|m| err(e.line("run.scenario"), "run.scenario", m))?,
        ),
        None => None,
    };
    let scenario = match (scenario, named) {
        (Some(a), Some(b)) if a != b => {
            return Err(err(
                e.line("run.scenario"),
                "run.scenario",
                format!("config is for `{b}` but `{a}` was requested"),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(err(None, "run.scenario", "missing required key")),
    };

    let units = e.core("units.hbar", UnitSystem::new(e.float("units.hbar").unwrap_or(1.0)))?;
    let gas_mass = e.require_float("gas.mass", scenario)?;
    let beta = e.require_float("gas.beta", scenario)?;
    let eta_given = e.float("brownian.eta").is_some();
    let density = if scenario.needs_particle() && !(scenario == Scenario::Brownian && eta_given) {
        e.require_float("gas.density", scenario)?
    } else {
        e.float("gas.density").unwrap_or(1.0)
    };
    let gas = e.core("gas.mass", GasSpec::new(gas_mass, beta, density))?;

    let particle = if scenario.needs_particle() {
        let m = e.require_float("particle.mass", scenario)?;
        Some(e.core("particle.mass", ParticleSpec::new(m))?)
    } else {
        None
    };
    let potential = if matches!(scenario, Scenario::Dsf | Scenario::Fdt)
        || (scenario == Scenario::Brownian && eta_given && e.get("potential.g").is_none())
    {
        None
    } else {
        Some(potential(&e, scenario)?)
    };
    if scenario.needs_seed() && e.int("run.seed").is_none() {
        return Err(missing("run.seed", scenario));
    }

    let quad_default = QuadratureSpec::default();
    let quad = QuadratureSpec {
        abs_tol: e.float("quad.abs_tol").unwrap_or(quad_default.abs_tol),
        rel_tol: e.float("quad.rel_tol").unwrap_or(quad_default.rel_tol),
        max_intervals: e.usize("quad.max_intervals", quad_default.max_intervals)?,
    };
    e.core("quad.abs_tol", quad.validate())?;

    let dsf = DsfSettings {
        q_min: e.positive("dsf.q_min", 0.5)?,
        q_max: e.positive("dsf.q_max", 5.0)?,
        q_count: e.usize("dsf.q_count", 10)?.max(1),
        e_min: e.float("dsf.e_min").unwrap_or(-4.5),
        e_max: e.float("dsf.e_max").unwrap_or(4.5),
        e_count: e.usize("dsf.e_count", 10)?.max(1),
    };

    let fdt_q = e.floats("fdt.q").unwrap_or(&[0.3, 1.0, 2.0, 0.7, 4.0]).to_vec();
    let fdt_t = e.floats("fdt.t").unwrap_or(&[0.5, 1.0, 0.2, 3.0, 0.05]).to_vec();
    if fdt_q.len() != fdt_t.len() {
        return Err(err(
            e.line("fdt.t").or(e.line("fdt.q")),
            "fdt.t",
            format!("fdt.q has {} entries but fdt.t has {}", fdt_q.len(), fdt_t.len()),
        ));
    }

    let initial = match e.text("mc.initial").unwrap_or("maxwell") {
        "maxwell" => McInitial::Maxwell,
        "fixed" => match e.floats("mc.p0") {
            Some(&[x, y, z]) => McInitial::Fixed([x, y, z]),
            Some(_) => return Err(err(e.line("mc.p0"), "mc.p0", "expected three components")),
            None => return Err(missing("mc.p0", scenario)),
        },
        other => {
            return Err(err(
                e.line("mc.initial"),
                "mc.initial",
                format!("expected `maxwell` or `fixed`, got `{other}`"),
            ))
        }
    };
    let mc = McSettings {
        n_traj: e.usize("mc.n_traj", 1000)?,
        horizon: e.float("mc.horizon"),
        initial,
        snapshots: e.usize("mc.snapshots", 11)?.max(2),
        bins: e.usize("mc.bins", 16)?.max(2),
    };

    let band = BandSettings {
        dp: e.positive("band.dp", 0.25)?,
        count: e.usize("band.count", 48)?,
        offsets: e.ints("band.offsets").unwrap_or(&[0, 1, 4]).to_vec(),
        center: e.float("band.center").unwrap_or(0.0),
        width: e.positive("band.width", 1.0)?,
        dt: e.float("band.dt"),
        steps: e.usize("band.steps", 200)?,
        snapshots: e.usize("band.snapshots", 5)?.max(2),
        shift: e.float("band.shift").unwrap_or(1.0),
    };

    let brownian = BrownianSettings {
        eta: e.float("brownian.eta"),
        dx: match e.float("grid.dx") {
            Some(_) => Some(e.positive("grid.dx", 0.0)?),
            None => None,
        },
        count: e.usize("grid.count", 128)?,
        dt: e.float("brownian.dt"),
        steps: e.usize("brownian.steps", 100)?,
        monitor_every: e.usize("brownian.monitor_every", 10)?.max(1),
        matrix_every: e.usize("brownian.matrix_every", 0)?,
        state: [
            e.float("state.mean_x"),
            e.float("state.mean_p"),
            e.float("state.var_x"),
            e.float("state.var_p"),
            e.float("state.cov_xp"),
        ],
    };

    Ok(RunConfig {
        scenario,
        seed: e.int("run.seed"),
        units,
        gas,
        particle,
        potential,
        quad,
        kernel_variant: variant(&e, "kernel.variant")?,
        dsf,
        fdt: FdtSettings {
            points: fdt_q.into_iter().zip(fdt_t).collect(),
        },
        xsec: XsecSettings {
            momenta: e.floats("xsec.p").unwrap_or(&[0.5, 1.5, 4.0]).to_vec(),
            variant: variant(&e, "xsec.variant")?,
        },
        mc,
        band,
        brownian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DSF: &str = "run.scenario = dsf\ngas.mass = 1\ngas.beta = 2\n";

    #[test]
    fn minimal_dsf_defaults() {
        let c = parse_config(DSF).unwrap();
        assert_eq!(c.scenario, Scenario::Dsf);
        assert_eq!(c.units.hbar, 1.0);
        assert_eq!(c.gas.beta, 2.0);
        assert!(c.particle.is_none() && c.potential.is_none());
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let e = parse_config(&format!("{DSF}gas.beta = 3\n")).unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.to_string().contains("first set on line 3"), "{e}");
    }

    #[test]
    fn unknown_and_mistyped_keys() {
        let e = parse_config(&format!("{DSF}gas.temperature = 3\n")).unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(4), Some("gas.temperature")));
        let e = parse_config("run.scenario = dsf\ngas.mass = heavy\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("type mismatch"));
        let e = parse_config(&format!("{DSF}dsf.q_count = 2.5\n")).unwrap_err();
        assert_eq!(e.line, Some(4));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header\n\nrun.scenario = dsf # inline\ngas.mass=1\ngas.beta = 1\n";
        assert!(parse_config(text).is_ok());
        let e = parse_config("run.scenario dsf\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn missing_particle_mass_for_kinetic() {
        let text = "gas.mass = 1\ngas.beta = 1\ngas.density = 1\npotential.g = 1\npotential.r = 1\nrun.seed = 1\n";
        let e = parse_config_for(text, Some(Scenario::Kinetic)).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("particle.mass"));
        assert!(e.to_string().contains("particle.mass"));
    }

    #[test]
    fn scenario_mismatch_and_invalid_values() {
        assert!(parse_config_for(DSF, Some(Scenario::Fdt)).is_err());
        assert!(parse_config("gas.mass = 1\ngas.beta = 1\n").is_err());
        let e = parse_config(&format!("{DSF}units.hbar = -1\n")).unwrap_err();
        assert_eq!(e.line, Some(4));
        let e = parse_config(&format!("{DSF}fdt.q = 1, 2\n")).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("fdt.t"));
    }

    #[test]
    fn tabulated_potential() {
        let text = "run.scenario = friction\ngas.mass = 1\ngas.beta = 1\ngas.density = 1\n\
                    particle.mass = 50\npotential.kind = tabulated\npotential.q = 0, 1, 2\n\
                    potential.t = 1, 0.5, 0\n";
        let c = parse_config(text).unwrap();
        assert!(matches!(c.potential, Some(PotentialSpec::Tabulated(_))));
    }
}
