//! Run configuration: a TOML file with the sections `[model]`, `[kernel]`,
//! `[discretization]`, `[time]`, `[initial]`, `[output]`, `[verify]`,
//! `[convergence]` and `[sweep]`. Every key has a default (the canonical
//! scenario), unknown keys are rejected, and validation reports every
//! offending key at once.

use std::fmt;
use std::path::{Path, PathBuf};

use klausmeier::kernel::KernelFamily;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub kernel: KernelSection,
    pub discretization: DiscretizationSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub output: OutputSection,
    pub verify: VerifySection,
    pub convergence: ConvergenceSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub a: f64,
    pub b: f64,
    pub dispersal: f64,
    pub mu: f64,
    pub nu: f64,
    #[serde(rename = "M")]
    pub cutoff_bound: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { a: 0.5, b: 1.0, dispersal: 1.0, mu: 1.0, nu: 1.0, cutoff_bound: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub family: KernelFamily,
    /// Length scale of the analytic families; 0.5 when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub normalization: f64,
    /// Two-column `z,gamma` CSV for `family = "tabulated"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self { family: KernelFamily::Laplace, epsilon: None, normalization: 1.0, table: None }
    }
}

impl KernelSection {
    pub const DEFAULT_EPSILON: f64 = 0.5;

    pub fn epsilon_or_default(&self) -> f64 {
        self.epsilon.unwrap_or(Self::DEFAULT_EPSILON)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    pub m: usize,
    #[serde(rename = "L")]
    pub half_length: f64,
    pub include_constant: bool,
    /// Quadrature panels on `Ω`; `2m + 4` when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panels: Option<usize>,
    /// Gauss–Legendre points per panel; 10 when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self { m: 8, half_length: 1.0, include_constant: false, panels: None, order: None }
    }
}

impl DiscretizationSection {
    pub fn panels_or_default(&self) -> usize {
        self.panels.unwrap_or(2 * self.m + 4)
    }

    pub fn order_or_default(&self) -> usize {
        self.order.unwrap_or(10)
    }
}

/// A number, or a keyword standing for a derived value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Longest horizon allowed by the estimates (needs `a > 0`).
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// Use the profiles as given.
    Off,
    /// Scale the profiles to this fraction of the largest admissible amplitude.
    Fraction(f64),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumberOrWord {
    Number(f64),
    Word(String),
}

fn number_or_keyword<'de, D: Deserializer<'de>>(d: D, keyword: &str) -> Result<Option<f64>, D::Error> {
    match NumberOrWord::deserialize(d)? {
        NumberOrWord::Number(x) => Ok(Some(x)),
        NumberOrWord::Word(w) if w == keyword => Ok(None),
        NumberOrWord::Word(w) => Err(serde::de::Error::custom(format!("expected a number or \"{keyword}\", got \"{w}\""))),
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Horizon::Auto => s.serialize_str("auto"),
            Horizon::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(number_or_keyword(d, "auto")?.map_or(Horizon::Auto, Horizon::Fixed))
    }
}

impl Serialize for Scaling {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Scaling::Off => s.serialize_str("off"),
            Scaling::Fraction(f) => s.serialize_f64(*f),
        }
    }
}

impl<'de> Deserialize<'de> for Scaling {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(number_or_keyword(d, "off")?.map_or(Scaling::Off, Scaling::Fraction))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub horizon: Horizon,
    /// Fixed step; from the stability rule when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub record_stride: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { horizon: Horizon::Fixed(0.1), dt: None, record_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Zero,
    GaussianBump {
        #[serde(default)]
        center: f64,
        width: f64,
        amplitude: f64,
    },
    SingleMode {
        k: usize,
        amplitude: f64,
    },
    /// Two-column `x,value` CSV, interpolated and extended by zero.
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub u: ProfileConfig,
    pub w: ProfileConfig,
    /// `"off"` or a fraction in `(0, 1)` of the largest amplitude admitted by
    /// the small-data conditions.
    pub scale: Scaling,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            u: ProfileConfig::GaussianBump { center: 0.0, width: 0.2, amplitude: 1.0 },
            w: ProfileConfig::GaussianBump { center: 0.0, width: 0.15, amplitude: 1.0 },
            scale: Scaling::Fraction(0.5),
        }
    }
}

/// Files written by `simulate` and `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// `trajectory.csv`: time and all coefficient blocks.
    Trajectory,
    /// `fields.csv`: `u`, `w` on a uniform grid at every recorded time.
    Fields,
    /// `norms.csv`: the monitored norms at every recorded time.
    Norms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    pub grid_points: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Trajectory, OutputFormat::Fields, OutputFormat::Norms],
            grid_points: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Recorded states on which the weak residual is evaluated.
    pub probes: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { probes: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub m_list: Vec<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self { m_list: vec![4, 8, 16] }
    }
}

/// Parameter grid; the sweep runs the Cartesian product of all given lists.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dispersal: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub cutoff_bound: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
}

/// A swept parameter, named as in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    A,
    B,
    Dispersal,
    Mu,
    Nu,
    CutoffBound,
    Epsilon,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::A => "a",
            SweepKey::B => "b",
            SweepKey::Dispersal => "dispersal",
            SweepKey::Mu => "mu",
            SweepKey::Nu => "nu",
            SweepKey::CutoffBound => "M",
            SweepKey::Epsilon => "epsilon",
        }
    }

    /// Write `value` into the matching field of `cfg`.
    pub fn apply(self, cfg: &mut RunConfig, value: f64) {
        match self {
            SweepKey::A => cfg.model.a = value,
            SweepKey::B => cfg.model.b = value,
            SweepKey::Dispersal => cfg.model.dispersal = value,
            SweepKey::Mu => cfg.model.mu = value,
            SweepKey::Nu => cfg.model.nu = value,
            SweepKey::CutoffBound => cfg.model.cutoff_bound = value,
            SweepKey::Epsilon => cfg.kernel.epsilon = Some(value),
        }
    }
}

impl SweepSection {
    /// Swept keys with their values, in a fixed order.
    pub fn axes(&self) -> Vec<(SweepKey, &[f64])> {
        [
            (SweepKey::A, &self.a),
            (SweepKey::B, &self.b),
            (SweepKey::Dispersal, &self.dispersal),
            (SweepKey::Mu, &self.mu),
            (SweepKey::Nu, &self.nu),
            (SweepKey::CutoffBound, &self.cutoff_bound),
            (SweepKey::Epsilon, &self.epsilon),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }

    /// Grid cells in row-major order (last axis fastest).
    pub fn cells(&self) -> Vec<Vec<(SweepKey, f64)>> {
        let mut cells = vec![Vec::new()];
        for (key, values) in self.axes() {
            cells = cells
                .into_iter()
                .flat_map(|cell| {
                    values.iter().map(move |&v| {
                        let mut c = cell.clone();
                        c.push((key, v));
                        c
                    })
                })
                .collect();
        }
        cells
    }
}

/// One offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub source: Option<PathBuf>,
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn mentions(&self, key: &str) -> bool {
        self.issues.iter().any(|i| i.key == key)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(p) => write!(f, "invalid configuration {}:", p.display())?,
            None => write!(f, "invalid configuration:")?,
        }
        for i in &self.issues {
            write!(f, "\n  {}: {}", i.key, i.reason)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Issues(Vec<ConfigIssue>);

impl Issues {
    fn check(&mut self, ok: bool, key: &str, reason: impl FnOnce() -> String) {
        if !ok {
            self.0.push(ConfigIssue { key: key.to_string(), reason: reason() });
        }
    }

    fn positive(&mut self, key: &str, v: f64) {
        self.check(v > 0.0 && v.is_finite(), key, || format!("must be positive and finite, got {v}"));
    }

    fn nonnegative(&mut self, key: &str, v: f64) {
        self.check(v >= 0.0 && v.is_finite(), key, || format!("must be non-negative and finite, got {v}"));
    }
}

impl RunConfig {
    /// Parse TOML text. Relative file paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            source: None,
            issues: vec![ConfigIssue { key: "<file>".into(), reason: e.message().trim().to_string() + &span_hint(text, e.span()) }],
        })?;
        if let Some(base) = base_dir {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize back to TOML; parsing the result yields the same config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(t) = self.kernel.table.as_mut() {
            fix(t);
        }
        for prof in [&mut self.initial.u, &mut self.initial.w] {
            if let ProfileConfig::Csv { path } = prof {
                fix(path);
            }
        }
    }

    /// Every violated constraint, keyed by its dotted config name.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut is = Issues(Vec::new());
        let m = &self.model;
        is.nonnegative("model.a", m.a);
        is.nonnegative("model.b", m.b);
        is.positive("model.dispersal", m.dispersal);
        is.positive("model.mu", m.mu);
        is.nonnegative("model.nu", m.nu);
        is.positive("model.M", m.cutoff_bound);

        let k = &self.kernel;
        is.positive("kernel.normalization", k.normalization);
        match k.family {
            KernelFamily::Tabulated => {
                is.check(k.table.is_some(), "kernel.table", || "required for family = \"tabulated\"".into());
                is.check(k.epsilon.is_none(), "kernel.epsilon", || "not used by tabulated kernels".into());
            }
            _ => {
                is.positive("kernel.epsilon", k.epsilon_or_default());
                is.check(k.table.is_none(), "kernel.table", || "only used with family = \"tabulated\"".into());
            }
        }

        let d = &self.discretization;
        is.check(d.m >= 1, "discretization.m", || "must be at least 1".into());
        is.positive("discretization.L", d.half_length);
        is.check(d.panels_or_default() >= 1, "discretization.panels", || "must be at least 1".into());
        let order = d.order_or_default();
        is.check((1..=64).contains(&order), "discretization.order", || format!("must lie in 1..=64, got {order}"));

        let t = &self.time;
        if let Horizon::Fixed(h) = t.horizon {
            is.positive("time.T", h);
        }
        if let Some(dt) = t.dt {
            is.positive("time.dt", dt);
            if let Horizon::Fixed(h) = t.horizon {
                is.check(dt <= h, "time.dt", || format!("exceeds T ({dt} > {h})"));
            }
        }
        is.check(t.record_stride >= 1, "time.record_stride", || "must be at least 1".into());

        for (name, prof) in [("initial.u", &self.initial.u), ("initial.w", &self.initial.w)] {
            match prof {
                ProfileConfig::Zero => {}
                ProfileConfig::GaussianBump { center, width, amplitude } => {
                    is.check(center.is_finite(), &format!("{name}.center"), || "must be finite".into());
                    is.positive(&format!("{name}.width"), *width);
                    is.check(amplitude.is_finite(), &format!("{name}.amplitude"), || "must be finite".into());
                }
                ProfileConfig::SingleMode { k, amplitude } => {
                    is.check(*k >= 1, &format!("{name}.k"), || "modes are numbered from 1".into());
                    is.check(amplitude.is_finite(), &format!("{name}.amplitude"), || "must be finite".into());
                }
                ProfileConfig::Csv { .. } => {}
            }
        }
        if let Scaling::Fraction(f) = self.initial.scale {
            is.check(f > 0.0 && f < 1.0, "initial.scale", || format!("must be \"off\" or lie in (0, 1), got {f}"));
        }
        if self.time.horizon == Horizon::Auto {
            is.check(m.a > 0.0, "time.T", || "\"auto\" needs rainfall a > 0".into());
        }

        is.check(self.output.grid_points >= 2, "output.grid_points", || "must be at least 2".into());
        is.check(self.verify.probes >= 1, "verify.probes", || "must be at least 1".into());

        let levels = &self.convergence.m_list;
        is.check(
            levels.len() >= 2 && levels[0] >= 1 && levels.windows(2).all(|w| w[0] < w[1]),
            "convergence.m_list",
            || format!("needs at least two strictly increasing levels >= 1, got {levels:?}"),
        );

        for (key, values) in self.sweep.axes() {
            let name = format!("sweep.{}", key.name());
            is.check(!values.is_empty(), &name, || "empty list".into());
            for &v in values {
                let mut probe = self.clone();
                probe.sweep = SweepSection::default();
                key.apply(&mut probe, v);
                if let Err(e) = probe.validate() {
                    for i in e.issues {
                        is.check(false, &name, || format!("value {v}: {}", i.reason));
                    }
                }
            }
        }

        if is.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { source: None, issues: is.0 })
        }
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) if r.start <= text.len() => format!(" (line {})", text[..r.start].matches('\n').count() + 1),
        _ => String::new(),
    }
}

/// Read and validate a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source: Some(path.to_path_buf()),
        issues: vec![ConfigIssue { key: "<file>".into(), reason: format!("cannot read: {e}") }],
    })?;
    RunConfig::from_toml(&text, path.parent()).map_err(|mut e| {
        e.source = Some(path.to_path_buf());
        e
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_canonical_scenario() {
        let cfg = RunConfig::from_toml("", None).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model.a, 0.5);
        assert_eq!(cfg.discretization.panels_or_default(), 20);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.time.horizon = Horizon::Auto;
        cfg.time.dt = Some(1e-3);
        cfg.initial.u = ProfileConfig::SingleMode { k: 2, amplitude: 0.1 };
        cfg.initial.scale = Scaling::Off;
        cfg.sweep.nu = Some(vec![0.0, 1.0]);
        let text = cfg.to_toml();
        assert_eq!(RunConfig::from_toml(&text, None).unwrap(), cfg, "{text}");
    }

    #[test]
    fn grid_is_row_major() {
        let s = SweepSection { dispersal: Some(vec![1.0, 2.0]), nu: Some(vec![0.0, 1.0, 5.0]), ..Default::default() };
        let cells = s.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1], vec![(SweepKey::Dispersal, 1.0), (SweepKey::Nu, 1.0)]);
        assert_eq!(SweepSection::default().cells(), vec![Vec::new()]);
    }
}
