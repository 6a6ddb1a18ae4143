//! Run configuration: one JSON document with a default for every field,
//! plus dotted-path overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::construction::{ComposedSampler, ConstructionParams};
use crate::dynamics::{golden_alpha, IidSystem, RotationSystem, System};
use crate::error::{LabError, Result};
use crate::measures::EnergyGrid;
use crate::sampler::{BaseSampler, Harmonic, Sampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub sampler: SamplerConfig,
    pub numerics: NumericsConfig,
    pub construction: ConstructionConfig,
    pub walters: WaltersConfig,
    pub output: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            sampler: SamplerConfig::Zero,
            numerics: NumericsConfig::default(),
            construction: ConstructionConfig::default(),
            walters: WaltersConfig::default(),
            output: "run".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Rotation,
    Iid,
}

/// `"golden"`, a decimal string, or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub alpha: AlphaSpec,
    pub depth: usize,
    pub levels: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            kind: SystemKind::Rotation,
            alpha: AlphaSpec::Text("golden".into()),
            depth: RotationSystem::DEFAULT_DEPTH,
            levels: vec![-1.0, 1.0],
            probs: vec![0.5, 0.5],
        }
    }
}

/// Parses a rotation number: `golden` or a decimal in `(0, 1)`.
pub fn parse_alpha(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("golden") {
        return Ok(golden_alpha());
    }
    let a: f64 = t
        .parse()
        .map_err(|_| LabError::param("system.alpha", format!("cannot parse {s:?}")))?;
    check_alpha(a)
}

fn check_alpha(a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(LabError::param(
            "system.alpha",
            format!("must lie in (0, 1), got {a}"),
        ));
    }
    Ok(a)
}

impl SystemConfig {
    pub fn alpha(&self) -> Result<f64> {
        match &self.alpha {
            AlphaSpec::Number(a) => check_alpha(*a),
            AlphaSpec::Text(s) => parse_alpha(s),
        }
    }

    pub fn rotation(&self) -> Result<RotationSystem> {
        if self.kind != SystemKind::Rotation {
            return Err(LabError::param(
                "system.kind",
                "this command needs a rotation",
            ));
        }
        RotationSystem::new(self.alpha()?, self.depth)
    }

    pub fn build(&self) -> Result<System> {
        match self.kind {
            SystemKind::Rotation => Ok(System::Rotation(self.rotation()?)),
            SystemKind::Iid => Ok(System::Iid(IidSystem::new(
                self.levels.clone(),
                self.probs.clone(),
                0,
            )?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    Zero,
    Constant {
        value: f64,
    },
    Cosine {
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    Trig {
        offset: f64,
        terms: Vec<Harmonic>,
    },
    Identity,
    /// A serialized [`ComposedSampler`], e.g. a construction's `vn_step<k>.json`.
    ComposedFile {
        path: String,
    },
}

/// A sampler resolved from its configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedSampler {
    Base(BaseSampler),
    Composed(ComposedSampler),
}

impl Sampler for ResolvedSampler {
    fn eval(&self, x: f64) -> f64 {
        match self {
            ResolvedSampler::Base(b) => b.eval(x),
            ResolvedSampler::Composed(c) => c.eval(x),
        }
    }

    fn sup_bound(&self) -> f64 {
        match self {
            ResolvedSampler::Base(b) => b.sup_bound(),
            ResolvedSampler::Composed(c) => c.sup_bound(),
        }
    }
}

impl SamplerConfig {
    /// The closed-form sampler, or `None` for `composed-file`.
    pub fn base(&self) -> Option<BaseSampler> {
        Some(match self {
            SamplerConfig::Zero => BaseSampler::Zero,
            SamplerConfig::Constant { value } => BaseSampler::Constant { value: *value },
            SamplerConfig::Cosine { amplitude, phase } => BaseSampler::Cosine {
                amplitude: *amplitude,
                phase: *phase,
            },
            SamplerConfig::Trig { offset, terms } => BaseSampler::Trig {
                offset: *offset,
                terms: terms.clone(),
            },
            SamplerConfig::Identity => BaseSampler::Identity,
            SamplerConfig::ComposedFile { .. } => return None,
        })
    }

    pub fn resolve(&self) -> Result<ResolvedSampler> {
        match self {
            SamplerConfig::ComposedFile { path } => {
                let text = std::fs::read_to_string(path)?;
                Ok(ResolvedSampler::Composed(parse_composed(&text)?))
            }
            other => {
                let b = other.base().expect("closed form");
                if !b.is_finite() {
                    return Err(LabError::param("sampler", "parameters must be finite"));
                }
                Ok(ResolvedSampler::Base(b))
            }
        }
    }
}

pub fn parse_composed(text: &str) -> Result<ComposedSampler> {
    serde_json::from_str(text).map_err(|e| LabError::parse("composed sampler", e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to `−(2 + ‖v‖∞ + 0.5)`.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            size: 401,
        }
    }
}

impl GridConfig {
    pub fn resolve(&self, sup: f64) -> Result<EnergyGrid> {
        let m = 2.0 + sup + 0.5;
        EnergyGrid::linspace(self.lo.unwrap_or(-m), self.hi.unwrap_or(m), self.size)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(rename = "J")]
    pub j: usize,
    pub lyapunov_n: usize,
    pub lyapunov_m: usize,
    pub gap_tol: f64,
    pub weight_tol: f64,
    pub edge_exclusion: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            m: 50,
            seed: 1,
            grid: GridConfig::default(),
            j: 8,
            lyapunov_n: 10_000,
            lyapunov_m: 32,
            gap_tol: 0.05,
            weight_tol: 1e-4,
            edge_exclusion: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructionConfig {
    pub eps: f64,
    pub n_steps: usize,
    pub grid_size: usize,
    pub seed_margin: f64,
    pub seed_fractions: Vec<f64>,
    pub columns_min: usize,
    pub columns_max: usize,
    pub level_escalations: usize,
    pub halvings: usize,
    pub min_height: u64,
}

impl Default for ConstructionConfig {
    fn default() -> Self {
        let p = ConstructionParams::default();
        Self {
            eps: 0.5,
            n_steps: 2,
            grid_size: p.grid_size,
            seed_margin: p.seed_margin,
            seed_fractions: p.seed_fractions,
            columns_min: p.columns_min,
            columns_max: p.columns_max,
            level_escalations: p.level_escalations,
            halvings: p.halvings,
            min_height: p.min_height,
        }
    }
}

/// A probe energy: a number, `"min-spectrum"` (minimal direct Lyapunov
/// exponent on the detected spectrum) or `"outside"` (1.0 above it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergySpec {
    Value(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaltersConfig {
    pub n_list: Vec<usize>,
    pub grid_size: usize,
    pub energies: Vec<EnergySpec>,
}

impl Default for WaltersConfig {
    fn default() -> Self {
        Self {
            n_list: vec![100, 1000, 10_000],
            grid_size: 4096,
            energies: vec![EnergySpec::Named("min-spectrum".into())],
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| LabError::parse("config", e))
    }

    /// Applies `path = value` overrides; values parse as JSON, falling back
    /// to a bare string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for (path, raw) in overrides {
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            set_path(&mut doc, path, value)?;
        }
        serde_json::from_value(doc).map_err(|e| LabError::parse("config", e))
    }

    pub fn construction_params(&self) -> ConstructionParams {
        let c = &self.construction;
        let n = &self.numerics;
        ConstructionParams {
            n: n.n,
            m: n.m,
            seed: n.seed,
            grid_size: c.grid_size,
            j: n.j,
            weight_tol: n.weight_tol,
            seed_margin: c.seed_margin,
            seed_fractions: c.seed_fractions.clone(),
            columns_min: c.columns_min,
            columns_max: c.columns_max,
            level_escalations: c.level_escalations,
            halvings: c.halvings,
            min_height: c.min_height,
        }
    }

    /// Checks everything that does not need file access.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        match s.kind {
            SystemKind::Rotation => {
                s.alpha()?;
                if s.depth == 0 {
                    return Err(LabError::param("system.depth", "must be at least 1"));
                }
            }
            SystemKind::Iid => {
                IidSystem::new(s.levels.clone(), s.probs.clone(), 0)?;
            }
        }
        if let Some(b) = self.sampler.base() {
            if !b.is_finite() {
                return Err(LabError::param("sampler", "parameters must be finite"));
            }
            if b == BaseSampler::Identity && s.kind == SystemKind::Rotation {
                return Err(LabError::param(
                    "sampler.kind",
                    "identity sampler needs an iid system",
                ));
            }
        }
        let n = &self.numerics;
        if n.n < 8 {
            return Err(LabError::param("numerics.N", "must be at least 8"));
        }
        if n.m == 0 {
            return Err(LabError::param("numerics.M", "must be at least 1"));
        }
        if n.grid.size == 0 {
            return Err(LabError::param("numerics.grid.size", "must be at least 1"));
        }
        for (name, v) in [
            ("numerics.grid.lo", n.grid.lo),
            ("numerics.grid.hi", n.grid.hi),
        ] {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(LabError::param(name, "must be finite"));
            }
        }
        if let (Some(lo), Some(hi)) = (n.grid.lo, n.grid.hi) {
            if n.grid.size > 1 && hi <= lo {
                return Err(LabError::param("numerics.grid", "need lo < hi"));
            }
        }
        if n.j == 0 || n.j >= crate::measures::kernel::MAX_ORDER {
            return Err(LabError::param("numerics.J", "must lie in 1..16"));
        }
        if n.lyapunov_n < 100 {
            return Err(LabError::param(
                "numerics.lyapunov_n",
                "must be at least 100",
            ));
        }
        if n.lyapunov_m == 0 {
            return Err(LabError::param("numerics.lyapunov_m", "must be at least 1"));
        }
        if !(n.gap_tol > 0.0 && n.gap_tol.is_finite()) {
            return Err(LabError::param("numerics.gap_tol", "must be positive"));
        }
        if !(n.weight_tol >= 0.0 && n.weight_tol < 1.0) {
            return Err(LabError::param("numerics.weight_tol", "must lie in [0, 1)"));
        }
        if !(n.edge_exclusion >= 0.0 && n.edge_exclusion.is_finite()) {
            return Err(LabError::param(
                "numerics.edge_exclusion",
                "must be nonnegative",
            ));
        }
        let c = &self.construction;
        if !(c.eps > 0.0 && c.eps.is_finite()) {
            return Err(LabError::param("construction.eps", "must be positive"));
        }
        self.construction_params().validate()?;
        let w = &self.walters;
        if w.n_list.is_empty() {
            return Err(LabError::param("walters.n_list", "must be nonempty"));
        }
        if w.n_list[0] == 0 || w.n_list.windows(2).any(|p| p[0] >= p[1]) {
            return Err(LabError::param(
                "walters.n_list",
                "must be positive and strictly increasing",
            ));
        }
        if w.grid_size == 0 {
            return Err(LabError::param("walters.grid_size", "must be at least 1"));
        }
        for e in &w.energies {
            match e {
                EnergySpec::Value(x) if !x.is_finite() => {
                    return Err(LabError::param("walters.energies", "must be finite"))
                }
                EnergySpec::Named(s) if s != "min-spectrum" && s != "outside" => {
                    return Err(LabError::param(
                        "walters.energies",
                        format!("unknown energy {s:?}"),
                    ))
                }
                _ => {}
            }
        }
        if self.output.is_empty() {
            return Err(LabError::param("output", "must be nonempty"));
        }
        Ok(())
    }
}

/// Sets `doc[a][b]… = value` for `path = "a.b…"`, creating objects along
/// the way.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(LabError::param(path, "empty path segment"));
    }
    let mut cur = doc;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let obj = match cur {
            Value::Object(map) => map,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just set")
            }
            _ => {
                return Err(LabError::param(
                    path,
                    format!("`{key}` is not inside an object"),
                ))
            }
        };
        if parts.peek().is_none() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("path has at least one segment")
}

/// Splits `--a.b value` and `--a.b=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(LabError::param(arg.clone(), "expected --path value"));
        };
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| LabError::param(key, "missing override value"))?;
            out.push((key.to_string(), v.clone()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert_eq!(RunConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn alpha_forms() {
        assert_eq!(parse_alpha("golden").unwrap(), golden_alpha());
        assert_eq!(parse_alpha(" 0.25 ").unwrap(), 0.25);
        for bad in ["1.5", "0", "-0.2", "nan", "inf", "x"] {
            match parse_alpha(bad) {
                Err(LabError::InvalidParameter { field, .. }) => assert_eq!(field, "system.alpha"),
                other => panic!("{bad}: {other:?}"),
            }
        }
        let c = RunConfig::from_json(r#"{"system":{"alpha":0.3}}"#).unwrap();
        assert_eq!(c.system.alpha().unwrap(), 0.3);
    }

    #[test]
    fn dotted_overrides() {
        let args: Vec<String> = [
            "--numerics.N",
            "4000",
            "--sampler.kind=cosine",
            "--sampler.amplitude",
            "3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let o = parse_overrides(&args).unwrap();
        let c = RunConfig::default().with_overrides(&o).unwrap();
        assert_eq!(c.numerics.n, 4000);
        assert_eq!(
            c.sampler,
            SamplerConfig::Cosine {
                amplitude: 3.0,
                phase: 0.0
            }
        );
        let c = RunConfig::default()
            .with_overrides(&[("system.alpha".into(), "0.4".into())])
            .unwrap();
        assert_eq!(c.system.alpha().unwrap(), 0.4);
        let c = RunConfig::default()
            .with_overrides(&[("numerics.grid.lo".into(), "-3".into())])
            .unwrap();
        assert_eq!(c.numerics.grid.lo, Some(-3.0));
    }

    #[test]
    fn unknown_fields_and_bad_overrides_fail() {
        assert!(RunConfig::from_json(r#"{"numerics":{"n":5}}"#).is_err());
        assert!(
            RunConfig::from_json(r#"{"sampler":{"kind":"cosine","amplitude":1,"x":2}}"#).is_err()
        );
        let d = RunConfig::default();
        assert!(d
            .with_overrides(&[("numerics.bogus".into(), "1".into())])
            .is_err());
        assert!(d
            .with_overrides(&[("output.x".into(), "1".into())])
            .is_err());
        assert!(d.with_overrides(&[("a..b".into(), "1".into())]).is_err());
        assert!(parse_overrides(&["numerics.N".into()]).is_err());
        assert!(parse_overrides(&["--numerics.N".into()]).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let bad = |json: &str, field: &str| {
            let c = RunConfig::from_json(json).unwrap();
            match c.validate() {
                Err(LabError::InvalidParameter { field: f, .. }) => assert_eq!(f, field, "{json}"),
                other => panic!("{json}: {other:?}"),
            }
        };
        bad(r#"{"system":{"alpha":"1.5"}}"#, "system.alpha");
        bad(r#"{"walters":{"n_list":[]}}"#, "walters.n_list");
        bad(r#"{"walters":{"n_list":[10,5]}}"#, "walters.n_list");
        bad(r#"{"numerics":{"N":4}}"#, "numerics.N");
        bad(r#"{"construction":{"eps":0}}"#, "construction.eps");
        bad(r#"{"sampler":{"kind":"identity"}}"#, "sampler.kind");
        bad(r#"{"walters":{"energies":["middle"]}}"#, "walters.energies");
    }

    #[test]
    fn grid_defaults_cover_the_support() {
        let g = GridConfig::default().resolve(3.0).unwrap();
        assert_eq!((g.lo(), g.hi(), g.len), (-5.5, 5.5, 401));
        let one = GridConfig {
            size: 1,
            ..GridConfig::default()
        };
        assert_eq!(one.resolve(0.0).unwrap().len, 1);
    }
}
