//! Experiment configuration: TOML schema, overrides and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use amvf_core::domain::Domain;
use amvf_core::functions::TestFunction;
use amvf_core::Params;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Expansion,
    Dirichlet,
    WholeSpace,
    GameValue,
    PropertySuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Expansion => "expansion",
            Kind::Dirichlet => "dirichlet",
            Kind::WholeSpace => "whole_space",
            Kind::GameValue => "game_value",
            Kind::PropertySuite => "property_suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub d: usize,
    pub p: f64,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub eps_ladder: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Greedy,
    UniformRandom,
    AlwaysStay,
    CenterStay,
    WorstSampledPoint,
}

fn default_seed() -> u64 {
    0
}

fn default_n_episodes() -> usize {
    10_000
}

fn default_n_c() -> usize {
    amvf_core::amvf::CGrid::DEFAULT_COUNT
}

fn default_eta() -> f64 {
    1e-3
}

fn greedy() -> StrategyName {
    StrategyName::Greedy
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_episodes")]
    pub n_episodes: usize,
    #[serde(default = "default_n_c")]
    pub n_c: usize,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Terminal time of the DPP runs.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Evaluation point: the expansion point, or the probe of DPP and game runs.
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    /// Probe time of DPP and game runs; defaults to the horizon.
    #[serde(default)]
    pub time: Option<f64>,
    /// Greedy slack, and truncation tolerance of whole-space runs.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// `C` of the decay envelope in whole-space runs.
    #[serde(default)]
    pub decay_constant: Option<f64>,
    #[serde(default = "greedy")]
    pub strategy_i: StrategyName,
    #[serde(default = "greedy")]
    pub strategy_ii: StrategyName,
    /// Write every `export_stride`-th DPP step as CSV; 0 disables export.
    #[serde(default)]
    pub export_stride: usize,
}

impl Default for RunBlock {
    fn default() -> Self {
        toml::from_str("").expect("run block defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub params: ParamsBlock,
    #[serde(default)]
    pub geometry: Option<GeometryBlock>,
    /// Named test functions; which names are read depends on the kind.
    #[serde(default)]
    pub data: BTreeMap<String, TestFunction>,
    #[serde(default)]
    pub run: RunBlock,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_episodes: Option<usize>,
    pub n_c: Option<usize>,
    pub h: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub eps: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.run.seed = v;
        }
        if let Some(v) = o.n_episodes {
            self.run.n_episodes = v;
        }
        if let Some(v) = o.n_c {
            self.run.n_c = v;
        }
        if let Some(v) = o.h {
            self.run.h = Some(v);
        }
        if let Some(v) = &o.output_dir {
            self.run.output_dir = Some(v.clone());
        }
        if let Some(v) = o.threads {
            self.run.threads = Some(v);
        }
        if let Some(v) = o.eps {
            self.params.eps = Some(v);
            self.params.eps_ladder = None;
        }
    }

    /// SHA-256 of the canonical JSON form, output location excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.run.output_dir = None;
        c.run.threads = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn function(&self, name: &str) -> Result<&TestFunction, ConfigError> {
        let f = self.data.get(name).ok_or_else(|| invalid(format!("{} runs need data.{name}", self.kind.name())))?;
        if let Some(d) = f.dim() {
            if d != self.params.d {
                return Err(invalid(format!("data.{name} has dimension {d}, params.d is {}", self.params.d)));
            }
        }
        Ok(f)
    }

    pub fn domain(&self) -> Result<&Domain, ConfigError> {
        let g = self.geometry.as_ref().ok_or_else(|| invalid(format!("{} runs need a geometry block", self.kind.name())))?;
        if g.domain.dim() != self.params.d {
            return Err(invalid(format!("domain has dimension {}, params.d is {}", g.domain.dim(), self.params.d)));
        }
        Ok(&g.domain)
    }

    pub fn base_params(&self) -> Result<Params, ConfigError> {
        let eps = match (&self.params.eps, &self.params.eps_ladder) {
            (Some(e), _) => *e,
            (None, Some(l)) if !l.is_empty() => l[0],
            _ => return Err(invalid("params needs eps or a non-empty eps_ladder")),
        };
        Params::new(self.params.d, self.params.p, eps).map_err(|e| invalid(e.to_string()))
    }

    pub fn ladder(&self) -> Result<Vec<f64>, ConfigError> {
        let l = match (&self.params.eps_ladder, self.params.eps) {
            (Some(l), _) => l.clone(),
            (None, Some(e)) => vec![e],
            (None, None) => return Err(invalid("params needs eps or eps_ladder")),
        };
        if l.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("eps_ladder must be strictly decreasing"));
        }
        for &e in &l {
            Params::new(self.params.d, self.params.p, e).map_err(|e| invalid(e.to_string()))?;
        }
        Ok(l)
    }

    pub fn horizon(&self) -> Result<f64, ConfigError> {
        match self.run.horizon {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => Err(invalid(format!("run.horizon must be positive, got {t}"))),
            None => Err(invalid(format!("{} runs need run.horizon", self.kind.name()))),
        }
    }

    pub fn point(&self) -> Result<Vec<f64>, ConfigError> {
        let x = self.run.point.clone().unwrap_or_else(|| vec![0.0; self.params.d]);
        if x.len() != self.params.d {
            return Err(invalid(format!("run.point has dimension {}, params.d is {}", x.len(), self.params.d)));
        }
        Ok(x)
    }

    pub fn probe_time(&self) -> Result<f64, ConfigError> {
        let t = self.horizon()?;
        match self.run.time {
            Some(s) if s > 0.0 && s <= t => Ok(s),
            Some(s) => Err(invalid(format!("run.time must lie in (0, horizon], got {s}"))),
            None => Ok(t),
        }
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base_params()?;
        self.ladder()?;
        if self.run.n_c == 0 {
            return Err(invalid("run.n_c must be positive"));
        }
        if self.run.threads == Some(0) {
            return Err(invalid("run.threads must be positive"));
        }
        if let Some(h) = self.run.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid(format!("run.h must be positive, got {h}")));
            }
        }
        if self.run.eta.is_nan() || self.run.eta <= 0.0 {
            return Err(invalid("run.eta must be positive"));
        }
        let single_eps = || {
            if self.params.eps_ladder.as_ref().is_some_and(|l| l.len() > 1) && self.params.eps.is_none() {
                Err(invalid(format!("{} runs take a single eps", self.kind.name())))
            } else {
                Ok(())
            }
        };
        match self.kind {
            Kind::Expansion => {
                self.function("phi")?;
                self.point()?;
                if self.ladder()?.len() < 3 {
                    return Err(invalid("expansion runs need at least three ladder entries"));
                }
            }
            Kind::Dirichlet | Kind::PropertySuite | Kind::GameValue => {
                single_eps()?;
                self.domain()?;
                self.function("u0")?;
                self.function("g")?;
                self.point()?;
                self.probe_time()?;
                if self.kind == Kind::GameValue && self.run.n_episodes < 2 {
                    return Err(invalid("run.n_episodes must be at least 2"));
                }
            }
            Kind::WholeSpace => {
                single_eps()?;
                self.function("u0")?;
                self.point()?;
                self.probe_time()?;
                if !self.run.decay_constant.is_some_and(|c| c > 0.0) {
                    return Err(invalid("whole_space runs need a positive run.decay_constant"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
kind = "dirichlet"
[params]
d = 1
p = 3.0
eps = 0.3
[geometry.domain]
shape = "box"
lo = [-1.0]
hi = [1.0]
[data.u0]
kind = "constant"
value = 1.0
[data.g]
kind = "constant"
value = 1.0
[run]
horizon = 0.2
"#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.run.n_c, 48);
        assert_eq!(c.run.strategy_i, StrategyName::Greedy);
    }

    #[test]
    fn unknown_function_is_a_parse_error() {
        let bad = BASE.replace("kind = \"constant\"\nvalue = 1.0\n[data.g]", "kind = \"sinc\"\n[data.g]");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn overrides_win_and_change_the_hash() {
        let mut c = ExperimentConfig::parse(BASE).unwrap();
        let h0 = c.hash();
        c.apply(&Overrides { output_dir: Some("x".into()), threads: Some(2), ..Default::default() });
        assert_eq!(c.hash(), h0);
        c.apply(&Overrides { eps: Some(0.2), seed: Some(5), ..Default::default() });
        assert_eq!(c.params.eps, Some(0.2));
        assert_eq!(c.run.seed, 5);
        assert_ne!(c.hash(), h0);
    }

    #[test]
    fn ladder_must_decrease() {
        let mut c = ExperimentConfig::parse(BASE).unwrap();
        c.kind = Kind::Expansion;
        c.params.eps = None;
        c.params.eps_ladder = Some(vec![0.3, 0.4, 0.2]);
        c.data.insert("phi".into(), TestFunction::Constant { value: 0.0 });
        assert!(c.validate().unwrap_err().to_string().contains("strictly decreasing"));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut c = ExperimentConfig::parse(BASE).unwrap();
        c.data.insert("u0".into(), TestFunction::Quadratic { center: vec![0.0, 0.0], scale: 1.0 });
        assert!(c.validate().is_err());
    }
}
