use std::path::Path;

use clap::{Args, ValueEnum};
use comirror::interp::WeightRule;
use comirror::solver::DeltaSchedule;
use comirror::{Error, GeometryKind, Result, SamplingKind, SolverConfig};
use serde_json::Value;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GeometryArg {
    Euclidean,
    Entropy,
}

impl From<GeometryArg> for GeometryKind {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Euclidean => GeometryKind::Euclidean,
            GeometryArg::Entropy => GeometryKind::Entropy,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StrategyArg {
    Coordinate,
    RotatedCoordinate,
    RandomBall,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightRuleArg {
    FirstActive,
    UniformActive,
}

/// Solver settings shared by `run` and `suite`.
#[derive(Clone, Debug, Default, Args)]
pub struct Overrides {
    /// JSON file with solver settings, or a summary JSON from an earlier run
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryArg>,
    /// Entropy only: value of x_i + shift at the lowest box coordinate
    #[arg(long)]
    pub entropy_shift: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Objective evaluation budget
    #[arg(long)]
    pub budget_f: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Bound on the inverse norm of accepted samples
    #[arg(long = "M")]
    pub m: Option<f64>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub weight_rule: Option<WeightRuleArg>,
    /// Scale c of the radius schedule c / sqrt(k + 1)
    #[arg(long)]
    pub delta_scale: Option<f64>,
}

/// Settings read from `--config`, plus the problem named by a summary file.
#[derive(Clone, Debug, Default)]
pub struct FileConfig {
    pub config: SolverConfig,
    pub problem: Option<String>,
}

/// Overlays the keys of `partial` onto the default configuration. Unknown
/// keys are rejected.
pub fn config_from_value(partial: &Value) -> Result<SolverConfig> {
    let Value::Object(partial) = partial else {
        return Err(Error::InvalidConfig("config must be a JSON object".into()));
    };
    let Value::Object(mut merged) = serde_json::to_value(SolverConfig::default())? else {
        unreachable!("config serializes to an object");
    };
    for (key, value) in partial {
        if !merged.contains_key(key) {
            return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
        }
        merged.insert(key.clone(), value.clone());
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    let is_summary = value.get("config").is_some_and(Value::is_object);
    if is_summary {
        Ok(FileConfig {
            config: config_from_value(&value["config"])?,
            problem: value.get("problem").and_then(Value::as_str).map(String::from),
        })
    } else {
        Ok(FileConfig {
            config: config_from_value(&value)?,
            problem: None,
        })
    }
}

impl Overrides {
    /// File settings (if any) with flags applied on top.
    pub fn resolve(&self) -> Result<FileConfig> {
        let mut base = match &self.config {
            Some(path) => read_config(path)?,
            None => FileConfig::default(),
        };
        let c = &mut base.config;
        if let Some(g) = self.geometry {
            c.geometry.geometry = g.into();
        }
        if let Some(v) = self.entropy_shift {
            c.geometry.entropy_shift = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if let Some(v) = self.budget_f {
            c.f_eval_budget = Some(v);
        }
        if let Some(v) = self.max_iter {
            c.max_iterations = v;
        }
        if let Some(v) = self.m {
            c.max_inv_norm = v;
        }
        if let Some(s) = self.strategy {
            c.strategy.kind = match s {
                StrategyArg::Coordinate => SamplingKind::Coordinate,
                StrategyArg::RotatedCoordinate => SamplingKind::RotatedCoordinate,
                StrategyArg::RandomBall => SamplingKind::RandomBall,
            };
        }
        if let Some(v) = self.seed {
            c.strategy.seed = v;
        }
        if let Some(w) = self.weight_rule {
            c.weight_rule = match w {
                WeightRuleArg::FirstActive => WeightRule::FirstActive,
                WeightRuleArg::UniformActive => WeightRule::UniformActive,
            };
        }
        if let Some(scale) = self.delta_scale {
            c.delta_schedule = DeltaSchedule::Scaled { scale };
        }
        c.validate()?;
        Ok(base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn partial_config_overlays_defaults() {
        let c = config_from_value(&json!({"eps": 0.01, "geometry": "entropy"})).unwrap();
        assert_eq!(c.eps, 0.01);
        assert_eq!(c.geometry.geometry, GeometryKind::Entropy);
        assert_eq!(c.max_inv_norm, 10.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(config_from_value(&json!({"epsilon": 0.01})).is_err());
        assert!(config_from_value(&json!([1, 2])).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"config": {"eps": 0.5, "seed": 3}, "problem": "tp2"}"#).unwrap();
        let o = Overrides {
            config: Some(path),
            eps: Some(0.25),
            ..Overrides::default()
        };
        let r = o.resolve().unwrap();
        assert_eq!(r.config.eps, 0.25);
        assert_eq!(r.config.strategy.seed, 3);
        assert_eq!(r.problem.as_deref(), Some("tp2"));
    }
}
