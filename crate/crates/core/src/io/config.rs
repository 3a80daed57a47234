use crate::datagen::GenConfig;
use crate::error::{GilError, Result};
use crate::evaluation::{ProbeConfig, RegressionConfig};
use crate::gil::PlanConfig;
use crate::model::ModelConfig;
use crate::strategies::{StrategyConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub data: Option<String>,
    pub plan: Option<String>,
    pub runs: Option<String>,
}

/// Everything a run depends on. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub strategy: StrategyConfig,
    pub plan: PlanConfig,
    pub datagen: GenConfig,
    pub eval: RegressionConfig,
    pub probe: ProbeConfig,
    pub seeds: Vec<u64>,
    pub paths: PathsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::desk(2000),
            train: TrainConfig::default(),
            strategy: StrategyConfig::baseline(),
            plan: PlanConfig::default(),
            datagen: GenConfig::default(),
            eval: RegressionConfig::default(),
            probe: ProbeConfig::default(),
            seeds: vec![0, 1, 2],
            paths: PathsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| GilError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GilError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            GilError::Config(m) => GilError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.strategy.validate()?;
        self.datagen.validate()?;
        self.probe.validate()?;
        self.eval.mask.validate()?;
        if self.seeds.is_empty() {
            return Err(GilError::Config("seeds must not be empty".into()));
        }
        if !(0.0..1.0).contains(&self.plan.holdout_fraction) {
            return Err(GilError::Config("plan.holdout_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }

    /// The evaluation settings with the plan's holdout fraction applied.
    pub fn regression(&self) -> RegressionConfig {
        RegressionConfig { holdout_fraction: self.plan.holdout_fraction, ..self.eval.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_parsing() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
        assert!(matches!(ExperimentConfig::from_json(r#"{"modle": {}}"#), Err(GilError::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"train": {"batch_size": 4, "typo": 1}}"#).is_err());
        let cfg = ExperimentConfig::from_json(r#"{"train": {"batch_size": 4}, "seeds": [5]}"#).unwrap();
        assert_eq!(cfg.train.batch_size, 4);
        assert_eq!(cfg.train.epochs_per_stage, 5);
        assert_eq!(cfg.seeds, vec![5]);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
