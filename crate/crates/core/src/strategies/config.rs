use crate::error::{GilError, Result};
use crate::model::MaskSpec;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Working precision of the parameters between optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    /// Parameters are rounded to the nearest `f32` after every step, so a
    /// checkpoint holds them exactly.
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs_per_stage: usize,
    pub base_lr: f64,
    /// Shrunk to `ceil(total_steps / 2)` when it exceeds a stage's step count.
    pub warmup_steps: u64,
    pub mask: MaskSpec,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs_per_stage: 5,
            base_lr: 5e-4,
            warmup_steps: 5000,
            mask: MaskSpec::default(),
            seed: 0,
            precision: Precision::F64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs_per_stage == 0 || !(self.base_lr > 0.0) {
            return Err(GilError::Config("batch_size, epochs_per_stage and base_lr must be positive".into()));
        }
        self.mask.validate()
    }

    pub fn steps_per_epoch(&self, n_samples: usize) -> u64 {
        n_samples.div_ceil(self.batch_size) as u64
    }

    pub fn effective_warmup(&self, total_steps: u64) -> u64 {
        if self.warmup_steps > total_steps {
            total_steps.div_ceil(2)
        } else {
            self.warmup_steps
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Baseline,
    Oracle,
    Replay,
    Distill,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::Oracle => "oracle",
            Self::Replay => "replay",
            Self::Distill => "distill",
        })
    }
}

impl FromStr for StrategyKind {
    type Err = GilError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "oracle" => Ok(Self::Oracle),
            "replay" => Ok(Self::Replay),
            "distill" => Ok(Self::Distill),
            other => Err(GilError::Usage(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Replay only. `None` keeps every sample of each earlier stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_buffer_per_stage: Option<usize>,
    /// Distill only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl StrategyConfig {
    pub fn baseline() -> Self {
        Self { kind: StrategyKind::Baseline, replay_buffer_per_stage: None, lambda: None }
    }

    pub fn oracle() -> Self {
        Self { kind: StrategyKind::Oracle, ..Self::baseline() }
    }

    pub fn replay(buffer: Option<usize>) -> Self {
        Self { kind: StrategyKind::Replay, replay_buffer_per_stage: buffer, lambda: None }
    }

    pub fn distill(lambda: f64) -> Self {
        Self { kind: StrategyKind::Distill, replay_buffer_per_stage: None, lambda: Some(lambda) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_some() && self.kind != StrategyKind::Distill {
            return Err(GilError::Config(format!("lambda given for strategy {}", self.kind)));
        }
        if self.replay_buffer_per_stage.is_some() && self.kind != StrategyKind::Replay {
            return Err(GilError::Config(format!("replay buffer size given for strategy {}", self.kind)));
        }
        match (self.kind, self.lambda) {
            (StrategyKind::Distill, None) => Err(GilError::Config("distill needs lambda".into())),
            (StrategyKind::Distill, Some(l)) if !(l >= 0.0) || !l.is_finite() => {
                Err(GilError::Config(format!("lambda {l} must be finite and non-negative")))
            }
            _ => Ok(()),
        }
    }

    /// Short label such as `replay-256` or `distill-0.5`.
    pub fn label(&self) -> String {
        match self.kind {
            StrategyKind::Replay => match self.replay_buffer_per_stage {
                Some(n) => format!("replay-{n}"),
                None => "replay-full".into(),
            },
            StrategyKind::Distill => format!("distill-{}", self.lambda.unwrap_or(0.0)),
            k => k.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_knob_rules() {
        assert!(StrategyConfig::baseline().validate().is_ok());
        assert!(StrategyConfig::distill(-1.0).validate().is_err());
        assert!(StrategyConfig::distill(0.0).validate().is_ok());
        let bad = StrategyConfig { lambda: Some(1.0), ..StrategyConfig::replay(Some(3)) };
        assert!(bad.validate().is_err());
        let bad = StrategyConfig { replay_buffer_per_stage: Some(1), ..StrategyConfig::baseline() };
        assert!(bad.validate().is_err());
        assert_eq!(StrategyConfig::replay(Some(64)).label(), "replay-64");
        assert_eq!(StrategyConfig::distill(0.5).label(), "distill-0.5");
    }

    #[test]
    fn warmup_scaling() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.effective_warmup(157), 79);
        assert_eq!(cfg.effective_warmup(10_000), 5000);
        assert_eq!(cfg.steps_per_epoch(129), 2);
    }
}
