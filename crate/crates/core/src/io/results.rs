use crate::error::{GilError, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    GeneStage,
    Downstream,
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GeneStage => "gene_stage",
            Self::Downstream => "downstream",
        })
    }
}

/// `run_id,seed,strategy,model_stage,target_kind,target_id,metric,value`.
///
/// `metric` is one of `mse`, `accuracy`, `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub seed: u64,
    pub strategy: String,
    pub model_stage: usize,
    pub target_kind: TargetKind,
    pub target_id: String,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    fn key(&self) -> (&str, usize, TargetKind, &str, &str) {
        (&self.run_id, self.model_stage, self.target_kind, &self.target_id, &self.metric)
    }

    fn check(&self) -> Result<()> {
        if !matches!(self.metric.as_str(), "mse" | "accuracy" | "delta") {
            return Err(GilError::Data(format!("unknown metric `{}`", self.metric)));
        }
        if !self.value.is_finite() {
            return Err(GilError::Data(format!("non-finite value in run `{}`", self.run_id)));
        }
        Ok(())
    }
}

/// Adds `new` to `existing`, replacing rows with the same key, sorted by key.
pub fn merge_rows(existing: Vec<ResultRow>, new: Vec<ResultRow>) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = existing.into_iter().filter(|r| !new.iter().any(|n| n.key() == r.key())).collect();
    rows.extend(new);
    rows.sort_by(|a, b| a.key().cmp(&b.key()));
    rows
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        r.check()?;
        w.serialize(r).map_err(|e| GilError::Data(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(["run_id", "seed", "strategy", "model_stage", "target_kind", "target_id", "metric", "value"])
            .map_err(|e| GilError::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| GilError::Data(e.to_string()))?;
    super::files::write_atomic(path, &bytes)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| GilError::Data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        let row: ResultRow = rec.map_err(|e| GilError::Parse { line: i + 2, message: e.to_string() })?;
        row.check()?;
        rows.push(row);
    }
    Ok(rows)
}
