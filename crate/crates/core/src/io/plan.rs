use super::files::write_atomic;
use crate::error::{GilError, Result};
use crate::gil::StagePlan;
use std::fs;
use std::path::Path;

pub fn save_plan(path: &Path, plan: &StagePlan) -> Result<()> {
    plan.validate(None)?;
    let mut text = serde_json::to_string_pretty(plan)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Parses and re-checks every plan invariant.
pub fn load_plan(path: &Path) -> Result<StagePlan> {
    let plan: StagePlan = serde_json::from_str(&fs::read_to_string(path)?)
        .map_err(|e| GilError::Plan(format!("{}: {e}", path.display())))?;
    plan.validate(None)?;
    Ok(plan)
}
