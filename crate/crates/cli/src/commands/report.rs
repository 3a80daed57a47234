use gil_core::evaluation::aggregate_runs;
use gil_core::io::{merge_rows, read_results, write_atomic, ResultRow, TargetKind};
use gil_core::{GilError, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

type Cell = (String, TargetKind, String, usize);
/// Strategy → seed → cell values.
type Grouped = BTreeMap<String, BTreeMap<u64, BTreeMap<Cell, f64>>>;

fn column(c: &Cell) -> String {
    format!("{}:{}:{}@{}", c.0, c.1, c.2, c.3)
}

fn result_files(pattern: &str) -> Result<Vec<PathBuf>> {
    let paths = glob::glob(pattern).map_err(|e| GilError::Usage(format!("bad glob `{pattern}`: {e}")))?;
    let mut files = Vec::new();
    for p in paths {
        let p = p.map_err(|e| GilError::Data(e.to_string()))?;
        let f = if p.is_dir() { p.join("results.csv") } else { p };
        if f.is_file() {
            files.push(f);
        }
    }
    if files.is_empty() {
        return Err(GilError::Data(format!("no result files match `{pattern}`")));
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// Per strategy: seed → cell → value.
fn by_strategy(rows: &[ResultRow]) -> Result<Grouped> {
    let mut out: Grouped = BTreeMap::new();
    for r in rows {
        let cell = (r.metric.clone(), r.target_kind, r.target_id.clone(), r.model_stage);
        let seeds = out.entry(r.strategy.clone()).or_default();
        if seeds.entry(r.seed).or_default().insert(cell.clone(), r.value).is_some() {
            return Err(GilError::Report(format!(
                "{} seed {} has two values for {}",
                r.strategy,
                r.seed,
                column(&cell)
            )));
        }
    }
    Ok(out)
}

pub fn run(pattern: &str, out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for f in result_files(pattern)? {
        rows = merge_rows(rows, read_results(&f)?);
    }
    let grouped = by_strategy(&rows)?;
    let columns: BTreeSet<Cell> = grouped.values().flat_map(|s| s.values()).flat_map(|c| c.keys().cloned()).collect();

    let mut text = String::from("strategy,statistic,n_seeds");
    for c in &columns {
        let _ = write!(text, ",{}", column(c));
    }
    text.push('\n');
    for (strategy, seeds) in &grouped {
        let per_seed: Vec<(u64, BTreeMap<Cell, f64>)> = seeds.iter().map(|(s, c)| (*s, c.clone())).collect();
        let agg = aggregate_runs(&per_seed).map_err(|e| GilError::Report(format!("{strategy}: {e}")))?;
        for (name, values) in [("mean", &agg.mean), ("median", &agg.median)] {
            let _ = write!(text, "{strategy},{name},{}", seeds.len());
            for c in &columns {
                match values.get(c) {
                    Some(v) => write!(text, ",{v}"),
                    None => write!(text, ","),
                }
                .expect("writing to a string");
            }
            text.push('\n');
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_atomic(out, text.as_bytes())
}
