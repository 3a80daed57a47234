use crate::error::{GilError, Result};
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    /// Lower is better; Δ = final − learning.
    Loss,
    /// Higher is better; Δ = learning − final.
    Accuracy,
}

/// Per-target forgetting and its average over targets.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ForgettingDelta {
    pub per_target: BTreeMap<String, f64>,
    pub average: Option<f64>,
}

/// Metric history of one target: the stage it was learned in and its value per model stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetHistory {
    pub learned_at: usize,
    pub by_stage: BTreeMap<usize, f64>,
}

/// Δ between each target's learning stage and `final_stage`.
///
/// Targets learned at the final stage are skipped.
pub fn compute_delta(
    targets: &BTreeMap<String, TargetHistory>,
    final_stage: usize,
    kind: MetricKind,
) -> Result<ForgettingDelta> {
    let mut per_target = BTreeMap::new();
    for (name, h) in targets {
        if h.learned_at >= final_stage {
            continue;
        }
        let at = |s: usize| {
            h.by_stage.get(&s).copied().ok_or_else(|| GilError::Report(format!("`{name}` has no value at stage {s}")))
        };
        let (learn, fin) = (at(h.learned_at)?, at(final_stage)?);
        let d = match kind {
            MetricKind::Loss => fin - learn,
            MetricKind::Accuracy => learn - fin,
        };
        per_target.insert(name.clone(), d);
    }
    let average = (!per_target.is_empty()).then(|| per_target.values().sum::<f64>() / per_target.len() as f64);
    Ok(ForgettingDelta { per_target, average })
}

/// Mean, median and per-seed values of every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate<K: Ord> {
    pub mean: BTreeMap<K, f64>,
    pub median: BTreeMap<K, f64>,
    pub per_seed: BTreeMap<u64, BTreeMap<K, f64>>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cell-wise aggregation across seeds. Every report must have the same keys.
pub fn aggregate_runs<K: Ord + Clone>(reports: &[(u64, BTreeMap<K, f64>)]) -> Result<Aggregate<K>> {
    let Some((_, first)) = reports.first() else {
        return Err(GilError::Report("no runs to aggregate".into()));
    };
    let mut per_seed = BTreeMap::new();
    for (seed, r) in reports {
        if !r.keys().eq(first.keys()) {
            return Err(GilError::Report(format!("seed {seed} report has a different shape")));
        }
        if per_seed.insert(*seed, r.clone()).is_some() {
            return Err(GilError::Report(format!("seed {seed} given twice")));
        }
    }
    let mut mean = BTreeMap::new();
    let mut med = BTreeMap::new();
    for key in first.keys() {
        // Fixed seed order keeps the sums independent of input order.
        let cells: Vec<f64> = per_seed.values().map(|r| r[key]).collect();
        mean.insert(key.clone(), cells.iter().sum::<f64>() / cells.len() as f64);
        med.insert(key.clone(), median(&cells));
    }
    Ok(Aggregate { mean, median: med, per_seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(learned_at: usize, pairs: &[(usize, f64)]) -> TargetHistory {
        TargetHistory { learned_at, by_stage: pairs.iter().copied().collect() }
    }

    #[test]
    fn delta_conventions() {
        let t = BTreeMap::from([("g1".to_string(), hist(1, &[(1, 0.5), (2, 0.7)]))]);
        let d = compute_delta(&t, 2, MetricKind::Loss).unwrap();
        assert!((d.per_target["g1"] - 0.2).abs() < 1e-12);

        let t = BTreeMap::from([("g1".to_string(), hist(1, &[(1, 0.3), (2, 0.3)]))]);
        assert_eq!(compute_delta(&t, 2, MetricKind::Loss).unwrap().average, Some(0.0));

        let t = BTreeMap::from([("d1".to_string(), hist(1, &[(1, 0.80), (3, 0.75)]))]);
        let d = compute_delta(&t, 3, MetricKind::Accuracy).unwrap();
        assert!((d.per_target["d1"] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn last_stage_targets_and_missing_entries() {
        let t = BTreeMap::from([("a".to_string(), hist(2, &[(2, 0.1)])), ("b".to_string(), hist(1, &[(1, 0.1)]))]);
        assert!(matches!(compute_delta(&t, 2, MetricKind::Loss), Err(GilError::Report(_))));
        let only_last = BTreeMap::from([("a".to_string(), hist(2, &[(2, 0.1)]))]);
        let d = compute_delta(&only_last, 2, MetricKind::Loss).unwrap();
        assert!(d.per_target.is_empty() && d.average.is_none());
    }

    #[test]
    fn aggregation() {
        let r = |v: f64| BTreeMap::from([("x", v)]);
        let agg = aggregate_runs(&[(1, r(0.2)), (2, r(0.4)), (3, r(0.6))]).unwrap();
        assert!((agg.mean["x"] - 0.4).abs() < 1e-12);
        assert_eq!(agg.median["x"], 0.4);
        let swapped = aggregate_runs(&[(3, r(0.6)), (1, r(0.2)), (2, r(0.4))]).unwrap();
        assert_eq!(agg, swapped);
        let one = aggregate_runs(&[(9, r(0.7))]).unwrap();
        assert_eq!(one.mean["x"], 0.7);
        let bad = aggregate_runs(&[(1, r(0.1)), (2, BTreeMap::from([("y", 0.1)]))]);
        assert!(matches!(bad, Err(GilError::Report(_))));
    }
}
