//! Gene-wise regression, linear probes, forgetting deltas and seed aggregation.

mod delta;
mod probe;
mod regression;

pub use delta::{aggregate_runs, compute_delta, median, Aggregate, ForgettingDelta, MetricKind, TargetHistory};
pub use probe::{
    downstream_features, fit_and_score, split_train_test, train_linear_probe, LinearClassifier, ProbeConfig,
    ProbeOutcome,
};
pub use regression::{
    check_disjoint, eval_gene_regression, eval_mask_groups, regression_report, Aggregation, EvalMasking, EvalSet,
    RegressionConfig, RegressionReport,
};
