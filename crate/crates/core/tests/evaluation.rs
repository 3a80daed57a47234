mod common;

use common::{fixture, VOCAB};
use gil_core::datagen::{generate_all, DownstreamSpec, GenConfig};
use gil_core::evaluation::*;
use gil_core::model::MaskSpec;
use gil_core::rng;
use gil_core::strategies::{fresh_init, run_gil};
use gil_core::{ExpressionSample, StrategyConfig};
use rand::seq::SliceRandom;
use std::collections::BTreeSet;

#[test]
fn cover_masking_hides_every_position_once() {
    let spec = MaskSpec::default();
    for n in [1, 2, 7, 40] {
        let mut r = rng::stream(3, "test", &[n as u64]);
        let groups = eval_mask_groups(n, &spec, EvalMasking::Cover, &mut r).unwrap();
        let mut all: Vec<usize> = groups.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
        assert!(groups.iter().all(|g| !g.is_empty() && g.len() <= spec.count_for(n)));
    }
}

#[test]
fn eval_inputs_depend_only_on_the_eval_seed() {
    let f = fixture(2, 0);
    let cfg = RegressionConfig::default();
    let build = |c: &RegressionConfig| EvalSet::build(&f.plan, &f.corpus, 1, f.model.max_len, VOCAB, c).unwrap();
    let (a, b) = (build(&cfg), build(&cfg));
    let key = |s: &EvalSet| -> Vec<(Vec<usize>, Vec<u64>, Vec<bool>)> {
        s.packed
            .iter()
            .map(|p| (p.genes.clone(), p.input_values.iter().map(|v| v.to_bits()).collect(), p.masked.clone()))
            .collect()
    };
    assert_eq!(key(&a), key(&b));
    assert_eq!(a.qualifying, b.qualifying);
    assert_ne!(key(&a), key(&build(&RegressionConfig { eval_seed: 9, ..cfg.clone() })));

    // The same set scores two different checkpoints.
    let (p0, p1) = (fresh_init(&f.model, 0).unwrap(), fresh_init(&f.model, 1).unwrap());
    let set = build(&cfg);
    assert_eq!(
        set.loss(&p0, Aggregation::Pooled).unwrap(),
        eval_gene_regression(&p0, &f.plan, &f.corpus, 1, &cfg).unwrap()
    );
    assert_ne!(set.loss(&p0, Aggregation::Pooled).unwrap(), set.loss(&p1, Aggregation::Pooled).unwrap());
}

#[test]
fn held_out_samples_are_never_trained_on() {
    let f = fixture(3, 4);
    for (k, view) in f.views.iter().enumerate() {
        let (train, held) = f.plan.split_holdout(k + 1, 0.2).unwrap();
        let held: BTreeSet<u64> = held.into_iter().collect();
        let train: BTreeSet<u64> = train.into_iter().collect();
        assert!(view.samples.iter().all(|s| !held.contains(&s.id) && train.contains(&s.id)));
        assert!(!held.is_empty());
    }
    assert!(check_disjoint(&[1, 2, 3], &[4, 5]).is_ok());
    assert!(matches!(check_disjoint(&[1, 2, 3], &[3]), Err(gil_core::GilError::Eval(_))));
}

#[test]
fn three_stage_report_is_triangular() {
    let f = fixture(3, 1);
    let mem = f.plan.membership(VOCAB).unwrap();
    let ckpts = run_gil(&f.views, &mem, &f.model, &StrategyConfig::baseline(), &f.train, None, |_, _| Ok(())).unwrap();
    let refs: Vec<(usize, &gil_core::ModelParams)> = ckpts.iter().map(|c| (c.stage, &c.params)).collect();
    let report = regression_report(&refs, &f.plan, &f.corpus, &RegressionConfig::default(), 1, "baseline").unwrap();
    let cells: Vec<(usize, usize)> = report.entries.keys().copied().collect();
    assert_eq!(cells, vec![(1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)]);
    assert_eq!(
        report.get(3, 2).unwrap(),
        eval_gene_regression(&ckpts[2].params, &f.plan, &f.corpus, 2, &RegressionConfig::default()).unwrap()
    );
}

fn labelled() -> (Vec<ExpressionSample>, usize) {
    let spec = DownstreamSpec { name: "d".into(), n_samples: 600, n_classes: 4, n_crucial: 6, shift: 6.0 };
    let cfg = GenConfig { downstream: vec![spec], ..common::gen_config() };
    (generate_all(&cfg).unwrap().downstream.remove(0).samples, 4)
}

#[test]
fn probe_leaves_the_backbone_untouched() {
    let f = fixture(2, 0);
    let params = fresh_init(&f.model, 2).unwrap();
    let before = params.clone();
    let (samples, c) = labelled();
    let out = train_linear_probe(&params, &samples, c, &[true; VOCAB], &ProbeConfig::default()).unwrap();
    assert_eq!(params, before);
    assert_eq!(out.n_train + out.n_test, samples.len());
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let f = fixture(2, 0);
    let params = fresh_init(&f.model, 2).unwrap();
    let (mut samples, c) = labelled();
    let mut labels: Vec<Option<usize>> = samples.iter().map(|s| s.label).collect();
    labels.shuffle(&mut rng::stream(5, "test", &[]));
    samples.iter_mut().zip(labels).for_each(|(s, l)| s.label = l);
    let out = train_linear_probe(&params, &samples, c, &[true; VOCAB], &ProbeConfig::default()).unwrap();
    let p = 1.0 / c as f64;
    let sigma = (p * (1.0 - p) / out.n_test as f64).sqrt();
    assert!((out.accuracy - p).abs() <= 3.0 * sigma, "accuracy {} vs chance {p}", out.accuracy);
}
