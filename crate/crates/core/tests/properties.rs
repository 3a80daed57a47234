use gil_core::datagen::{generate_all, DownstreamSpec, GenConfig};
use gil_core::evaluation::{median, RegressionReport};
use gil_core::gil::{build_plan, select_crucial_genes, stage_view, PlanConfig};
use gil_core::io::{parse_expression, write_expression};
use gil_core::numerics::{AdamConfig, AdamState};
use gil_core::rng;
use gil_core::{ExpressionSample, Tape, Tensor};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn sample_strategy(vocab: usize, max_genes: usize) -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop::collection::btree_set(0..vocab, 3..=max_genes).prop_flat_map(|genes| {
        let n = genes.len();
        (Just(genes.into_iter().collect::<Vec<_>>()), prop::collection::vec(0.01..10.0f64, n))
    })
}

fn samples_strategy(
    vocab: usize,
    max_genes: usize,
    n: std::ops::Range<usize>,
) -> impl Strategy<Value = Vec<ExpressionSample>> {
    prop::collection::vec(sample_strategy(vocab, max_genes), n).prop_map(|rows| {
        rows.into_iter().enumerate().map(|(i, (g, v))| ExpressionSample::new(i as u64, g, v, None).unwrap()).collect()
    })
}

fn dense_dataset(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    // Small integer-valued entries make ties common, and zeros drop genes.
    prop::collection::vec(prop::collection::vec((0u8..4).prop_map(f64::from), cols), rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(
        data in prop::collection::vec(-30.0..30.0f64, 12),
        c in -50.0..50.0f64,
    ) {
        let x = Tensor::new(vec![3, 4], data.clone()).unwrap();
        let shifted = Tensor::new(vec![3, 4], data.iter().map(|v| v + c).collect()).unwrap();
        let mut tape = Tape::new();
        let (a, b) = (tape.constant(x), tape.constant(shifted));
        let (sa, sb) = (tape.softmax_rows(a).unwrap(), tape.softmax_rows(b).unwrap());
        let (pa, pb) = (tape.value(sa).clone(), tape.value(sb).clone());
        for r in 0..3 {
            prop_assert!((pa.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for (u, v) in pa.data().iter().zip(pb.data()) {
            prop_assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_ignores_zero_gradients(data in prop::collection::vec(-5.0..5.0f64, 6), lr in 1e-5..1.0f64, steps in 1usize..5) {
        let orig = vec![Tensor::new(vec![2, 3], data).unwrap()];
        let mut p = orig.clone();
        let mut st = AdamState::new(&p, AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 });
        for _ in 0..steps {
            st.step(&mut p, &[Tensor::zeros(vec![2, 3])], lr).unwrap();
        }
        prop_assert_eq!(p, orig);
    }

    #[test]
    fn crucial_selection_matches_column_sums(rows in dense_dataset(50, 30), k in 1usize..12) {
        let samples: Vec<ExpressionSample> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let genes: Vec<usize> = (0..30).filter(|&g| r[g] > 0.0).collect();
                let values = genes.iter().map(|&g| r[g]).collect();
                ExpressionSample::new(i as u64, genes, values, None).unwrap()
            })
            .collect();
        let mut totals: Vec<(usize, f64)> = (0..30).map(|g| (g, rows.iter().map(|r| r[g]).sum())).collect();
        totals.retain(|t| t.1 > 0.0);
        totals.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        match select_crucial_genes(&samples, k) {
            Ok(got) => {
                let mut expect: Vec<usize> = totals[..k].iter().map(|t| t.0).collect();
                expect.sort_unstable();
                prop_assert_eq!(got, expect);
            }
            Err(_) => prop_assert!(totals.len() < k),
        }
    }

    #[test]
    fn plans_are_disjoint_and_cover_every_sample(
        n_stages in 1usize..5,
        base_fraction in 0.0..0.9f64,
        n_ids in 1usize..200,
        seed in any::<u64>(),
        d1 in samples_strategy(120, 15, 3..10),
        d2 in samples_strategy(120, 15, 3..10),
    ) {
        let vocab = 120;
        let ids: Vec<u64> = (0..n_ids as u64).map(|i| i * 7 + 3).collect();
        let downstream = vec![("d1".to_string(), d1.as_slice()), ("d2".to_string(), d2.as_slice())];
        let cfg = PlanConfig { n_stages, base_fraction, crucial_genes: 3, ..PlanConfig::default() };
        let plan = build_plan(&ids, vocab, &downstream, &cfg, seed).unwrap();
        plan.validate(Some(vocab)).unwrap();

        let base: BTreeSet<usize> = plan.base.iter().copied().collect();
        let mut seen_genes = BTreeSet::new();
        for s in &plan.stages {
            for g in &s.genes {
                prop_assert!(!base.contains(g));
                prop_assert!(seen_genes.insert(*g), "gene {} in two stages", g);
            }
        }
        let mut blocks: Vec<u64> = plan.stages.iter().flat_map(|s| s.sample_ids.clone()).collect();
        blocks.sort_unstable();
        prop_assert_eq!(blocks, ids);
        for (name, genes) in &plan.crucial {
            let k = plan.stage_of_dataset(name).unwrap();
            let stage: BTreeSet<usize> = plan.stages[k - 1].genes.iter().copied().collect();
            prop_assert!(genes.iter().all(|g| stage.contains(g)));
        }

        // View soundness for random corpus samples.
        let mem = plan.membership(vocab).unwrap();
        for (k, s) in (1..=n_stages).flat_map(|k| d1.iter().map(move |s| (k, s))) {
            let mut r = rng::stream(seed, "test", &[s.id, k as u64]);
            if let Some(view) = stage_view(s, &mem, k, 4, &mut r).unwrap() {
                prop_assert!(view.len() <= 4);
                let stage: BTreeSet<usize> = plan.stages[k - 1].genes.iter().copied().collect();
                prop_assert!(view.gene_indices.iter().all(|g| base.contains(g) || stage.contains(g)));
                prop_assert!(view.gene_indices.iter().all(|g| s.value_of(*g) == view.value_of(*g)));
            }
        }
    }

    #[test]
    fn expression_text_roundtrips(samples in samples_strategy(500, 20, 0..8), labels in prop::collection::vec(prop::option::of(0usize..5), 8)) {
        let samples: Vec<ExpressionSample> = samples
            .into_iter()
            .zip(labels)
            .map(|(s, label)| ExpressionSample { label, ..s })
            .collect();
        let text = write_expression(&samples).unwrap();
        prop_assert_eq!(parse_expression(&text).unwrap(), samples);
    }

    #[test]
    fn report_keeps_only_seen_gene_stages(model_stage in 0usize..6, gene_stage in 0usize..6, loss in 0.0..3.0f64) {
        let mut report = RegressionReport::default();
        let ok = report.insert(model_stage, gene_stage, loss).is_ok();
        prop_assert_eq!(ok, gene_stage >= 1 && gene_stage <= model_stage);
    }

    #[test]
    fn median_splits_the_sample(mut xs in prop::collection::vec(-100.0..100.0f64, 1..20)) {
        let m = median(&xs);
        let below = xs.iter().filter(|&&x| x < m).count();
        let above = xs.iter().filter(|&&x| x > m).count();
        prop_assert!(below <= xs.len() / 2 && above <= xs.len() / 2);
        xs.reverse();
        prop_assert_eq!(median(&xs), m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn generated_values_are_finite_non_negative_and_reproducible(seed in any::<u64>()) {
        let cfg = GenConfig {
            n_genes: 80,
            n_samples: 40,
            n_factors: 5,
            bias_mean: -1.0,
            downstream: vec![DownstreamSpec { name: "d".into(), n_samples: 12, n_classes: 3, n_crucial: 4, shift: 6.0 }],
            seed,
            ..GenConfig::default()
        };
        let a = generate_all(&cfg).unwrap();
        let all = a.corpus.iter().chain(&a.downstream[0].samples);
        for s in all {
            prop_assert!(s.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
        let b = generate_all(&cfg).unwrap();
        prop_assert_eq!(a.corpus, b.corpus);
        prop_assert_eq!(&a.downstream[0].samples, &b.downstream[0].samples);
    }
}
