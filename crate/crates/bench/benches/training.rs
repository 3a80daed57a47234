use criterion::{criterion_group, criterion_main, Criterion};
use gil_bench::{corpus, desk_model, view};
use gil_core::model::{forward, masked_loss, MaskSpec, PackedBatch};
use gil_core::rng;
use gil_core::strategies::{fresh_init, train_stage_baseline, TrainLog};
use gil_core::{ExpressionSample, Tape, TrainConfig};
use std::hint::black_box;

fn loss_and_gradients(c: &mut Criterion) {
    let config = desk_model();
    let params = fresh_init(&config, 0).unwrap();
    let stage = view(corpus(config.vocab_size, 32), config.max_len);
    let refs: Vec<&ExpressionSample> = stage.samples.iter().collect();
    let packed =
        PackedBatch::from_samples_masked(&refs, &MaskSpec::default(), |s| rng::stream(0, "bench", &[s.id])).unwrap();
    c.bench_function(&format!("desk loss+backward, 32 samples, {} tokens", packed.n_tokens()), |bench| {
        bench.iter(|| {
            let mut tape = Tape::new();
            let pv = params.on_tape(&mut tape, true);
            let fwd = forward(&mut tape, &config, &pv, &packed).unwrap();
            let loss = masked_loss(&mut tape, &fwd, &packed, refs.len()).unwrap();
            black_box(tape.backward(loss).unwrap());
        })
    });
}

fn one_epoch(c: &mut Criterion) {
    let config = desk_model();
    let stage = view(corpus(config.vocab_size, 256), config.max_len);
    let cfg = TrainConfig { epochs_per_stage: 1, ..TrainConfig::default() };
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("desk epoch, 256 samples", |bench| {
        bench.iter(|| {
            let init = fresh_init(&config, 0).unwrap();
            black_box(train_stage_baseline(&stage, init, &cfg, &mut TrainLog::default()).unwrap());
        })
    });
    group.finish();
}

criterion_group!(benches, loss_and_gradients, one_epoch);
criterion_main!(benches);
