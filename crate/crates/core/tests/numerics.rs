use gil_core::numerics::*;
use gil_core::GilError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    t(shape, &(0..n).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>())
}

fn eval(f: impl FnOnce(&mut Tape) -> Var) -> Tensor {
    let mut tape = Tape::new();
    let v = f(&mut tape);
    tape.value(v).clone()
}

#[test]
fn matmul_small_cases() {
    let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
    let id = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
    let out = eval(|tp| {
        let (x, y) = (tp.constant(a.clone()), tp.constant(id));
        tp.matmul(x, y).unwrap()
    });
    assert_eq!(out, a);
    let out = eval(|tp| {
        let (x, y) = (tp.constant(t(&[1, 2], &[1.0, 2.0])), tp.constant(t(&[2, 1], &[3.0, 4.0])));
        tp.matmul(x, y).unwrap()
    });
    assert_eq!(out.item(), 11.0);
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, b) = (random(&[5, 7], &mut rng), random(&[7, 3], &mut rng));
    let out = eval(|tp| {
        let (x, y) = (tp.constant(a.clone()), tp.constant(b.clone()));
        tp.matmul(x, y).unwrap()
    });
    for i in 0..5 {
        for j in 0..3 {
            let naive: f64 = (0..7).map(|k| a.get(i, k) * b.get(k, j)).sum();
            assert!((out.get(i, j) - naive).abs() < 1e-12);
        }
    }
}

#[test]
fn matmul_dimension_mismatch_is_shape_error() {
    let mut tp = Tape::new();
    let (x, y) = (tp.constant(Tensor::zeros(vec![2, 3])), tp.constant(Tensor::zeros(vec![2, 3])));
    assert!(matches!(tp.matmul(x, y), Err(GilError::Shape(_))));
}

#[test]
fn softmax_examples() {
    let c = 3.7;
    let x = t(&[3, 2], &[0.0, 0.0, c, c + 2f64.ln(), 1000.0, 0.0]);
    let out = eval(|tp| {
        let v = tp.constant(x);
        tp.softmax_rows(v).unwrap()
    });
    assert!((out.get(0, 0) - 0.5).abs() < 1e-15);
    assert!((out.get(1, 0) - 1.0 / 3.0).abs() < 1e-12);
    assert!((out.get(1, 1) - 2.0 / 3.0).abs() < 1e-12);
    // exp(-1000) underflows to zero in any precision we have.
    assert_eq!(out.get(2, 0), 1.0);
    assert_eq!(out.get(2, 1), 0.0);
    let three = eval(|tp| {
        let v = tp.constant(Tensor::zeros(vec![1, 3]));
        tp.softmax_rows(v).unwrap()
    });
    assert!(three.data().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
}

#[test]
fn layer_norm_examples() {
    let run = |x: Tensor, g: Tensor, b: Tensor| {
        eval(|tp| {
            let (x, g, b) = (tp.constant(x), tp.constant(g), tp.constant(b));
            tp.layer_norm(x, g, b).unwrap()
        })
    };
    let out = run(t(&[1, 3], &[2.0, 2.0, 2.0]), Tensor::filled(vec![3], 1.0), Tensor::zeros(vec![3]));
    assert!(out.data().iter().all(|&v| v == 0.0));
    let out = run(t(&[1, 2], &[1.0, -1.0]), Tensor::filled(vec![2], 1.0), Tensor::zeros(vec![2]));
    let expect = 1.0 / (1.0 + LAYER_NORM_EPS).sqrt();
    assert!((out.data()[0] - expect).abs() < 1e-15 && (out.data()[1] + expect).abs() < 1e-15);
    let b = t(&[3], &[0.5, -1.0, 2.0]);
    let out = run(t(&[1, 3], &[4.0, -3.0, 0.1]), Tensor::zeros(vec![3]), b.clone());
    assert_eq!(out.data(), b.data());
}

#[test]
fn gather_rows_copies_and_accumulates() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let table = random(&[6, 3], &mut rng);
    let idx = [5, 0, 0, 3];
    let mut tp = Tape::new();
    let tv = tp.leaf(table.clone(), true);
    let g = tp.gather_rows(tv, &idx).unwrap();
    for (i, &r) in idx.iter().enumerate() {
        assert_eq!(tp.value(g).row(i), table.row(r));
    }
    let loss = tp.sum(g).unwrap();
    let grads = tp.backward(loss).unwrap();
    let gt = grads.get(tv);
    assert_eq!(gt.row(0), &[2.0, 2.0, 2.0]);
    assert_eq!(gt.row(1), &[0.0, 0.0, 0.0]);
    assert_eq!(gt.row(5), &[1.0, 1.0, 1.0]);

    let empty = tp.gather_rows(tv, &[]).unwrap();
    assert_eq!(tp.value(empty).shape(), &[0, 3]);
    assert!(matches!(tp.gather_rows(tv, &[6]), Err(GilError::Vocabulary { index: 6, size: 6 })));
}

#[test]
fn backward_examples() {
    let mut tp = Tape::new();
    let x = tp.leaf(t(&[2], &[1.0, 2.0]), true);
    let unused = tp.leaf(t(&[2], &[9.0, 9.0]), true);
    let sq = tp.mul(x, x).unwrap();
    let loss = tp.sum(sq).unwrap();
    let grads = tp.backward(loss).unwrap();
    assert_eq!(grads.get(x).data(), &[2.0, 4.0]);
    assert_eq!(grads.get(unused).data(), &[0.0, 0.0]);

    let mut tp = Tape::new();
    let x = tp.leaf(t(&[3], &[0.1, -4.0, 7.0]), true);
    let loss = tp.sum(x).unwrap();
    assert_eq!(tp.backward(loss).unwrap().get(x).data(), &[1.0, 1.0, 1.0]);
    assert!(matches!(tp.backward(x), Err(GilError::Usage(_))));
}

#[test]
fn every_primitive_matches_finite_differences_over_ten_seeds() {
    for seed in 0..10 {
        for (name, err) in primitive_gradchecks(seed).unwrap() {
            assert!(err < 1e-4, "seed {seed} {name}: {err}");
        }
    }
}

#[test]
fn tape_is_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (random(&[4, 6], &mut rng), random(&[6, 2], &mut rng));
        let mut tp = Tape::new();
        let (x, y) = (tp.leaf(a, true), tp.leaf(b, true));
        let m = tp.matmul(x, y).unwrap();
        let s = tp.softmax_rows(m).unwrap();
        let g = tp.gelu(s).unwrap();
        let l = tp.sum(g).unwrap();
        let grads = tp.backward(l).unwrap();
        (tp.value(l).item().to_bits(), grads.get(x), grads.get(y))
    };
    assert_eq!(run(), run());
}

#[test]
fn adam_examples() {
    let cfg = AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 };
    let mut p = vec![t(&[1], &[0.0])];
    let mut st = AdamState::new(&p, cfg);
    st.step(&mut p, &[t(&[1], &[1.0])], 0.1).unwrap();
    assert!((p[0].item() + 0.1).abs() < 1e-6);
    assert_eq!(st.step_count(), 1);

    // Two steps with constant gradient g, unrolled by hand.
    let g = 0.3;
    let mut p = vec![t(&[1], &[1.0])];
    let mut st = AdamState::new(&p, cfg);
    st.step(&mut p, &[t(&[1], &[g])], 0.01).unwrap();
    st.step(&mut p, &[t(&[1], &[g])], 0.02).unwrap();
    let mut expect = 1.0;
    let (mut m, mut v) = (0.0, 0.0);
    for (step, lr) in [(1, 0.01), (2, 0.02)] {
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        let mh = m / (1.0 - 0.9f64.powi(step));
        let vh = v / (1.0 - 0.999f64.powi(step));
        expect -= lr * mh / (vh.sqrt() + 1e-8);
    }
    assert!((p[0].item() - expect).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let orig = vec![random(&[3, 2], &mut rng)];
    let mut p = orig.clone();
    let mut st = AdamState::new(&p, cfg);
    for _ in 0..3 {
        st.step(&mut p, &[Tensor::zeros(vec![3, 2])], 0.5).unwrap();
    }
    assert_eq!(p, orig);
}

#[test]
fn warmup_schedule_examples() {
    let s = LrSchedule { base_lr: 0.0005, warmup_steps: 5000 };
    assert_eq!(s.lr_at(0), 0.0);
    assert_eq!(s.lr_at(2500), 0.00025);
    assert_eq!(s.lr_at(5000), 0.0005);
    assert_eq!(s.lr_at(90_000), 0.0005);
    assert!((1..5000).all(|k| s.lr_at(k) >= s.lr_at(k - 1)));
}

#[test]
fn finite_difference_examples() {
    let x = t(&[3], &[0.2, -1.0, 3.0]);
    let g = finite_diff_grad(|v| Ok(v.data().iter().sum()), &x, 1e-5).unwrap();
    assert!(g.data().iter().all(|v| (v - 1.0).abs() < 1e-9));
}
