use super::tape::{Segment, Tape, Var};
use super::tensor::Tensor;
use crate::error::{GilError, Result};
use crate::rng::{self, site};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Central-difference gradient of a scalar function at `x`.
pub fn finite_diff_grad<F>(mut f: F, x: &Tensor, h: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(GilError::Usage(format!("finite difference step must be positive, got {h}")));
    }
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    Tensor::new(x.shape().to_vec(), grad)
}

/// Largest relative error between two gradients, with an absolute floor so
/// that near-zero entries do not dominate.
pub fn max_relative_error(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central-difference step, and the gradient magnitude below which errors are
/// measured absolutely (exactly-zero gradients such as the attention key bias
/// otherwise turn roundoff into large relative errors).
pub const GRADCHECK_STEP: f64 = 3e-5;
pub const GRADCHECK_FLOOR: f64 = 1e-5;

/// Compares tape gradients of the scalar built by `build` against central
/// differences for every entry of every input; returns the largest relative error.
pub fn check_gradients<F>(inputs: &[Tensor], build: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = build(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;
    let mut worst: f64 = 0.0;
    for (i, x) in inputs.iter().enumerate() {
        let numeric = finite_diff_grad(
            |probe| {
                let mut t = Tape::new();
                let vs: Vec<Var> = inputs
                    .iter()
                    .enumerate()
                    .map(|(j, v)| t.constant(if j == i { probe.clone() } else { v.clone() }))
                    .collect();
                let out = build(&mut t, &vs)?;
                Ok(t.value(out).item())
            },
            x,
            GRADCHECK_STEP,
        )?;
        worst = worst.max(max_relative_error(&grads.get(vars[i]), &numeric, GRADCHECK_FLOOR));
    }
    Ok(worst)
}

fn normal_tensor<R: Rng>(shape: Vec<usize>, scale: f64, rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    Tensor::new(shape, data).expect("length matches shape")
}

/// `Σ r ⊙ out` with fixed random `r`, so every output entry gets its own weight.
fn project(tape: &mut Tape, out: Var, r: &Tensor) -> Result<Var> {
    let w = tape.constant(r.clone());
    let p = tape.mul(out, w)?;
    tape.sum(p)
}

/// Gradient check of every tape primitive on random inputs drawn from `seed`.
/// Returns `(primitive, max relative error)` pairs.
pub fn primitive_gradchecks(seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = rng::stream(seed, site::GRADCHECK, &[]);
    let mut out = Vec::new();
    let mut n = |shape: &[usize], scale: f64| normal_tensor(shape.to_vec(), scale, &mut rng);

    let (a, b, r) = (n(&[3, 4], 1.0), n(&[4, 5], 1.0), n(&[3, 5], 1.0));
    out.push((
        "matmul",
        check_gradients(&[a, b], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            project(t, y, &r)
        })?,
    ));

    let (a, b, r) = (n(&[3, 4], 1.0), n(&[3, 4], 1.0), n(&[3, 4], 1.0));
    out.push((
        "add",
        check_gradients(&[a.clone(), b.clone()], |t, v| {
            let y = t.add(v[0], v[1])?;
            project(t, y, &r)
        })?,
    ));
    out.push((
        "mul",
        check_gradients(&[a.clone(), b], |t, v| {
            let y = t.mul(v[0], v[1])?;
            project(t, y, &r)
        })?,
    ));
    out.push((
        "scale",
        check_gradients(std::slice::from_ref(&a), |t, v| {
            let y = t.scale(v[0], -1.7)?;
            project(t, y, &r)
        })?,
    ));
    out.push((
        "sum",
        check_gradients(std::slice::from_ref(&a), |t, v| {
            let y = t.mul(v[0], v[0])?;
            t.sum(y)
        })?,
    ));
    out.push((
        "gelu",
        check_gradients(std::slice::from_ref(&a), |t, v| {
            let y = t.gelu(v[0])?;
            project(t, y, &r)
        })?,
    ));
    out.push((
        "softmax_rows",
        check_gradients(std::slice::from_ref(&a), |t, v| {
            let y = t.softmax_rows(v[0])?;
            project(t, y, &r)
        })?,
    ));

    let bias = n(&[4], 1.0);
    out.push((
        "add_bias",
        check_gradients(&[a.clone(), bias], |t, v| {
            let y = t.add_bias(v[0], v[1])?;
            project(t, y, &r)
        })?,
    ));

    let (gain, beta) = (n(&[4], 1.0), n(&[4], 1.0));
    out.push((
        "layer_norm",
        check_gradients(&[a, gain, beta], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2])?;
            project(t, y, &r)
        })?,
    ));

    let (table, r) = (n(&[5, 3], 1.0), n(&[4, 3], 1.0));
    out.push((
        "gather_rows",
        check_gradients(&[table], |t, v| {
            let y = t.gather_rows(v[0], &[4, 0, 4, 2])?;
            project(t, y, &r)
        })?,
    ));

    let segments = [Segment { start: 0, len: 3 }, Segment { start: 3, len: 0 }, Segment { start: 3, len: 2 }];
    let (q, k, v, r) = (n(&[5, 4], 1.0), n(&[5, 4], 1.0), n(&[5, 4], 1.0), n(&[5, 4], 1.0));
    out.push((
        "segment_attention",
        check_gradients(&[q, k, v], |t, x| {
            let y = t.segment_attention(x[0], x[1], x[2], &segments, 2)?;
            project(t, y, &r)
        })?,
    ));

    let pred = n(&[6, 1], 1.0);
    let target: Vec<f64> = (0..6).map(|i| i as f64 * 0.3).collect();
    let weights = [0.5, 0.0, 1.0, 2.0, 0.0, 0.25];
    out.push(("weighted_sq_error", check_gradients(&[pred], |t, v| t.weighted_sq_error(v[0], &target, &weights))?));

    let logits = n(&[4, 3], 2.0);
    out.push(("cross_entropy", check_gradients(&[logits], |t, v| t.cross_entropy(v[0], &[0, 2, 1, 2]))?));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_gives_ones() {
        let x = Tensor::new(vec![4], vec![0.3, -2.0, 5.0, 1e3]).unwrap();
        let g = finite_diff_grad(|t| Ok(t.data().iter().sum()), &x, 1e-5).unwrap();
        for v in g.data() {
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn square_at_three() {
        let x = Tensor::new(vec![1], vec![3.0]).unwrap();
        let g = finite_diff_grad(|t| Ok(t.item() * t.item()), &x, 1e-4).unwrap();
        assert!((g.item() - 6.0).abs() < 1e-7);
    }

    #[test]
    fn every_primitive_passes_at_one_seed() {
        for (name, err) in primitive_gradchecks(0).unwrap() {
            assert!(err < 1e-4, "{name}: {err}");
        }
    }

    #[test]
    fn a_wrong_gradient_is_detected() {
        let x = Tensor::new(vec![2], vec![0.5, -1.0]).unwrap();
        // Detaching one factor halves the tape gradient of x².
        let err = check_gradients(std::slice::from_ref(&x), |t, v| {
            let c = t.constant(t.value(v[0]).clone());
            let y = t.mul(c, v[0])?;
            t.sum(y)
        });
        assert!(err.unwrap() > 0.4);
    }

    #[test]
    fn rejects_non_positive_step() {
        let x = Tensor::scalar(1.0);
        assert!(finite_diff_grad(|t| Ok(t.item()), &x, 0.0).is_err());
    }
}
