use super::config::ModelConfig;
use crate::error::{GilError, Result};
use crate::numerics::{Tape, Tensor, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const INIT_STD: f64 = 0.02;
const PER_LAYER: usize = 16;

/// Position of each tensor inside a layer block.
pub(crate) mod slot {
    pub const LN1_GAIN: usize = 0;
    pub const LN1_BIAS: usize = 1;
    pub const WQ: usize = 2;
    pub const BQ: usize = 3;
    pub const WK: usize = 4;
    pub const BK: usize = 5;
    pub const WV: usize = 6;
    pub const BV: usize = 7;
    pub const WO: usize = 8;
    pub const BO: usize = 9;
    pub const LN2_GAIN: usize = 10;
    pub const LN2_BIAS: usize = 11;
    pub const W1: usize = 12;
    pub const B1: usize = 13;
    pub const W2: usize = 14;
    pub const B2: usize = 15;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Normal,
    Ones,
    Zeros,
}

/// Tensor names, shapes and initialisers in storage order.
fn layout(c: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let (d, f) = (c.d_model, c.d_ff);
    let mut out = vec![
        ("embedding".to_string(), vec![c.vocab_size, d], Init::Normal),
        ("value_encoder".to_string(), vec![1, d], Init::Normal),
    ];
    for l in 0..c.n_layers {
        let p = |s: &str| format!("layers.{l}.{s}");
        out.extend([
            (p("ln1.gain"), vec![d], Init::Ones),
            (p("ln1.bias"), vec![d], Init::Zeros),
            (p("attn.wq"), vec![d, d], Init::Normal),
            (p("attn.bq"), vec![d], Init::Zeros),
            (p("attn.wk"), vec![d, d], Init::Normal),
            (p("attn.bk"), vec![d], Init::Zeros),
            (p("attn.wv"), vec![d, d], Init::Normal),
            (p("attn.bv"), vec![d], Init::Zeros),
            (p("attn.wo"), vec![d, d], Init::Normal),
            (p("attn.bo"), vec![d], Init::Zeros),
            (p("ln2.gain"), vec![d], Init::Ones),
            (p("ln2.bias"), vec![d], Init::Zeros),
            (p("ff.w1"), vec![d, f], Init::Normal),
            (p("ff.b1"), vec![f], Init::Zeros),
            (p("ff.w2"), vec![f, d], Init::Normal),
            (p("ff.b2"), vec![d], Init::Zeros),
        ]);
    }
    out.extend([
        ("final_ln.gain".to_string(), vec![d], Init::Ones),
        ("final_ln.bias".to_string(), vec![d], Init::Zeros),
        ("value_head".to_string(), vec![d, 1], Init::Normal),
    ]);
    out
}

/// All trainable tensors of the model, in a fixed order.
///
/// `embedding` is the gene table, `value_encoder` the bias-free `1×d` value
/// projection, `value_head` the bias-free `d×1` output projection. Everything
/// in between is the pre-norm encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn init<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, init) in layout(&config) {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Normal => (0..n).map(|_| normal.sample(rng)).collect(),
                Init::Ones => vec![1.0; n],
                Init::Zeros => vec![0.0; n],
            };
            names.push(name);
            tensors.push(Tensor::from_parts(shape, data));
        }
        Ok(Self { config, names, tensors })
    }

    /// Rebuild from named tensors; every expected name must be present with its shape.
    pub fn from_named(config: ModelConfig, mut named: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, _) in layout(&config) {
            let pos = named
                .iter()
                .position(|(n, _)| *n == name)
                .ok_or_else(|| GilError::Checkpoint(format!("missing tensor `{name}`")))?;
            let (_, t) = named.swap_remove(pos);
            if t.shape() != shape.as_slice() {
                return Err(GilError::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(GilError::Checkpoint(format!("tensor `{name}` is not finite")));
            }
            names.push(name);
            tensors.push(t);
        }
        if let Some((extra, _)) = named.first() {
            return Err(GilError::Checkpoint(format!("unexpected tensor `{extra}`")));
        }
        Ok(Self { config, names, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.tensors[i])
    }

    pub fn embedding(&self) -> &Tensor {
        &self.tensors[0]
    }

    pub fn value_encoder(&self) -> &Tensor {
        &self.tensors[1]
    }

    pub fn value_head(&self) -> &Tensor {
        &self.tensors[self.tensors.len() - 1]
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn round_to_f32(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::round_to_f32);
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Places every tensor on `tape` as a leaf.
    pub fn on_tape(&self, tape: &mut Tape, requires_grad: bool) -> ParamVars {
        let vars = self.tensors.iter().map(|t| tape.leaf(t.clone(), requires_grad)).collect();
        ParamVars { vars, n_layers: self.config.n_layers }
    }
}

/// Tape handles for a [`ModelParams`], same order as storage.
#[derive(Debug, Clone)]
pub struct ParamVars {
    vars: Vec<Var>,
    n_layers: usize,
}

impl ParamVars {
    pub(crate) fn from_vars(vars: Vec<Var>, n_layers: usize) -> Self {
        Self { vars, n_layers }
    }

    pub fn all(&self) -> &[Var] {
        &self.vars
    }

    pub fn embedding(&self) -> Var {
        self.vars[0]
    }

    pub fn value_encoder(&self) -> Var {
        self.vars[1]
    }

    pub(crate) fn layer(&self, l: usize, s: usize) -> Var {
        self.vars[2 + l * PER_LAYER + s]
    }

    pub fn final_gain(&self) -> Var {
        self.vars[2 + self.n_layers * PER_LAYER]
    }

    pub fn final_bias(&self) -> Var {
        self.vars[3 + self.n_layers * PER_LAYER]
    }

    pub fn value_head(&self) -> Var {
        self.vars[4 + self.n_layers * PER_LAYER]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn init_is_seed_deterministic() {
        let c = ModelConfig::desk(50);
        let a = ModelParams::init(c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = ModelParams::init(c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let other = ModelParams::init(c, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn layer_norm_gains_start_at_one_and_biases_at_zero() {
        let p = ModelParams::init(ModelConfig::desk(20), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for (name, t) in p.named() {
            if name.ends_with("gain") {
                assert!(t.data().iter().all(|&v| v == 1.0), "{name}");
            }
            if name.ends_with("bias") || name.contains(".b") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            }
        }
    }

    #[test]
    fn embedding_std_near_init_std() {
        // V·d = 2000·64 ≥ 1e4
        let p = ModelParams::init(ModelConfig::desk(2000), &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let e = p.embedding().data();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let std = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / e.len() as f64).sqrt();
        assert!((std - INIT_STD).abs() < 0.1 * INIT_STD, "std {std}");
    }

    #[test]
    fn named_roundtrip_and_validation() {
        let c = ModelConfig { vocab_size: 5, d_model: 4, n_layers: 1, n_heads: 2, d_ff: 8, max_len: 16 };
        let p = ModelParams::init(c, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let named: Vec<_> = p.named().map(|(n, t)| (n.to_string(), t.clone())).collect();
        assert_eq!(ModelParams::from_named(c, named.clone()).unwrap(), p);
        let mut missing = named.clone();
        missing.pop();
        assert!(ModelParams::from_named(c, missing).is_err());
        let mut wrong = named;
        wrong[0].1 = Tensor::zeros(vec![4, 4]);
        assert!(ModelParams::from_named(c, wrong).is_err());
    }
}
