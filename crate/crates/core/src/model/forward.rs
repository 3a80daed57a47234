//! The forward pass: embedding, pre-norm encoder and value head.

use super::batch::{Batch, PackedBatch};
use super::config::ModelConfig;
use super::params::{slot, ModelParams, ParamVars};
use crate::error::{GilError, Result};
use crate::numerics::{Segment, Tape, Tensor, Var};

/// Handles produced by one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    /// Encoder output e′, `T×d`.
    pub features: Var,
    /// Predicted values v̂, `T×1`.
    pub predictions: Var,
}

/// `E[gene] + ṽ · L1` for every packed token.
pub fn embed_var(tape: &mut Tape, pv: &ParamVars, genes: &[usize], input_values: &[f64]) -> Result<Var> {
    if genes.len() != input_values.len() {
        return Err(GilError::Shape(format!("{} genes, {} values", genes.len(), input_values.len())));
    }
    let gathered = tape.gather_rows(pv.embedding(), genes)?;
    let column = tape.constant(Tensor::from_parts(vec![genes.len(), 1], input_values.to_vec()));
    let scaled = tape.matmul(column, pv.value_encoder())?;
    tape.add(gathered, scaled)
}

/// Bidirectional encoder; tokens only attend within their own segment and no
/// positional signal is added.
pub fn encode_var(
    tape: &mut Tape,
    config: &ModelConfig,
    pv: &ParamVars,
    mut x: Var,
    segments: &[Segment],
) -> Result<Var> {
    for l in 0..config.n_layers {
        let p = |s| pv.layer(l, s);
        let h = tape.layer_norm(x, p(slot::LN1_GAIN), p(slot::LN1_BIAS))?;
        let q = linear(tape, h, p(slot::WQ), p(slot::BQ))?;
        let k = linear(tape, h, p(slot::WK), p(slot::BK))?;
        let v = linear(tape, h, p(slot::WV), p(slot::BV))?;
        let attended = tape.segment_attention(q, k, v, segments, config.n_heads)?;
        let projected = linear(tape, attended, p(slot::WO), p(slot::BO))?;
        x = tape.add(x, projected)?;

        let h = tape.layer_norm(x, p(slot::LN2_GAIN), p(slot::LN2_BIAS))?;
        let hidden = linear(tape, h, p(slot::W1), p(slot::B1))?;
        let hidden = tape.gelu(hidden)?;
        let out = linear(tape, hidden, p(slot::W2), p(slot::B2))?;
        x = tape.add(x, out)?;
    }
    tape.layer_norm(x, pv.final_gain(), pv.final_bias())
}

fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add_bias(y, b)
}

/// `e′ · L2`, no bias.
pub fn predict_var(tape: &mut Tape, pv: &ParamVars, features: Var) -> Result<Var> {
    tape.matmul(features, pv.value_head())
}

pub fn forward(tape: &mut Tape, config: &ModelConfig, pv: &ParamVars, packed: &PackedBatch) -> Result<Forward> {
    if let Some(&g) = packed.genes.iter().find(|&&g| g >= config.vocab_size) {
        return Err(GilError::Vocabulary { index: g, size: config.vocab_size });
    }
    if let Some(s) = packed.segments.iter().find(|s| s.len > config.max_len) {
        return Err(GilError::Data(format!("sample of {} tokens exceeds max_len {}", s.len, config.max_len)));
    }
    let e = embed_var(tape, pv, &packed.genes, &packed.input_values)?;
    let features = encode_var(tape, config, pv, e, &packed.segments)?;
    let predictions = predict_var(tape, pv, features)?;
    Ok(Forward { features, predictions })
}

/// Masked squared error summed per sample and averaged over `n_samples`.
pub fn masked_loss(tape: &mut Tape, fwd: &Forward, packed: &PackedBatch, n_samples: usize) -> Result<Var> {
    if n_samples == 0 {
        return Err(GilError::Usage("masked loss over an empty batch".into()));
    }
    let w = 1.0 / n_samples as f64;
    let weights: Vec<f64> = packed.masked.iter().map(|&m| if m { w } else { 0.0 }).collect();
    tape.weighted_sq_error(fwd.predictions, &packed.values, &weights)
}

fn unpack_rows(batch: &Batch, packed: &PackedBatch, rows: &Tensor) -> Tensor {
    let d = rows.cols();
    let mut out = vec![0.0; batch.batch_size * batch.seq_len * d];
    for (t, &pos) in packed.positions.iter().enumerate() {
        out[pos * d..(pos + 1) * d].copy_from_slice(rows.row(t));
    }
    Tensor::from_parts(vec![batch.batch_size, batch.seq_len, d], out)
}

/// Gene + value embedding of every position, `B×L×d` (zeros at padding).
pub fn embed(batch: &Batch, params: &ModelParams) -> Result<Tensor> {
    batch.validate(params.config().vocab_size, usize::MAX)?;
    let packed = batch.pack();
    let mut tape = Tape::new();
    let pv = params.on_tape(&mut tape, false);
    let e = embed_var(&mut tape, &pv, &packed.genes, &packed.input_values)?;
    Ok(unpack_rows(batch, &packed, tape.value(e)))
}

/// Runs the encoder over an embedded `B×L×d` tensor; padded positions are
/// excluded from attention and come back as zeros.
pub fn encode(e: &Tensor, params: &ModelParams, pad_mask: &[bool]) -> Result<Tensor> {
    let shape = e.shape();
    if shape.len() != 3 || shape[0] * shape[1] != pad_mask.len() || shape[2] != params.config().d_model {
        return Err(GilError::Shape(format!("encode: input {shape:?} with {} pad flags", pad_mask.len())));
    }
    let (b, l, d) = (shape[0], shape[1], shape[2]);
    let mut rows = Vec::new();
    let mut positions = Vec::new();
    let mut segments = Vec::new();
    for r in 0..b {
        let start = positions.len();
        for i in 0..l {
            let at = r * l + i;
            if !pad_mask[at] {
                rows.extend_from_slice(&e.data()[at * d..(at + 1) * d]);
                positions.push(at);
            }
        }
        segments.push(Segment { start, len: positions.len() - start });
    }
    let mut tape = Tape::new();
    let pv = params.on_tape(&mut tape, false);
    let x = tape.constant(Tensor::new(vec![positions.len(), d], rows)?);
    let out = encode_var(&mut tape, params.config(), &pv, x, &segments)?;
    let mut full = vec![0.0; b * l * d];
    for (t, &pos) in positions.iter().enumerate() {
        full[pos * d..(pos + 1) * d].copy_from_slice(tape.value(out).row(t));
    }
    Ok(Tensor::from_parts(vec![b, l, d], full))
}

/// `v̂[b,l] = e′[b,l] · L2` for an `B×L×d` feature tensor.
pub fn predict_values(features: &Tensor, params: &ModelParams) -> Result<Tensor> {
    let shape = features.shape();
    let d = params.config().d_model;
    if shape.len() != 3 || shape[2] != d {
        return Err(GilError::Shape(format!("predict_values: features {shape:?}")));
    }
    let head = params.value_head().data();
    let data = features.data().chunks(d).map(|row| row.iter().zip(head).map(|(a, b)| a * b).sum()).collect();
    Ok(Tensor::from_parts(vec![shape[0], shape[1]], data))
}

/// Masked value prediction loss of a (masked) batch.
pub fn loss_tran(batch: &Batch, params: &ModelParams) -> Result<f64> {
    batch.validate(params.config().vocab_size, params.config().max_len)?;
    let packed = batch.pack();
    let mut tape = Tape::new();
    let pv = params.on_tape(&mut tape, false);
    let fwd = forward(&mut tape, params.config(), &pv, &packed)?;
    let loss = masked_loss(&mut tape, &fwd, &packed, batch.batch_size)?;
    Ok(tape.value(loss).item())
}

/// Mean-pooled encoder features per sample, `B×d`, from unmasked input.
///
/// Empty rows pool to zeros.
pub fn extract_features(batch: &Batch, params: &ModelParams) -> Result<Tensor> {
    batch.validate(params.config().vocab_size, params.config().max_len)?;
    let mut packed = batch.pack();
    packed.input_values.clone_from(&packed.values);
    pooled_features(&packed, params)
}

pub(crate) fn pooled_features(packed: &PackedBatch, params: &ModelParams) -> Result<Tensor> {
    let d = params.config().d_model;
    let mut tape = Tape::new();
    let pv = params.on_tape(&mut tape, false);
    let fwd = forward(&mut tape, params.config(), &pv, packed)?;
    let feats = tape.value(fwd.features);
    let mut out = vec![0.0; packed.n_samples() * d];
    for (r, s) in packed.segments.iter().enumerate() {
        if s.len == 0 {
            continue;
        }
        let dst = &mut out[r * d..(r + 1) * d];
        for t in s.start..s.start + s.len {
            for (o, v) in dst.iter_mut().zip(feats.row(t)) {
                *o += v;
            }
        }
        let inv = 1.0 / s.len as f64;
        dst.iter_mut().for_each(|o| *o *= inv);
    }
    Tensor::new(vec![packed.n_samples(), d], out)
}

/// Predictions for every packed token without building gradients.
pub fn predict_packed(packed: &PackedBatch, params: &ModelParams) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let pv = params.on_tape(&mut tape, false);
    let fwd = forward(&mut tape, params.config(), &pv, packed)?;
    Ok(tape.value(fwd.predictions).data().to_vec())
}
