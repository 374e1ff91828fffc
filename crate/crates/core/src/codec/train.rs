use std::collections::HashMap;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_frame, decode_patch, encode, encode_patch, gather_patch, quantize, CodecDims, CodecParams, Dense, FlowCodec,
    FrameShape, LossTerms, DEFAULT_BETA,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Patches per SGD step.
    pub batch: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.05,
            batch: 32,
            beta: DEFAULT_BETA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Dataset-mean reconstruction MSE of the untrained codec.
    pub initial_recon: f64,
    /// Dataset-mean reconstruction MSE after the last update.
    pub final_recon: f64,
    /// Mean pre-update batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    /// Mean pre-update reconstruction MSE per epoch.
    pub epoch_recon: Vec<f64>,
    /// Codebook entries re-seeded at the end of each epoch.
    pub reseeded: Vec<usize>,
}

struct Scratch<F> {
    h: Vec<F>,
    z: Vec<F>,
    g: Vec<F>,
    y: Vec<F>,
    dy: Vec<F>,
    dg: Vec<F>,
    dq: Vec<F>,
    dh: Vec<F>,
}

impl<F: Float> Scratch<F> {
    fn new(d: &CodecDims) -> Self {
        let z = F::zero();
        Self {
            h: vec![z; d.hidden],
            z: vec![z; d.latent],
            g: vec![z; d.hidden],
            y: vec![z; d.input()],
            dy: vec![z; d.input()],
            dg: vec![z; d.hidden],
            dq: vec![z; d.latent],
            dh: vec![z; d.hidden],
        }
    }
}

/// `grad += outer(dout, x)`, `bias += dout`, and writes `W^T dout` into `dx` when given.
fn backward_dense<F: Float>(layer: &Dense<F>, grad: &mut Dense<F>, x: &[F], dout: &[F], dx: Option<&mut [F]>) {
    for (o, &d) in dout.iter().enumerate() {
        let row = &mut grad.w[o * layer.inputs..(o + 1) * layer.inputs];
        for (g, &v) in row.iter_mut().zip(x) {
            *g = *g + d * v;
        }
        grad.b[o] = grad.b[o] + d;
    }
    if let Some(dx) = dx {
        dx.iter_mut().for_each(|v| *v = F::zero());
        for (o, &d) in dout.iter().enumerate() {
            let row = &layer.w[o * layer.inputs..(o + 1) * layer.inputs];
            for (acc, &w) in dx.iter_mut().zip(row) {
                *acc = *acc + d * w;
            }
        }
    }
}

struct PatchStats<F> {
    sq_err: F,
    vq: F,
    code: usize,
}

/// Forward and backward for one patch, accumulating `count`-weighted gradients.
///
/// The quantizer passes the decoder's latent gradient straight to the encoder output; the
/// codebook term moves only the chosen entry and the commitment term moves only the encoder.
fn accumulate_patch<F: Float>(
    p: &CodecParams<F>,
    x: &[F],
    count: F,
    recon_scale: F,
    vq_scale: F,
    grads: &mut CodecParams<F>,
    s: &mut Scratch<F>,
) -> PatchStats<F> {
    let two = F::one() + F::one();
    encode_patch(p, x, &mut s.h, &mut s.z);
    let (code, vq) = p.codebook.nearest(&s.z);
    let e = p.codebook.entry(code);
    decode_patch(p, e, &mut s.g, &mut s.y);

    let mut sq_err = F::zero();
    for ((dy, &y), &t) in s.dy.iter_mut().zip(&s.y).zip(x) {
        let r = y - t;
        sq_err = sq_err + r * r;
        *dy = two * r * recon_scale * count;
    }
    backward_dense(&p.dec2, &mut grads.dec2, &s.g, &s.dy, Some(&mut s.dg));
    for (d, &g) in s.dg.iter_mut().zip(&s.g) {
        *d = *d * (F::one() - g * g);
    }
    backward_dense(&p.dec1, &mut grads.dec1, e, &s.dg, Some(&mut s.dq));

    let vq_w = two * vq_scale * count;
    let dim = p.codebook.dim;
    for j in 0..dim {
        let diff = s.z[j] - e[j];
        s.dq[j] = s.dq[j] + p.beta * vq_w * diff;
        let cb = &mut grads.codebook.vectors[code * dim + j];
        *cb = *cb - vq_w * diff;
    }
    backward_dense(&p.enc2, &mut grads.enc2, &s.h, &s.dq, Some(&mut s.dh));
    for (d, &h) in s.dh.iter_mut().zip(&s.h) {
        *d = *d * (F::one() - h * h);
    }
    backward_dense(&p.enc1, &mut grads.enc1, x, &s.dh, None);
    PatchStats { sq_err, vq, code }
}

/// Loss of one frame and its gradient with respect to every parameter.
pub fn loss_and_grad<F: Float>(
    frame: &[F],
    shape: FrameShape,
    params: &CodecParams<F>,
) -> Result<(LossTerms<F>, CodecParams<F>)> {
    let dims = params.dims;
    let (cols, rows) = check_frame(frame, shape, &dims)?;
    let mut grads = CodecParams::zeros(dims, params.beta);
    let mut s = Scratch::new(&dims);
    let mut x = vec![F::zero(); dims.input()];
    let recon_scale = F::one() / F::from(frame.len()).unwrap();
    let vq_scale = F::one() / F::from(cols * rows).unwrap();
    let (mut sq, mut vq) = (F::zero(), F::zero());
    for py in 0..rows {
        for px in 0..cols {
            gather_patch(frame, shape, &dims, px, py, &mut x);
            let st = accumulate_patch(params, &x, F::one(), recon_scale, vq_scale, &mut grads, &mut s);
            sq = sq + st.sq_err;
            vq = vq + st.vq;
        }
    }
    let recon_mse = sq * recon_scale;
    let codebook_term = vq * vq_scale;
    let commitment_term = params.beta * codebook_term;
    Ok((
        LossTerms {
            total: recon_mse + codebook_term + commitment_term,
            recon_mse,
            codebook_term,
            commitment_term,
        },
        grads,
    ))
}

fn dataset_recon(p: &FlowCodec, table: &[Vec<f32>], counts: &[usize], s: &mut Scratch<f32>) -> f64 {
    let (mut sum, mut n) = (0.0f64, 0usize);
    for (x, &c) in table.iter().zip(counts) {
        encode_patch(p, x, &mut s.h, &mut s.z);
        let (code, _) = p.codebook.nearest(&s.z);
        decode_patch(p, p.codebook.entry(code), &mut s.g, &mut s.y);
        let err: f32 = s.y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        sum += err as f64 * c as f64;
        n += c * x.len();
    }
    sum / n as f64
}

fn sgd_step<F: Float>(params: &mut CodecParams<F>, grads: &CodecParams<F>, lr: F) {
    let g = grads.tensors();
    for (t, gt) in params.tensors_mut().into_iter().zip(g) {
        for (p, &d) in t.iter_mut().zip(gt) {
            *p = *p - lr * d;
        }
    }
}

fn zero_grads<F: Float>(grads: &mut CodecParams<F>) {
    for t in grads.tensors_mut() {
        t.iter_mut().for_each(|v| *v = F::zero());
    }
}

type PatchKey = Vec<u32>;

fn patch_key(x: &[f32]) -> PatchKey {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Frames sampled to pick replacement latents for unused codebook entries.
const RESEED_SAMPLE_FRAMES: usize = 256;

/// Replaces every entry in `dead` with a training latent, drawn with probability proportional
/// to its squared distance from the current codebook.
fn reseed(
    params: &mut FlowCodec,
    dead: &[usize],
    frames: &[Vec<f32>],
    shape: FrameShape,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if dead.is_empty() {
        return Ok(());
    }
    let mut pool: HashMap<Vec<u32>, (Vec<f32>, f32)> = HashMap::new();
    for _ in 0..RESEED_SAMPLE_FRAMES.min(frames.len()) {
        let frame = &frames[rng.random_range(0..frames.len())];
        let latents = encode(frame, shape, params)?;
        for i in 0..latents.cells() {
            let z = latents.cell(i);
            let (_, d) = params.codebook.nearest(z);
            pool.entry(patch_key(z)).or_insert_with(|| (z.to_vec(), d));
        }
    }
    // HashMap order is unseeded; sort for reproducibility.
    let mut pool: Vec<(PatchKey, (Vec<f32>, f32))> = pool.into_iter().collect();
    pool.sort_by(|a, b| a.0.cmp(&b.0));
    let mut weights: Vec<f64> = pool.iter().map(|(_, (_, d))| *d as f64).collect();
    let dim = params.codebook.dim;
    for &k in dead {
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut idx = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if r < *w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.random_range(0..pool.len())
        };
        weights[pick] = 0.0;
        params.codebook.vectors[k * dim..(k + 1) * dim].copy_from_slice(&pool[pick].1 .0);
    }
    Ok(())
}

/// Trains a codec with plain SGD and the straight-through estimator.
///
/// The codec has no interaction between patches, so the sample unit is a patch: an epoch is
/// a seeded permutation of every (frame, cell) slot, cut into steps of `batch` patches.
/// Identical patches inside a step are evaluated once and weighted by multiplicity, which
/// leaves the gradient unchanged.
pub fn train(
    frames: &[Vec<f32>],
    shape: FrameShape,
    dims: CodecDims,
    config: &TrainConfig,
) -> Result<(FlowCodec, TrainReport)> {
    if frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.batch == 0 || !(config.learning_rate > 0.0) || !(config.beta > 0.0) {
        return Err(Error::InvalidConfig(
            "batch, learning rate and beta must be positive".into(),
        ));
    }
    let (cols, rows) = shape.grid(&dims)?;
    for f in frames {
        check_frame(f, shape, &dims)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = FlowCodec::init(dims, config.beta as f32, rng.random());
    let mut grads = FlowCodec::zeros(dims, config.beta as f32);
    let mut s = Scratch::new(&dims);

    // Every (frame, cell) slot points into a table of distinct patches.
    let mut table: Vec<Vec<f32>> = Vec::new();
    let mut slots: Vec<u32> = Vec::with_capacity(frames.len() * cols * rows);
    {
        let mut index: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut x = vec![0.0f32; dims.input()];
        for f in frames {
            for py in 0..rows {
                for px in 0..cols {
                    gather_patch(f, shape, &dims, px, py, &mut x);
                    let id = *index.entry(patch_key(&x)).or_insert_with(|| {
                        table.push(x.clone());
                        (table.len() - 1) as u32
                    });
                    slots.push(id);
                }
            }
        }
    }

    let mut counts = vec![0usize; table.len()];
    for &id in &slots {
        counts[id as usize] += 1;
    }

    let mut report = TrainReport {
        initial_recon: dataset_recon(&params, &table, &counts, &mut s),
        final_recon: 0.0,
        epoch_loss: Vec::with_capacity(config.epochs),
        epoch_recon: Vec::with_capacity(config.epochs),
        reseeded: Vec::with_capacity(config.epochs),
    };
    let lr = config.learning_rate as f32;
    let input = dims.input();
    let mut uniq: Vec<(u32, usize)> = Vec::with_capacity(config.batch);

    for _ in 0..config.epochs {
        slots.shuffle(&mut rng);
        let mut usage = vec![0usize; dims.codes];
        let (mut loss_sum, mut recon_sum, mut batches) = (0.0f64, 0.0f64, 0usize);
        for batch in slots.chunks(config.batch) {
            uniq.clear();
            for &id in batch {
                match uniq.iter_mut().find(|(u, _)| *u == id) {
                    Some((_, c)) => *c += 1,
                    None => uniq.push((id, 1)),
                }
            }
            let b = batch.len();
            let recon_scale = 1.0 / (input * b) as f32;
            let vq_scale = 1.0 / b as f32;
            zero_grads(&mut grads);
            let (mut sq, mut vq) = (0.0f64, 0.0f64);
            for &(id, c) in &uniq {
                let st = accumulate_patch(
                    &params,
                    &table[id as usize],
                    c as f32,
                    recon_scale,
                    vq_scale,
                    &mut grads,
                    &mut s,
                );
                sq += st.sq_err as f64 * c as f64;
                vq += st.vq as f64 * c as f64;
                usage[st.code] += c;
            }
            let recon = sq / (input * b) as f64;
            recon_sum += recon;
            loss_sum += recon + (1.0 + config.beta) * vq / b as f64;
            batches += 1;
            sgd_step(&mut params, &grads, lr);
        }
        report.epoch_loss.push(loss_sum / batches as f64);
        report.epoch_recon.push(recon_sum / batches as f64);
        let dead: Vec<usize> = (0..dims.codes).filter(|&k| usage[k] == 0).collect();
        reseed(&mut params, &dead, frames, shape, &mut rng)?;
        report.reseeded.push(dead.len());
    }
    if params.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteInput);
    }
    report.final_recon = dataset_recon(&params, &table, &counts, &mut s);
    Ok((params, report))
}

/// Fraction of codebook entries selected at least once across `frames`.
pub fn codebook_usage<F: Float>(params: &CodecParams<F>, frames: &[Vec<F>], shape: FrameShape) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut used = vec![false; params.codebook.len()];
    for f in frames {
        let latents = encode(f, shape, params)?;
        let (codes, _) = quantize(&latents, &params.codebook)?;
        for c in codes.codes {
            used[c as usize] = true;
        }
    }
    Ok(used.iter().filter(|&&u| u).count() as f64 / used.len() as f64)
}

/// Mean total loss over `frames`.
pub fn mean_loss<F: Float>(params: &CodecParams<F>, frames: &[Vec<F>], shape: FrameShape) -> Result<f64> {
    if frames.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = 0.0;
    for f in frames {
        sum += super::loss(f, shape, params)?.total.to_f64().unwrap();
    }
    Ok(sum / frames.len() as f64)
}
