//! Patchwise VQ-VAE over single dense-flow frames.
//!
//! A frame is cut into non-overlapping square patches. Each patch goes through a small MLP
//! encoder to a latent vector, which is snapped to its nearest codebook entry and decoded
//! back to the patch. The grid of chosen entries is the discrete flow representation used by
//! the bag-of-codes histograms.

pub mod gradcheck;
mod io;
mod train;

pub use io::CODEC_MAGIC;
pub use train::{codebook_usage, loss_and_grad, mean_loss, train, TrainConfig, TrainReport};

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const PATCH: usize = 4;
pub const CODEBOOK_SIZE: usize = 64;
pub const LATENT_DIM: usize = 8;
pub const HIDDEN_DIM: usize = 16;
/// Original VQ-VAE commitment weight.
pub const DEFAULT_BETA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecDims {
    pub patch: usize,
    pub channels: usize,
    pub hidden: usize,
    pub latent: usize,
    pub codes: usize,
}

impl CodecDims {
    /// 4x4x2 patches, 32 -> 16 -> 8 encoder, 64 codes.
    pub const FLOW: CodecDims = CodecDims {
        patch: PATCH,
        channels: 2,
        hidden: HIDDEN_DIM,
        latent: LATENT_DIM,
        codes: CODEBOOK_SIZE,
    };

    pub fn input(&self) -> usize {
        self.patch * self.patch * self.channels
    }
}

/// Fully connected layer, `w` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Float> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            w: vec![F::zero(); inputs * outputs],
            b: vec![F::zero(); outputs],
        }
    }

    fn xavier(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut d = Self::zeros(inputs, outputs);
        for w in &mut d.w {
            *w = F::from(rng.random_range(-scale..scale)).unwrap();
        }
        d
    }

    pub fn forward(&self, x: &[F], out: &mut [F]) {
        for (o, row) in out.iter_mut().zip(self.w.chunks_exact(self.inputs)) {
            *o = row.iter().zip(x).fold(F::zero(), |acc, (&w, &v)| acc + w * v);
        }
        for (o, &b) in out.iter_mut().zip(&self.b) {
            *o = *o + b;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<F> {
    pub dim: usize,
    pub vectors: Vec<F>,
}

impl<F: Float> Codebook<F> {
    pub fn new(dim: usize, vectors: Vec<F>) -> Result<Self> {
        if dim == 0 || vectors.is_empty() || !vectors.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch(format!(
                "{} codebook values do not form rows of {dim}",
                vectors.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn entry(&self, k: usize) -> &[F] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    /// Nearest entry by squared L2; the lowest index wins ties.
    pub fn nearest(&self, z: &[F]) -> (usize, F) {
        let mut best = (0, F::infinity());
        for (k, e) in self.vectors.chunks_exact(self.dim).enumerate() {
            let d = sq_dist(z, e);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }
}

pub(crate) fn sq_dist<F: Float>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecParams<F> {
    pub dims: CodecDims,
    pub beta: F,
    pub enc1: Dense<F>,
    pub enc2: Dense<F>,
    pub dec1: Dense<F>,
    pub dec2: Dense<F>,
    pub codebook: Codebook<F>,
}

/// Production codec precision.
pub type FlowCodec = CodecParams<f32>;

impl<F: Float> CodecParams<F> {
    pub fn zeros(dims: CodecDims, beta: F) -> Self {
        Self {
            dims,
            beta,
            enc1: Dense::zeros(dims.input(), dims.hidden),
            enc2: Dense::zeros(dims.hidden, dims.latent),
            dec1: Dense::zeros(dims.latent, dims.hidden),
            dec2: Dense::zeros(dims.hidden, dims.input()),
            codebook: Codebook {
                dim: dims.latent,
                vectors: vec![F::zero(); dims.codes * dims.latent],
            },
        }
    }

    /// Xavier-uniform weights, zero biases, codebook uniform in [-1/K, 1/K].
    pub fn init(dims: CodecDims, beta: F, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lim = 1.0 / dims.codes as f64;
        let codebook = (0..dims.codes * dims.latent)
            .map(|_| F::from(rng.random_range(-lim..lim)).unwrap())
            .collect();
        Self {
            dims,
            beta,
            enc1: Dense::xavier(dims.input(), dims.hidden, &mut rng),
            enc2: Dense::xavier(dims.hidden, dims.latent, &mut rng),
            dec1: Dense::xavier(dims.latent, dims.hidden, &mut rng),
            dec2: Dense::xavier(dims.hidden, dims.input(), &mut rng),
            codebook: Codebook {
                dim: dims.latent,
                vectors: codebook,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        let shapes = [
            (&self.enc1, d.input(), d.hidden),
            (&self.enc2, d.hidden, d.latent),
            (&self.dec1, d.latent, d.hidden),
            (&self.dec2, d.hidden, d.input()),
        ];
        for (layer, i, o) in shapes {
            if layer.inputs != i || layer.outputs != o || layer.w.len() != i * o || layer.b.len() != o {
                return Err(Error::ShapeMismatch(format!(
                    "layer {}x{} does not match dims {o}x{i}",
                    layer.outputs, layer.inputs
                )));
            }
        }
        if self.codebook.dim != d.latent || self.codebook.len() != d.codes {
            return Err(Error::ShapeMismatch("codebook does not match dims".into()));
        }
        if !(self.beta > F::zero()) {
            return Err(Error::InvalidConfig("commitment weight must be positive".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> [&Dense<F>; 4] {
        [&self.enc1, &self.enc2, &self.dec1, &self.dec2]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense<F>; 4] {
        [&mut self.enc1, &mut self.enc2, &mut self.dec1, &mut self.dec2]
    }

    /// Every trainable scalar: layer weights and biases in order, then the codebook.
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<F>> {
        let CodecParams {
            enc1,
            enc2,
            dec1,
            dec2,
            codebook,
            ..
        } = self;
        vec![
            &mut enc1.w,
            &mut enc1.b,
            &mut enc2.w,
            &mut enc2.b,
            &mut dec1.w,
            &mut dec1.b,
            &mut dec2.w,
            &mut dec2.b,
            &mut codebook.vectors,
        ]
    }

    pub fn tensors(&self) -> [&[F]; 9] {
        [
            &self.enc1.w,
            &self.enc1.b,
            &self.enc2.w,
            &self.enc2.b,
            &self.dec1.w,
            &self.dec1.b,
            &self.dec2.w,
            &self.dec2.b,
            &self.codebook.vectors,
        ]
    }

    pub fn cast<G: Float>(&self) -> CodecParams<G> {
        let c = |v: &[F]| v.iter().map(|&x| G::from(x).unwrap()).collect::<Vec<G>>();
        let d = |l: &Dense<F>| Dense {
            inputs: l.inputs,
            outputs: l.outputs,
            w: c(&l.w),
            b: c(&l.b),
        };
        CodecParams {
            dims: self.dims,
            beta: G::from(self.beta).unwrap(),
            enc1: d(&self.enc1),
            enc2: d(&self.enc2),
            dec1: d(&self.dec1),
            dec2: d(&self.dec2),
            codebook: Codebook {
                dim: self.codebook.dim,
                vectors: c(&self.codebook.vectors),
            },
        }
    }
}

/// Frame geometry: `width x height` pixels, `channels` interleaved values per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameShape {
    pub width: usize,
    pub height: usize,
}

impl FrameShape {
    pub const FLOW: FrameShape = FrameShape {
        width: crate::sim::FLOW_SIZE,
        height: crate::sim::FLOW_SIZE,
    };

    pub fn grid(&self, dims: &CodecDims) -> Result<(usize, usize)> {
        if !self.width.is_multiple_of(dims.patch) || !self.height.is_multiple_of(dims.patch) || self.width == 0 || self.height == 0 {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} frame is not tiled by {}x{} patches",
                self.width, self.height, dims.patch, dims.patch
            )));
        }
        Ok((self.width / dims.patch, self.height / dims.patch))
    }
}

/// Copies patch `(px, py)` of an interleaved frame into `out` (row-major, channel-minor).
pub(crate) fn gather_patch<F: Copy>(
    frame: &[F],
    shape: FrameShape,
    dims: &CodecDims,
    px: usize,
    py: usize,
    out: &mut [F],
) {
    let (p, c) = (dims.patch, dims.channels);
    let mut i = 0;
    for dy in 0..p {
        let row = (py * p + dy) * shape.width + px * p;
        let start = row * c;
        out[i..i + p * c].copy_from_slice(&frame[start..start + p * c]);
        i += p * c;
    }
}

pub(crate) fn scatter_patch<F: Copy>(
    patch: &[F],
    shape: FrameShape,
    dims: &CodecDims,
    px: usize,
    py: usize,
    frame: &mut [F],
) {
    let (p, c) = (dims.patch, dims.channels);
    for dy in 0..p {
        let row = (py * p + dy) * shape.width + px * p;
        let start = row * c;
        frame[start..start + p * c].copy_from_slice(&patch[dy * p * c..(dy + 1) * p * c]);
    }
}

/// Per-patch latent vectors in row-major grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid<F> {
    pub cols: usize,
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<F>,
}

impl<F: Float> LatentGrid<F> {
    pub fn cell(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cells(&self) -> usize {
        self.cols * self.rows
    }
}

/// Codebook index per patch, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeGrid {
    pub cols: usize,
    pub rows: usize,
    pub codes: Vec<u8>,
}

fn check_frame<F: Float>(frame: &[F], shape: FrameShape, dims: &CodecDims) -> Result<(usize, usize)> {
    let grid = shape.grid(dims)?;
    if frame.len() != shape.width * shape.height * dims.channels {
        return Err(Error::ShapeMismatch(format!(
            "frame has {} values, expected {}",
            frame.len(),
            shape.width * shape.height * dims.channels
        )));
    }
    if frame.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(grid)
}

pub(crate) fn encode_patch<F: Float>(params: &CodecParams<F>, x: &[F], hidden: &mut [F], z: &mut [F]) {
    params.enc1.forward(x, hidden);
    hidden.iter_mut().for_each(|h| *h = h.tanh());
    params.enc2.forward(hidden, z);
}

pub(crate) fn decode_patch<F: Float>(params: &CodecParams<F>, q: &[F], hidden: &mut [F], out: &mut [F]) {
    params.dec1.forward(q, hidden);
    hidden.iter_mut().for_each(|h| *h = h.tanh());
    params.dec2.forward(hidden, out);
}

pub fn encode<F: Float>(frame: &[F], shape: FrameShape, params: &CodecParams<F>) -> Result<LatentGrid<F>> {
    let dims = params.dims;
    let (cols, rows) = check_frame(frame, shape, &dims)?;
    let mut data = vec![F::zero(); cols * rows * dims.latent];
    let mut x = vec![F::zero(); dims.input()];
    let mut h = vec![F::zero(); dims.hidden];
    for py in 0..rows {
        for px in 0..cols {
            gather_patch(frame, shape, &dims, px, py, &mut x);
            let i = py * cols + px;
            encode_patch(params, &x, &mut h, &mut data[i * dims.latent..(i + 1) * dims.latent]);
        }
    }
    Ok(LatentGrid {
        cols,
        rows,
        dim: dims.latent,
        data,
    })
}

pub fn quantize<F: Float>(latents: &LatentGrid<F>, codebook: &Codebook<F>) -> Result<(CodeGrid, LatentGrid<F>)> {
    if latents.dim != codebook.dim {
        return Err(Error::ShapeMismatch(format!(
            "latent dim {} vs codebook dim {}",
            latents.dim, codebook.dim
        )));
    }
    if codebook.len() > 256 {
        return Err(Error::ShapeMismatch(
            "codebooks above 256 entries do not fit a u8 code".into(),
        ));
    }
    let mut codes = Vec::with_capacity(latents.cells());
    let mut data = Vec::with_capacity(latents.data.len());
    for i in 0..latents.cells() {
        let (k, _) = codebook.nearest(latents.cell(i));
        codes.push(k as u8);
        data.extend_from_slice(codebook.entry(k));
    }
    Ok((
        CodeGrid {
            cols: latents.cols,
            rows: latents.rows,
            codes,
        },
        LatentGrid {
            cols: latents.cols,
            rows: latents.rows,
            dim: latents.dim,
            data,
        },
    ))
}

pub fn decode<F: Float>(quantized: &LatentGrid<F>, params: &CodecParams<F>) -> Result<Vec<F>> {
    let dims = params.dims;
    if quantized.dim != dims.latent {
        return Err(Error::ShapeMismatch("latent dim does not match decoder".into()));
    }
    let shape = FrameShape {
        width: quantized.cols * dims.patch,
        height: quantized.rows * dims.patch,
    };
    let mut frame = vec![F::zero(); shape.width * shape.height * dims.channels];
    let mut h = vec![F::zero(); dims.hidden];
    let mut out = vec![F::zero(); dims.input()];
    for py in 0..quantized.rows {
        for px in 0..quantized.cols {
            decode_patch(params, quantized.cell(py * quantized.cols + px), &mut h, &mut out);
            scatter_patch(&out, shape, &dims, px, py, &mut frame);
        }
    }
    Ok(frame)
}

/// Frame → code grid.
pub fn encode_codes<F: Float>(frame: &[F], shape: FrameShape, params: &CodecParams<F>) -> Result<CodeGrid> {
    let latents = encode(frame, shape, params)?;
    Ok(quantize(&latents, &params.codebook)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms<F> {
    pub total: F,
    pub recon_mse: F,
    pub codebook_term: F,
    pub commitment_term: F,
}

/// VQ-VAE objective for one frame: reconstruction MSE over every value, plus codebook and
/// commitment terms averaged over grid positions.
pub fn loss<F: Float>(frame: &[F], shape: FrameShape, params: &CodecParams<F>) -> Result<LossTerms<F>> {
    let latents = encode(frame, shape, params)?;
    let (_, quantized) = quantize(&latents, &params.codebook)?;
    let recon = decode(&quantized, params)?;
    let n = F::from(frame.len()).unwrap();
    let recon_mse = recon
        .iter()
        .zip(frame)
        .fold(F::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
        / n;
    let cells = latents.cells();
    let vq = (0..cells).fold(F::zero(), |acc, i| acc + sq_dist(latents.cell(i), quantized.cell(i)))
        / F::from(cells).unwrap();
    let commitment_term = params.beta * vq;
    Ok(LossTerms {
        total: recon_mse + vq + commitment_term,
        recon_mse,
        codebook_term: vq,
        commitment_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_frame(seed: u64, shape: FrameShape) -> Vec<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..shape.width * shape.height * 2)
            .map(|_| rng.random_range(-4.0..4.0))
            .collect()
    }

    #[test]
    fn zero_params_encode_and_decode_to_zero() {
        let p = CodecParams::<f32>::zeros(CodecDims::FLOW, 0.25);
        let frame = random_frame(1, FrameShape::FLOW);
        let z = encode(&frame, FrameShape::FLOW, &p).unwrap();
        assert_eq!((z.cols, z.rows), (8, 8));
        assert!(z.data.iter().all(|&v| v == 0.0));
        let out = decode(&z, &p).unwrap();
        assert_eq!(out.len(), 32 * 32 * 2);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn swapping_patches_swaps_latents_only() {
        let p = CodecParams::<f32>::init(CodecDims::FLOW, 0.25, 3);
        let shape = FrameShape::FLOW;
        let frame = random_frame(2, shape);
        let dims = p.dims;
        let (mut a, mut b) = (vec![0.0; 32], vec![0.0; 32]);
        gather_patch(&frame, shape, &dims, 1, 2, &mut a);
        gather_patch(&frame, shape, &dims, 6, 5, &mut b);
        let mut swapped = frame.clone();
        scatter_patch(&b, shape, &dims, 1, 2, &mut swapped);
        scatter_patch(&a, shape, &dims, 6, 5, &mut swapped);

        let z = encode(&frame, shape, &p).unwrap();
        let zs = encode(&swapped, shape, &p).unwrap();
        let (i, j) = (2 * 8 + 1, 5 * 8 + 6);
        for c in 0..64 {
            let expect = if c == i {
                j
            } else if c == j {
                i
            } else {
                c
            };
            assert_eq!(zs.cell(c), z.cell(expect));
        }

        let dz = decode(&z, &p).unwrap();
        let dzs = decode(&zs, &p).unwrap();
        let (mut ra, mut rb) = (vec![0.0; 32], vec![0.0; 32]);
        gather_patch(&dz, shape, &dims, 1, 2, &mut ra);
        gather_patch(&dzs, shape, &dims, 6, 5, &mut rb);
        assert_eq!(ra, rb);
    }

    #[test]
    fn encode_and_decode_checksums_are_pinned() {
        let p = CodecParams::<f32>::init(CodecDims::FLOW, 0.25, 2024);
        let frame = random_frame(77, FrameShape::FLOW);
        let z = encode(&frame, FrameShape::FLOW, &p).unwrap();
        let zsum: f64 = z.data.iter().map(|&v| v as f64).sum();
        let (_, q) = quantize(&z, &p.codebook).unwrap();
        let out = decode(&q, &p).unwrap();
        let osum: f64 = out.iter().map(|&v| v as f64).sum();
        // regression pins recorded from this implementation
        assert!(
            (zsum - ENCODE_CHECKSUM).abs() < 1e-4,
            "encode checksum {zsum} decode {osum}"
        );
        assert!((osum - DECODE_CHECKSUM).abs() < 1e-4, "decode checksum {osum}");
    }

    const ENCODE_CHECKSUM: f64 = 10.386780828237534;
    const DECODE_CHECKSUM: f64 = 0.4999995178368408;

    #[test]
    fn nearest_neighbor_and_tie_break() {
        let cb = Codebook::new(2, vec![0.0f64, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(cb.nearest(&[0.9, 0.9]).0, 1);

        let mut v = vec![5.0f64; 16];
        v[6] = 1.0;
        v[7] = 0.0;
        v[14] = -1.0;
        v[15] = 0.0;
        let cb = Codebook::new(2, v).unwrap();
        // (0,0) is equidistant from entry 3 = (1,0) and entry 7 = (-1,0)
        assert_eq!(cb.nearest(&[0.0, 0.0]).0, 3);
    }

    #[test]
    fn quantize_matches_brute_force_and_is_idempotent() {
        let p = CodecParams::<f32>::init(CodecDims::FLOW, 0.25, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let latents = LatentGrid {
            cols: 8,
            rows: 8,
            dim: 8,
            data: (0..512).map(|_| rng.random_range(-0.05f32..0.05)).collect(),
        };
        let (codes, q) = quantize(&latents, &p.codebook).unwrap();
        for i in 0..64 {
            let z = latents.cell(i);
            // exhaustive scan with explicit distances
            let mut dists: Vec<(f32, usize)> = (0..64)
                .map(|k| {
                    let e = &p.codebook.vectors[k * 8..k * 8 + 8];
                    (z.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum(), k)
                })
                .collect();
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            assert_eq!(codes.codes[i] as usize, dists[0].1);
        }
        let (again, _) = quantize(&q, &p.codebook).unwrap();
        assert_eq!(again, codes);
    }

    #[test]
    fn non_finite_frames_are_rejected() {
        let p = CodecParams::<f32>::init(CodecDims::FLOW, 0.25, 1);
        let mut frame = vec![0.0f32; 2048];
        frame[17] = f32::NAN;
        assert!(matches!(
            encode(&frame, FrameShape::FLOW, &p),
            Err(Error::NonFiniteInput)
        ));
        assert!(matches!(loss(&frame, FrameShape::FLOW, &p), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn perfect_autoencoder_has_zero_loss() {
        // identity-like codec on a 1-patch frame: zero weights with biases that reproduce
        // the frame, and a codebook that contains the (bias-only) latent
        let dims = CodecDims {
            patch: 2,
            channels: 2,
            hidden: 3,
            latent: 2,
            codes: 4,
        };
        let shape = FrameShape { width: 2, height: 2 };
        let frame = vec![0.5f64, -1.0, 2.0, 0.25, 0.0, 1.5, -0.75, 3.0];
        let mut p = CodecParams::<f64>::zeros(dims, 0.25);
        p.enc2.b = vec![0.3, -0.2];
        p.codebook.vectors[2 * 2..2 * 2 + 2].copy_from_slice(&[0.3, -0.2]);
        p.dec2.b = frame.clone();
        let l = loss(&frame, shape, &p).unwrap();
        assert_eq!(l.total, 0.0);
        assert_eq!(l.recon_mse, 0.0);
    }

    #[test]
    fn beta_only_scales_the_commitment_term() {
        let shape = FrameShape::FLOW;
        let frame: Vec<f64> = random_frame(4, shape).into_iter().map(f64::from).collect();
        let mut p = CodecParams::<f64>::init(CodecDims::FLOW, 0.25, 8);
        let with = loss(&frame, shape, &p).unwrap();
        p.beta = 0.0;
        let without = loss(&frame, shape, &p).unwrap();
        assert_eq!(without.commitment_term, 0.0);
        assert_eq!(without.total, without.recon_mse + without.codebook_term);
        assert!((with.total - without.total - with.commitment_term).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_naive_recomputation() {
        let dims = CodecDims {
            patch: 2,
            channels: 2,
            hidden: 3,
            latent: 2,
            codes: 3,
        };
        let shape = FrameShape { width: 4, height: 2 };
        let p = CodecParams::<f64>::init(dims, 0.25, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let frame: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = loss(&frame, shape, &p).unwrap();

        // naive: walk the two patches with explicit index arithmetic
        let mut recon_sum = 0.0;
        let mut vq_sum = 0.0;
        for patch in 0..2 {
            let mut x = Vec::new();
            for dy in 0..2 {
                for dx in 0..2 {
                    for c in 0..2 {
                        x.push(frame[((dy * 4) + patch * 2 + dx) * 2 + c]);
                    }
                }
            }
            let h: Vec<f64> = (0..3)
                .map(|o| ((0..8).map(|i| p.enc1.w[o * 8 + i] * x[i]).sum::<f64>() + p.enc1.b[o]).tanh())
                .collect();
            let z: Vec<f64> = (0..2)
                .map(|o| (0..3).map(|i| p.enc2.w[o * 3 + i] * h[i]).sum::<f64>() + p.enc2.b[o])
                .collect();
            let mut best = (0, f64::INFINITY);
            for k in 0..3 {
                let e = &p.codebook.vectors[k * 2..k * 2 + 2];
                let d = (z[0] - e[0]).powi(2) + (z[1] - e[1]).powi(2);
                if d < best.1 {
                    best = (k, d);
                }
            }
            vq_sum += best.1;
            let e = &p.codebook.vectors[best.0 * 2..best.0 * 2 + 2];
            let g: Vec<f64> = (0..3)
                .map(|o| ((0..2).map(|i| p.dec1.w[o * 2 + i] * e[i]).sum::<f64>() + p.dec1.b[o]).tanh())
                .collect();
            for o in 0..8 {
                let y = (0..3).map(|i| p.dec2.w[o * 3 + i] * g[i]).sum::<f64>() + p.dec2.b[o];
                recon_sum += (y - x[o]).powi(2);
            }
        }
        let recon = recon_sum / 16.0;
        let vq = vq_sum / 2.0;
        let total = recon + vq + 0.25 * vq;
        assert!((got.total - total).abs() < 1e-12, "{} vs {total}", got.total);
        assert!((got.recon_mse - recon).abs() < 1e-12);
        assert!((got.codebook_term - vq).abs() < 1e-12);
    }
}
