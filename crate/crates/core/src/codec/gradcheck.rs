//! Smooth stand-in for the VQ-VAE loss whose exact derivative is the straight-through gradient,
//! so that central differences can check [`loss_and_grad`](super::loss_and_grad).

use super::{check_frame, decode_patch, encode, encode_patch, gather_patch, sq_dist, CodecParams, FrameShape};
use crate::error::Result;

/// Quantizer decisions of every patch at fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSnapshot {
    codes: Vec<usize>,
    z0: Vec<Vec<f64>>,
    e0: Vec<Vec<f64>>,
}

impl QuantizerSnapshot {
    /// `None` when some latent's two nearest codebook entries differ in squared distance by less
    /// than `margin`, i.e. a small perturbation could flip the code.
    pub fn capture(frame: &[f64], shape: FrameShape, params: &CodecParams<f64>, margin: f64) -> Result<Option<Self>> {
        let latents = encode(frame, shape, params)?;
        let mut snap = QuantizerSnapshot {
            codes: Vec::new(),
            z0: Vec::new(),
            e0: Vec::new(),
        };
        for i in 0..latents.cells() {
            let z = latents.cell(i);
            let mut d: Vec<(f64, usize)> = (0..params.codebook.len())
                .map(|k| (sq_dist(z, params.codebook.entry(k)), k))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if d.len() > 1 && d[1].0 - d[0].0 < margin {
                return Ok(None);
            }
            snap.codes.push(d[0].1);
            snap.z0.push(z.to_vec());
            snap.e0.push(params.codebook.entry(d[0].1).to_vec());
        }
        Ok(Some(snap))
    }
}

/// Equals the loss at the snapshot parameters. The decoder sees `z + stop(e0 - z0)`, the
/// codebook term sees `stop(z0)` and the commitment term sees `stop(e0)`.
pub fn surrogate_loss(
    frame: &[f64],
    shape: FrameShape,
    params: &CodecParams<f64>,
    snap: &QuantizerSnapshot,
) -> Result<f64> {
    let d = params.dims;
    let (cols, rows) = check_frame(frame, shape, &d)?;
    let (mut x, mut h, mut z) = (vec![0.0; d.input()], vec![0.0; d.hidden], vec![0.0; d.latent]);
    let (mut g, mut y) = (vec![0.0; d.hidden], vec![0.0; d.input()]);
    let (mut sq, mut vq) = (0.0, 0.0);
    for py in 0..rows {
        for px in 0..cols {
            let i = py * cols + px;
            gather_patch(frame, shape, &d, px, py, &mut x);
            encode_patch(params, &x, &mut h, &mut z);
            let q: Vec<f64> = (0..d.latent).map(|j| z[j] + (snap.e0[i][j] - snap.z0[i][j])).collect();
            decode_patch(params, &q, &mut g, &mut y);
            sq += y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            vq += sq_dist(&snap.z0[i], params.codebook.entry(snap.codes[i])) + params.beta * sq_dist(&z, &snap.e0[i]);
        }
    }
    Ok(sq / frame.len() as f64 + vq / (cols * rows) as f64)
}
