use std::path::Path;

use super::{Codebook, CodecDims, Dense, FlowCodec};
use crate::error::{Error, Result};
use crate::fsio::{read_u32, write_atomic};

pub const CODEC_MAGIC: &[u8; 4] = b"VQC1";

// Layout: magic, u32 patch, channels, hidden, latent, codes, f32 beta, then f32 tensors
// enc1.w enc1.b enc2.w enc2.b dec1.w dec1.b dec2.w dec2.b codebook, all little-endian.
impl FlowCodec {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = CODEC_MAGIC.to_vec();
        let d = self.dims;
        for v in [d.patch, d.channels, d.hidden, d.latent, d.codes] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.beta.to_le_bytes());
        for t in self.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != CODEC_MAGIC {
            return Err(Error::Format("not a VQC1 codec file".into()));
        }
        let mut r = &bytes[4..];
        let mut dim = || read_u32(&mut r).map(|v| v as usize);
        let dims = CodecDims {
            patch: dim()?,
            channels: dim()?,
            hidden: dim()?,
            latent: dim()?,
            codes: dim()?,
        };
        let mut floats = r
            .chunks(4)
            .map(|b| {
                <[u8; 4]>::try_from(b)
                    .map(f32::from_le_bytes)
                    .map_err(|_| Error::Format("truncated tensor data".into()))
            })
            .collect::<Result<Vec<f32>>>()?
            .into_iter();
        let beta = floats.next().ok_or_else(|| Error::Format("missing beta".into()))?;
        let mut take = |n: usize| -> Result<Vec<f32>> {
            let v: Vec<f32> = floats.by_ref().take(n).collect();
            if v.len() != n {
                return Err(Error::Format("truncated tensor data".into()));
            }
            Ok(v)
        };
        let mut dense = |i: usize, o: usize| -> Result<Dense<f32>> {
            Ok(Dense {
                inputs: i,
                outputs: o,
                w: take(i * o)?,
                b: take(o)?,
            })
        };
        let enc1 = dense(dims.input(), dims.hidden)?;
        let enc2 = dense(dims.hidden, dims.latent)?;
        let dec1 = dense(dims.latent, dims.hidden)?;
        let dec2 = dense(dims.hidden, dims.input())?;
        let codebook = Codebook::new(dims.latent, take(dims.codes * dims.latent)?)?;
        if floats.next().is_some() {
            return Err(Error::Format("trailing bytes after codebook".into()));
        }
        let codec = FlowCodec {
            dims,
            beta,
            enc1,
            enc2,
            dec1,
            dec2,
            codebook,
        };
        codec.validate()?;
        Ok(codec)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
