//! Dense flow and appearance videos plus their little-endian binary containers.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::{read_u32, write_atomic};

pub const FLOW_MAGIC: &[u8; 4] = b"FLV1";
pub const APPEARANCE_MAGIC: &[u8; 4] = b"APP1";

/// Per-pixel (dx, dy) displacement frames in px/frame, interleaved, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVideo {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<f32>>,
}

impl FlowVideo {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            frames: Vec::new(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height * 2
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, frame: Vec<f32>) -> Result<()> {
        if frame.len() != self.frame_len() {
            return Err(Error::ShapeMismatch(format!(
                "flow frame has {} values, expected {}",
                frame.len(),
                self.frame_len()
            )));
        }
        self.frames.push(frame);
        Ok(())
    }

    pub fn at(&self, frame: usize, x: usize, y: usize) -> (f32, f32) {
        let i = (y * self.width + x) * 2;
        (self.frames[frame][i], self.frames[frame][i + 1])
    }

    pub fn max_abs_component(&self) -> f32 {
        self.frames.iter().flatten().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(FLOW_MAGIC, self.width, self.height, &self.frames)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (width, height, frames) = decode(FLOW_MAGIC, 2, bytes)?;
        Ok(Self { width, height, frames })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Single-channel grayscale frames, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceVideo {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<Vec<f32>>,
}

impl AppearanceVideo {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            frames: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(APPEARANCE_MAGIC, self.width, self.height, &self.frames)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (width, height, frames) = decode(APPEARANCE_MAGIC, 1, bytes)?;
        Ok(Self { width, height, frames })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn encode(magic: &[u8; 4], width: usize, height: usize, frames: &[Vec<f32>]) -> Vec<u8> {
    let values: usize = frames.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(16 + values * 4);
    out.extend_from_slice(magic);
    for v in [width, height, frames.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in frames.iter().flatten() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(magic: &[u8; 4], channels: usize, bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f32>>)> {
    let mut r = bytes;
    let mut head = [0u8; 4];
    r.read_exact(&mut head)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &head != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&head)
        )));
    }
    let width = read_u32(&mut r)? as usize;
    let height = read_u32(&mut r)? as usize;
    let count = read_u32(&mut r)? as usize;
    let per_frame = width * height * channels;
    if r.len() != per_frame * count * 4 {
        return Err(Error::Format(format!(
            "payload is {} bytes, header implies {}",
            r.len(),
            per_frame * count * 4
        )));
    }
    let frames = r
        .chunks_exact(per_frame * 4)
        .map(|chunk| {
            chunk
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        })
        .collect();
    Ok((width, height, frames))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_header_layout_is_bit_exact() {
        let mut v = FlowVideo::new(1, 1);
        v.push(vec![1.5, -2.0]).unwrap();
        let bytes = v.to_bytes();
        let mut expected = b"FLV1".to_vec();
        expected.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        expected.extend_from_slice(&1.5f32.to_le_bytes());
        expected.extend_from_slice(&(-2.0f32).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(FlowVideo::from_bytes(&bytes).unwrap(), v);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        let mut v = AppearanceVideo::new(2, 2);
        v.frames.push(vec![0.0, 0.25, 0.5, 1.0]);
        let bytes = v.to_bytes();
        assert!(matches!(FlowVideo::from_bytes(&bytes), Err(Error::Format(_))));
        assert!(matches!(
            AppearanceVideo::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        assert_eq!(AppearanceVideo::from_bytes(&bytes).unwrap(), v);
    }

    #[test]
    fn push_checks_frame_size() {
        let mut v = FlowVideo::new(2, 2);
        assert!(v.push(vec![0.0; 7]).is_err());
        assert!(v.push(vec![0.0; 8]).is_ok());
    }
}
