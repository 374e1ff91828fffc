//! Bag-of-flow-codes histograms and histogram-distance scoring.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{encode_codes, CodeGrid, FlowCodec, FrameShape};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::sim::FlowVideo;

/// Tolerance on the bin sum accepted by [`histogram_distance`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Normalized distribution of codebook indices over every cell of every frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowHistogram {
    pub bins: Vec<f64>,
    pub total_codes: u64,
}

impl FlowHistogram {
    pub fn from_codes(grids: &[CodeGrid], bins: usize) -> Result<Self> {
        let mut counts = vec![0u64; bins];
        let mut total = 0u64;
        for grid in grids {
            for &c in &grid.codes {
                let slot = counts
                    .get_mut(c as usize)
                    .ok_or_else(|| Error::ShapeMismatch(format!("code {c} outside {bins} bins")))?;
                *slot += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::EmptyVideo);
        }
        Ok(Self {
            bins: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            total_codes: total,
        })
    }

    pub fn sum(&self) -> f64 {
        self.bins.iter().sum()
    }
}

pub fn video_histogram(video: &FlowVideo, codec: &FlowCodec) -> Result<FlowHistogram> {
    if video.is_empty() {
        return Err(Error::EmptyVideo);
    }
    let shape = FrameShape {
        width: video.width,
        height: video.height,
    };
    let grids = video
        .frames
        .iter()
        .map(|f| encode_codes(f, shape, codec))
        .collect::<Result<Vec<_>>>()?;
    FlowHistogram::from_codes(&grids, codec.dims.codes)
}

fn check_normalized(h: &FlowHistogram) -> Result<()> {
    if h.bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::NonFiniteInput);
    }
    let s = h.sum();
    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::UnnormalizedInput(s));
    }
    Ok(())
}

/// Euclidean distance between two normalized histograms; lies in `[0, sqrt(2)]`.
pub fn histogram_distance(a: &FlowHistogram, b: &FlowHistogram) -> Result<f64> {
    check_normalized(a)?;
    check_normalized(b)?;
    if a.bins.len() != b.bins.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} bins",
            a.bins.len(),
            b.bins.len()
        )));
    }
    Ok(a.bins
        .iter()
        .zip(&b.bins)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Arithmetic mean of the distances from `exec` to each demo histogram.
pub fn mean_histogram_distance(exec: &FlowHistogram, demos: &[FlowHistogram]) -> Result<f64> {
    if demos.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    let mut sum = 0.0;
    for d in demos {
        sum += histogram_distance(exec, d)?;
    }
    Ok(sum / demos.len() as f64)
}

/// Flow score of a robot execution against retrieved demonstrations; lower is better.
pub fn score_template_flow(exec: &FlowVideo, demos: &[FlowVideo], codec: &FlowCodec) -> Result<f64> {
    if demos.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    let exec_h = video_histogram(exec, codec)?;
    let demo_h = demos
        .iter()
        .map(|d| video_histogram(d, codec))
        .collect::<Result<Vec<_>>>()?;
    mean_histogram_distance(&exec_h, &demo_h)
}

/// One histogram per line after a header of bin indices; the last column is `total_codes`.
pub fn histograms_to_csv(hists: &[FlowHistogram]) -> Result<String> {
    let bins = hists.first().map_or(crate::codec::CODEBOOK_SIZE, |h| h.bins.len());
    let mut out: Vec<String> = (0..bins).map(|i| i.to_string()).collect();
    out.push("total_codes".into());
    let mut text = out.join(",");
    text.push('\n');
    for h in hists {
        if h.bins.len() != bins {
            return Err(Error::ShapeMismatch("histograms with different bin counts".into()));
        }
        let mut row: Vec<String> = h.bins.iter().map(|b| b.to_string()).collect();
        row.push(h.total_codes.to_string());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    Ok(text)
}

pub fn histograms_from_csv(text: &str) -> Result<Vec<FlowHistogram>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("missing header".into()))?;
    let columns = header.split(',').count();
    if columns < 2 || header.split(',').next_back() != Some("total_codes") {
        return Err(Error::Format("header must list bin indices then total_codes".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != columns {
                return Err(Error::Format(format!(
                    "row has {} cells, expected {columns}",
                    cells.len()
                )));
            }
            let bins = cells[..columns - 1]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|e| Error::Format(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let total_codes = cells[columns - 1]
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::Format(e.to_string()))?;
            Ok(FlowHistogram { bins, total_codes })
        })
        .collect()
}

pub fn write_histograms(path: &Path, hists: &[FlowHistogram]) -> Result<()> {
    write_atomic(path, histograms_to_csv(hists)?.as_bytes())
}

pub fn read_histograms(path: &Path) -> Result<Vec<FlowHistogram>> {
    histograms_from_csv(&std::fs::read_to_string(path)?)
}
