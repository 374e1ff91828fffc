//! Candidate-set normalization, score fusion and final selection.

mod pipeline;

pub use pipeline::{run_pipeline, CandidateRun, PipelineConfig, PipelineOutput, SelectionReport, SelectionSeeds};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight of the language term in the fused score.
pub const DEFAULT_LAMBDA: f64 = 0.1;
/// Number of language-model candidates that get executed.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
}

/// Scores keyed by template id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub ids: Vec<usize>,
    pub scores: Vec<f64>,
    pub orientation: Orientation,
    /// `(min, max)` used by [`minmax_normalize`], if applied.
    pub normalization: Option<(f64, f64)>,
}

impl ScoreVector {
    pub fn new(ids: Vec<usize>, scores: Vec<f64>, orientation: Orientation) -> Result<Self> {
        if ids.len() != scores.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} ids for {} scores",
                ids.len(),
                scores.len()
            )));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate template id in score vector".into()));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            ids,
            scores,
            orientation,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|p| self.scores[p])
    }

    /// Restriction to `ids`, in that order.
    pub fn subset(&self, ids: &[usize]) -> Result<Self> {
        let scores = ids
            .iter()
            .map(|&id| self.get(id).ok_or(Error::IdMismatch))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ids.to_vec(), scores, self.orientation)
    }

    /// Ids ordered best first; ties go to the lower id.
    pub fn ranked_ids(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (self.scores[a], self.scores[b]);
            let by_score = match self.orientation {
                Orientation::HigherIsBetter => sb.total_cmp(&sa),
                Orientation::LowerIsBetter => sa.total_cmp(&sb),
            };
            by_score.then(self.ids[a].cmp(&self.ids[b]))
        });
        order.into_iter().map(|i| self.ids[i]).collect()
    }
}

/// Ids of the `k` best scores, best first; ties go to the lower id.
pub fn top_k(scores: &ScoreVector, k: usize) -> Result<Vec<usize>> {
    if k > scores.len() {
        return Err(Error::KTooLarge { k, len: scores.len() });
    }
    let mut ranked = scores.ranked_ids();
    ranked.truncate(k);
    Ok(ranked)
}

/// `(s - min) / (max - min)`; a constant vector maps to 0.5. Orientation is preserved.
pub fn minmax_normalize(scores: &ScoreVector) -> Result<ScoreVector> {
    if scores.len() < 2 {
        return Err(Error::TooFewEntries(scores.len()));
    }
    let min = scores.scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let normalized = if max > min {
        scores.scores.iter().map(|s| (s - min) / (max - min)).collect()
    } else {
        vec![0.5; scores.len()]
    };
    Ok(ScoreVector {
        ids: scores.ids.clone(),
        scores: normalized,
        orientation: scores.orientation,
        normalization: Some((min, max)),
    })
}

/// `lambda * s_llm + (1 - s_flow)` per id, in the order of `llm`.
pub fn combine(llm: &ScoreVector, flow: &ScoreVector, lambda: f64) -> Result<ScoreVector> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    if llm.len() != flow.len() {
        return Err(Error::IdMismatch);
    }
    let scores = llm
        .ids
        .iter()
        .zip(&llm.scores)
        .map(|(&id, &s)| flow.get(id).map(|f| lambda * s + (1.0 - f)).ok_or(Error::IdMismatch))
        .collect::<Result<Vec<_>>>()?;
    ScoreVector::new(llm.ids.clone(), scores, Orientation::HigherIsBetter)
}

/// Best id of a score vector; ties go to the lower id.
pub fn select(scores: &ScoreVector) -> Result<usize> {
    scores.ranked_ids().first().copied().ok_or(Error::Empty)
}
