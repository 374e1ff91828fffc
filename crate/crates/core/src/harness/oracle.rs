use serde::{Deserialize, Serialize};

use crate::domain::Template;
use crate::error::{Error, Result};
use crate::sim::{execute_template, Scene};

/// Rollout seeds averaged per template.
pub const ORACLE_SEEDS: usize = 3;

/// Template ids ranked by mean final progress, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRanking {
    pub ranking: Vec<usize>,
    /// Mean final progress, aligned with the library passed in.
    pub ids: Vec<usize>,
    pub mean_progress: Vec<f64>,
}

impl OracleRanking {
    pub fn best(&self) -> usize {
        self.ranking[0]
    }

    pub fn progress_of(&self, id: usize) -> Option<f64> {
        self.ids.iter().position(|&i| i == id).map(|p| self.mean_progress[p])
    }

    /// 1-based position of `id` in the ranking.
    pub fn rank_of(&self, id: usize) -> Option<usize> {
        self.ranking.iter().position(|&i| i == id).map(|p| p + 1)
    }

    /// Best of `ids` by mean progress; ties go to the lower id.
    pub fn best_among(&self, ids: &[usize]) -> Option<usize> {
        self.ranking.iter().copied().find(|id| ids.contains(id))
    }
}

/// Executes every template from `scene` once per seed and ranks by mean final progress;
/// ties go to the lower id.
pub fn oracle_best(library: &[Template], scene: &Scene, seeds: &[u64], steps: usize) -> Result<OracleRanking> {
    if library.is_empty() {
        return Err(Error::Empty);
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("oracle needs at least one seed".into()));
    }
    let mut mean_progress = Vec::with_capacity(library.len());
    for t in library {
        let mut sum = 0.0;
        for &s in seeds {
            sum += execute_template(scene, t, steps, s)?.progress.final_value();
        }
        mean_progress.push(sum / seeds.len() as f64);
    }
    let ids: Vec<usize> = library.iter().map(|t| t.id).collect();
    let mut order: Vec<usize> = (0..library.len()).collect();
    order.sort_by(|&a, &b| mean_progress[b].total_cmp(&mean_progress[a]).then(ids[a].cmp(&ids[b])));
    Ok(OracleRanking {
        ranking: order.into_iter().map(|i| ids[i]).collect(),
        ids,
        mean_progress,
    })
}

/// `base, base + 1, ...` for `n` seeds.
pub fn oracle_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}
