use serde::{Deserialize, Serialize};

use super::{combine, minmax_normalize, select, top_k, Orientation, ScoreVector, DEFAULT_K, DEFAULT_LAMBDA};
use crate::appearance::score_template_appearance;
use crate::codec::FlowCodec;
use crate::domain::{SkillLabel, Template};
use crate::error::{Error, Result, Stage, StageExt};
use crate::flow_score::{mean_histogram_distance, video_histogram};
use crate::harness::{oracle_best, oracle_seeds, OracleRanking, ORACLE_SEEDS};
use crate::lang::{rank_templates_llm, ContinuationScorer};
use crate::retrieval::{retrieve, DualEncoder, RetrievalHit, DEFAULT_M};
use crate::sim::{execute_template, skill_scene, DemoRecord, ProgressTrace, SceneJitter, EPISODE_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub lambda: f64,
    pub k: usize,
    /// Demonstrations retrieved per skill.
    pub m: usize,
    pub steps: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            k: DEFAULT_K,
            m: DEFAULT_M,
            steps: EPISODE_STEPS,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self, library_len: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be a non-negative number, got {}",
                self.lambda
            )));
        }
        if self.k == 0 || self.k > library_len {
            return Err(Error::InvalidConfig(format!(
                "k must be in 1..={library_len}, got {}",
                self.k
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("m must be at least 1".into()));
        }
        if self.steps < 2 {
            return Err(Error::InvalidConfig("steps must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSeeds {
    /// Scene variation drawn for the robot.
    pub scene: u64,
    /// Candidate execution.
    pub execution: u64,
    /// First of the oracle rollout seeds.
    pub oracle: u64,
}

/// Everything computed for one skill, in JSON-friendly form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub skill: SkillLabel,
    /// Normalized language scores of every template.
    pub llm_scores: ScoreVector,
    pub candidates: Vec<usize>,
    /// Raw mean histogram distances of the candidates.
    pub flow_scores: ScoreVector,
    /// Raw mean appearance cosine distances of the candidates.
    pub appearance_scores: ScoreVector,
    pub llm_normalized: ScoreVector,
    pub flow_normalized: ScoreVector,
    pub combined: ScoreVector,
    pub selected_id: usize,
    /// Best template of the whole library by simulated progress.
    pub oracle_id: usize,
    /// Best candidate by simulated progress.
    pub oracle_candidate_id: usize,
    pub llm_selected_id: usize,
    pub flow_selected_id: usize,
    pub appearance_selected_id: usize,
    pub retrieved: Vec<RetrievalHit>,
    pub lambda: f64,
    pub seeds: SelectionSeeds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRun {
    pub id: usize,
    pub progress: ProgressTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub report: SelectionReport,
    pub runs: Vec<CandidateRun>,
    pub oracle: OracleRanking,
}

impl PipelineOutput {
    pub fn run(&self, id: usize) -> Option<&CandidateRun> {
        self.runs.iter().find(|r| r.id == id)
    }
}

/// Min-max over the candidates; a single candidate sits at 0.5.
fn normalize_candidates(v: &ScoreVector) -> Result<ScoreVector> {
    if v.len() == 1 {
        return Ok(ScoreVector {
            scores: vec![0.5],
            normalization: Some((v.scores[0], v.scores[0])),
            ..v.clone()
        });
    }
    minmax_normalize(v)
}

/// Language ranking, top-k candidates, simulated execution, demo retrieval, flow and appearance
/// scoring, normalization, fusion and selection for one skill.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline<L, E>(
    skill: &SkillLabel,
    library: &[Template],
    corpus: &[DemoRecord],
    codec: &FlowCodec,
    llm: &L,
    encoder: &E,
    config: &PipelineConfig,
    seeds: SelectionSeeds,
) -> Result<PipelineOutput>
where
    L: ContinuationScorer + ?Sized,
    E: DualEncoder + ?Sized,
{
    config.validate(library.len()).stage(Stage::Candidates)?;
    let llm_scores = rank_templates_llm(llm, skill, library).stage(Stage::LanguageScore)?;
    let candidates = top_k(&llm_scores, config.k).stage(Stage::Candidates)?;

    let scene = skill_scene(skill, SceneJitter::VARIATION, seeds.scene).stage(Stage::Execute)?;
    let mut executions = Vec::with_capacity(candidates.len());
    for &id in &candidates {
        let template = library
            .iter()
            .find(|t| t.id == id)
            .ok_or(Error::IdMismatch)
            .stage(Stage::Execute)?;
        executions.push(execute_template(&scene, template, config.steps, seeds.execution).stage(Stage::Execute)?);
    }

    let retrieved = retrieve(skill, corpus, encoder, config.m).stage(Stage::Retrieve)?;
    let demos: Vec<&DemoRecord> = retrieved.iter().map(|h| &corpus[h.record_id]).collect();

    let demo_hists = demos
        .iter()
        .map(|d| video_histogram(&d.video, codec))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::FlowScore)?;
    let flow_raw = executions
        .iter()
        .map(|ex| mean_histogram_distance(&video_histogram(&ex.video, codec)?, &demo_hists))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::FlowScore)?;
    let flow_scores =
        ScoreVector::new(candidates.clone(), flow_raw, Orientation::LowerIsBetter).stage(Stage::FlowScore)?;

    let demo_frames: Vec<_> = demos.iter().map(|d| &d.appearance).collect();
    let appearance_raw = executions
        .iter()
        .map(|ex| score_template_appearance(&ex.appearance, &demo_frames))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::AppearanceScore)?;
    let appearance_scores = ScoreVector::new(candidates.clone(), appearance_raw, Orientation::LowerIsBetter)
        .stage(Stage::AppearanceScore)?;

    let candidate_llm = llm_scores.subset(&candidates).stage(Stage::Fusion)?;
    let llm_normalized = normalize_candidates(&candidate_llm).stage(Stage::Fusion)?;
    let flow_normalized = normalize_candidates(&flow_scores).stage(Stage::Fusion)?;
    let combined = combine(&llm_normalized, &flow_normalized, config.lambda).stage(Stage::Fusion)?;
    let selected_id = select(&combined).stage(Stage::Fusion)?;

    let oracle =
        oracle_best(library, &scene, &oracle_seeds(seeds.oracle, ORACLE_SEEDS), config.steps).stage(Stage::Oracle)?;
    let oracle_candidate_id = oracle
        .best_among(&candidates)
        .ok_or(Error::IdMismatch)
        .stage(Stage::Oracle)?;

    let report = SelectionReport {
        skill: skill.clone(),
        llm_selected_id: candidates[0],
        flow_selected_id: select(&flow_scores).stage(Stage::FlowScore)?,
        appearance_selected_id: select(&appearance_scores).stage(Stage::AppearanceScore)?,
        llm_scores,
        candidates: candidates.clone(),
        flow_scores,
        appearance_scores,
        llm_normalized,
        flow_normalized,
        combined,
        selected_id,
        oracle_id: oracle.best(),
        oracle_candidate_id,
        retrieved,
        lambda: config.lambda,
        seeds,
    };
    let runs = candidates
        .iter()
        .zip(executions)
        .map(|(&id, ex)| CandidateRun {
            id,
            progress: ex.progress,
        })
        .collect();
    Ok(PipelineOutput { report, runs, oracle })
}

impl SelectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
