//! WebAssembly bindings for the browser demo. Every export returns a JSON string.

use serde::Serialize;
use skill_select::domain::{build_library, fill_descriptor, SkillLabel};
use skill_select::harness::{oracle_best, oracle_seeds, ORACLE_SEEDS};
use skill_select::lang::{rank_templates_llm, NgramBackend};
use skill_select::sim::{execute_template, skill_scene, SceneJitter, SkillKind, EPISODE_STEPS, SCENE_SIZE};
use skill_select::{Error, Result};
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct RankedTemplate {
    pub id: usize,
    pub score: f64,
    pub descriptor: String,
}

#[derive(Debug, Serialize)]
pub struct Rollout {
    pub template_id: usize,
    pub descriptor: String,
    pub progress: Vec<f64>,
    pub frame_size: usize,
    /// Row-major grayscale frames, one per step.
    pub frames: Vec<Vec<f32>>,
    pub scene_size: usize,
    /// Row-major 0/1 grid of treated recipient cells at the end of the episode.
    pub coverage: Vec<u8>,
}

#[derive(Debug, Serialize)]
pub struct OracleEntry {
    pub id: usize,
    pub mean_progress: f64,
}

fn label(verb: &str, tool: &str, recipient: &str) -> Result<SkillLabel> {
    if tool.trim().is_empty() && recipient.trim().is_empty() {
        return SkillKind::from_verb(verb)
            .map(SkillKind::label)
            .ok_or_else(|| Error::InvalidSkill(format!("unknown skill {verb:?}")));
    }
    SkillLabel::new(verb, tool, recipient)
}

fn scene_label(verb: &str) -> Result<SkillLabel> {
    label(verb, "", "")
}

/// Language-model ranking of all templates, best first.
pub fn rank(verb: &str, tool: &str, recipient: &str) -> Result<Vec<RankedTemplate>> {
    let skill = label(verb, tool, recipient)?;
    let library = build_library();
    let scores = rank_templates_llm(&NgramBackend::builtin(), &skill, &library)?;
    scores
        .ranked_ids()
        .into_iter()
        .map(|id| {
            Ok(RankedTemplate {
                id,
                score: scores.get(id).unwrap_or(f64::NAN),
                descriptor: fill_descriptor(&library[id], &skill)?,
            })
        })
        .collect()
}

/// Executes one template in a seeded variation of a built-in skill scene.
pub fn rollout(verb: &str, template_id: usize, variation: u64) -> Result<Rollout> {
    let skill = scene_label(verb)?;
    let library = build_library();
    let template = library
        .get(template_id)
        .ok_or_else(|| Error::InvalidConfig(format!("template id {template_id} is out of range")))?;
    let scene = skill_scene(&skill, SceneJitter::VARIATION, 100 + variation)?;
    let ex = execute_template(&scene, template, EPISODE_STEPS, 200 + variation)?;
    Ok(Rollout {
        template_id,
        descriptor: fill_descriptor(template, &skill)?,
        progress: ex.progress.values,
        frame_size: ex.appearance.width,
        frames: ex.appearance.frames,
        scene_size: SCENE_SIZE,
        coverage: ex.final_scene.coverage.iter().map(|&c| c as u8).collect(),
    })
}

/// All templates ranked by mean simulated progress on the same scene `rollout` uses.
pub fn oracle(verb: &str, variation: u64) -> Result<Vec<OracleEntry>> {
    let skill = scene_label(verb)?;
    let scene = skill_scene(&skill, SceneJitter::VARIATION, 100 + variation)?;
    let ranking = oracle_best(
        &build_library(),
        &scene,
        &oracle_seeds(300 + variation, ORACLE_SEEDS),
        EPISODE_STEPS,
    )?;
    Ok(ranking
        .ranking
        .iter()
        .map(|&id| OracleEntry {
            id,
            mean_progress: ranking.progress_of(id).unwrap_or(f64::NAN),
        })
        .collect())
}

fn to_js<T: Serialize>(r: Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = rankTemplates)]
pub fn rank_templates_js(verb: &str, tool: &str, recipient: &str) -> Result<String, JsError> {
    to_js(rank(verb, tool, recipient))
}

#[wasm_bindgen(js_name = rollout)]
pub fn rollout_js(verb: &str, template_id: usize, variation: u32) -> Result<String, JsError> {
    to_js(rollout(verb, template_id, variation as u64))
}

#[wasm_bindgen(js_name = oracleRanking)]
pub fn oracle_js(verb: &str, variation: u32) -> Result<String, JsError> {
    to_js(oracle(verb, variation as u64))
}
