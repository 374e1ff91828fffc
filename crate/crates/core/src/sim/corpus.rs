//! Synthetic human-demonstration corpus standing in for segmented kitchen videos.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{execute_waypoints, skill_scene, AppearanceVideo, FlowVideo, SceneJitter, SkillKind, EPISODE_STEPS};
use crate::domain::{build_library, trajectory_waypoints, ForceLevel, Point2, SkillLabel, Template, TrajectoryKind};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;

/// Std-dev in px of the per-waypoint hand jitter in expert demonstrations.
pub const DEMO_JITTER_PX: f64 = 1.0;
/// Cycles per episode of the sinusoids that make up the hand wobble.
const WOBBLE_CYCLES: [f64; 2] = [0.5, 1.0];

/// Smooth per-axis wobble: equal-amplitude sinusoids with random phases, scaled so each
/// waypoint offset has standard deviation `sigma` (over the phase distribution).
fn hand_wobble(waypoints: &mut [Point2], sigma: f64, rng: &mut ChaCha8Rng) {
    let amp = sigma * (2.0 / WOBBLE_CYCLES.len() as f64).sqrt();
    let phases: Vec<[f64; 2]> = WOBBLE_CYCLES
        .iter()
        .map(|_| [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)])
        .collect();
    let n = waypoints.len().max(2) as f64 - 1.0;
    for (i, w) in waypoints.iter_mut().enumerate() {
        let t = i as f64 / n;
        let (mut dx, mut dy) = (0.0, 0.0);
        for (f, ph) in WOBBLE_CYCLES.iter().zip(&phases) {
            dx += amp * (TAU * f * t + ph[0]).sin();
            dy += amp * (TAU * f * t + ph[1]).sin();
        }
        *w = *w + Point2::new(dx, dy);
    }
}

const DISTRACTOR_VERBS: &[&str] = &["cut", "peel", "slice", "scrub", "stir", "wipe", "scrape", "spread"];
const TOOLS: &[&str] = &[
    "cloth",
    "sponge",
    "knife",
    "bench scraper",
    "spatula",
    "spoon",
    "peeler",
];
const RECIPIENTS: &[&str] = &["plate", "cutting board", "pan", "pizza", "carrot", "bread", "bowl"];

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRecord {
    pub video: FlowVideo,
    pub appearance: AppearanceVideo,
    pub text: String,
    pub objects: BTreeSet<String>,
    pub expert: bool,
}

/// On-disk metadata next to the two video files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoMeta {
    pub text: String,
    pub objects: BTreeSet<String>,
    pub expert: bool,
}

impl DemoRecord {
    pub fn meta(&self) -> DemoMeta {
        DemoMeta {
            text: self.text.clone(),
            objects: self.objects.clone(),
            expert: self.expert,
        }
    }
}

fn objects_of(label: &SkillLabel) -> BTreeSet<String> {
    [label.tool.clone(), label.recipient.clone()].into_iter().collect()
}

/// Expert technique for a verb; verbs outside the catalog fall back to small circles.
fn expert_for(label: &SkillLabel) -> Template {
    SkillKind::from_verb(&label.verb)
        .map(SkillKind::expert_template)
        .unwrap_or_else(|| Template::new(TrajectoryKind::SmallCircle, ForceLevel::Medium))
}

fn record(
    label: &SkillLabel,
    template: &Template,
    jitter_px: f64,
    rng: &mut ChaCha8Rng,
    expert: bool,
) -> Result<DemoRecord> {
    let scene = skill_scene(label, SceneJitter::DEMO, rng.random())?;
    let mut waypoints = trajectory_waypoints(template.trajectory, &scene.recipient, EPISODE_STEPS)?;
    if jitter_px > 0.0 {
        hand_wobble(&mut waypoints, jitter_px, rng);
    }
    let ex = execute_waypoints(&scene, &waypoints, template.force, rng.random())?;
    Ok(DemoRecord {
        video: ex.video,
        appearance: ex.appearance,
        text: label.caption(),
        objects: objects_of(label),
        expert,
    })
}

/// For every skill: `per_skill` expert demonstrations followed by `per_skill` distractors.
pub fn synth_demo_corpus(skills: &[SkillLabel], per_skill: usize, seed: u64) -> Result<Vec<DemoRecord>> {
    if per_skill == 0 {
        return Err(Error::InvalidConfig("per_skill must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let library = build_library();
    let mut out = Vec::with_capacity(skills.len() * per_skill * 2);
    for skill in skills {
        skill.validate()?;
        let expert = expert_for(skill);
        for _ in 0..per_skill {
            out.push(record(skill, &expert, DEMO_JITTER_PX, &mut rng, true)?);
        }
        for _ in 0..per_skill {
            let verb = loop {
                let v = *DISTRACTOR_VERBS.choose(&mut rng).expect("non-empty");
                if v != skill.verb {
                    break v;
                }
            };
            let tool = *TOOLS.choose(&mut rng).expect("non-empty");
            let recipient = *RECIPIENTS.choose(&mut rng).expect("non-empty");
            let label = SkillLabel::new(verb, tool, recipient)?;
            let template = library.choose(&mut rng).expect("non-empty").clone();
            out.push(record(&label, &template, DEMO_JITTER_PX, &mut rng, false)?);
        }
    }
    Ok(out)
}

/// Flow frames from hand-held rollouts (random templates with hand wobble) in varied catalog
/// scenes, truncated to `count`.
pub fn flow_training_frames(count: usize, seed: u64) -> Result<Vec<Vec<f32>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let library = build_library();
    let mut frames = Vec::with_capacity(count);
    while frames.len() < count {
        let skill = *SkillKind::ALL.choose(&mut rng).expect("non-empty");
        let template = library.choose(&mut rng).expect("non-empty");
        let scene = skill_scene(&skill.label(), SceneJitter::TRAINING, rng.random())?;
        let mut waypoints = trajectory_waypoints(template.trajectory, &scene.recipient, EPISODE_STEPS)?;
        hand_wobble(&mut waypoints, DEMO_JITTER_PX, &mut rng);
        let ex = execute_waypoints(&scene, &waypoints, template.force, rng.random())?;
        let take = (count - frames.len()).min(ex.video.len());
        frames.extend(ex.video.frames.into_iter().take(take));
    }
    Ok(frames)
}

pub fn write_corpus(records: &[DemoRecord], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, rec) in records.iter().enumerate() {
        let sub = dir.join(format!("rec_{i:05}"));
        fs::create_dir_all(&sub)?;
        rec.video.write(&sub.join("flow.flv"))?;
        rec.appearance.write(&sub.join("appearance.app"))?;
        write_atomic(
            &sub.join("meta.json"),
            serde_json::to_string_pretty(&rec.meta())?.as_bytes(),
        )?;
    }
    Ok(())
}

/// Loads records from `rec_*` subdirectories in name order.
pub fn read_corpus(dir: &Path) -> Result<Vec<DemoRecord>> {
    let mut subdirs: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("rec_"))
        })
        .collect();
    subdirs.sort();
    subdirs
        .iter()
        .map(|sub| {
            let meta: DemoMeta = serde_json::from_slice(&fs::read(sub.join("meta.json"))?)?;
            Ok(DemoRecord {
                video: FlowVideo::read(&sub.join("flow.flv"))?,
                appearance: AppearanceVideo::read(&sub.join("appearance.app"))?,
                text: meta.text,
                objects: meta.objects,
                expert: meta.expert,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_skill_three_per_skill() {
        let wipe = SkillKind::Wipe.label();
        let corpus = synth_demo_corpus(std::slice::from_ref(&wipe), 3, 42).unwrap();
        assert_eq!(corpus.len(), 6);
        assert_eq!(corpus.iter().filter(|r| r.expert).count(), 3);
        for r in corpus.iter().filter(|r| r.expert) {
            assert!(r.objects.contains("cloth") && r.objects.contains("plate"));
            assert_eq!(r.text, "wipe the plate with the cloth");
        }
        for r in &corpus {
            assert!(!r.objects.is_empty());
            assert!(r.objects.iter().all(|o| r.text.contains(o.as_str())));
            assert_eq!(r.video.len(), EPISODE_STEPS - 1);
        }
    }

    #[test]
    fn wobble_has_unit_spread_and_small_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut sq, mut n, mut max_step) = (0.0, 0.0, 0.0f64);
        for _ in 0..400 {
            let mut w = vec![Point2::new(0.0, 0.0); EPISODE_STEPS];
            hand_wobble(&mut w, 1.0, &mut rng);
            for p in &w {
                sq += p.x * p.x + p.y * p.y;
                n += 2.0;
            }
            for pair in w.windows(2) {
                max_step = max_step.max((pair[1] - pair[0]).norm());
            }
        }
        let sd = (sq / n).sqrt();
        assert!((sd - 1.0).abs() < 0.05, "sd {sd}");
        assert!(max_step < 0.75, "max step {max_step}");
    }

    #[test]
    fn corpus_is_seeded() {
        let skills = [SkillKind::Stir.label()];
        let a = synth_demo_corpus(&skills, 2, 9).unwrap();
        let b = synth_demo_corpus(&skills, 2, 9).unwrap();
        assert_eq!(a, b);
        let c = synth_demo_corpus(&skills, 2, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_per_skill_is_rejected() {
        assert!(synth_demo_corpus(&[SkillKind::Stir.label()], 0, 1).is_err());
    }

    #[test]
    fn corpus_directory_round_trip() {
        let corpus = synth_demo_corpus(&[SkillKind::Scrape.label()], 2, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&corpus, dir.path()).unwrap();
        assert!(dir.path().join("rec_00000/meta.json").exists());
        assert_eq!(read_corpus(dir.path()).unwrap(), corpus);
    }
}
