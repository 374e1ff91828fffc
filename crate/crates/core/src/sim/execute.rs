use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    pixel_center, position_variance, AppearanceVideo, FlowVideo, Paint, Scene, APPEARANCE_SIZE, EDGE_BAND, FLOW_SIZE,
    MAX_TOOL_SPEED, SCENE_SIZE,
};
use crate::domain::{trajectory_waypoints, ForceLevel, Point2, Template};
use crate::error::{Error, Result};

/// Radius in px of the mark a dragged particle leaves.
const PARTICLE_STAMP: f64 = 2.5;
/// Std-dev of the isotropic scatter of a dragged particle, relative to the push length.
const PARTICLE_SCATTER: f64 = 0.35;

/// Task progress before the first frame and after each frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressTrace {
    pub values: Vec<f64>,
}

impl ProgressTrace {
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub video: FlowVideo,
    pub appearance: AppearanceVideo,
    pub progress: ProgressTrace,
    pub final_scene: Scene,
}

pub fn execute_template(scene: &Scene, template: &Template, steps: usize, seed: u64) -> Result<Execution> {
    let waypoints = trajectory_waypoints(template.trajectory, &scene.recipient, steps)?;
    execute_waypoints(scene, &waypoints, template.force, seed)
}

/// Runs the tool along `waypoints` (one flow frame per consecutive pair).
pub fn execute_waypoints(scene: &Scene, waypoints: &[Point2], force: ForceLevel, seed: u64) -> Result<Execution> {
    scene.validate()?;
    if waypoints.len() < 2 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 2 waypoints, got {}",
            waypoints.len()
        )));
    }
    if waypoints.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let mut scene = scene.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficient = force.coefficient();
    let recipient_cells: Vec<usize> = scene.recipient_cells().collect();

    scene.tool.position = waypoints[0];
    let mut video = FlowVideo::new(FLOW_SIZE, FLOW_SIZE);
    let mut appearance = AppearanceVideo::new(APPEARANCE_SIZE, APPEARANCE_SIZE);
    let mut progress = vec![scene.progress()?];
    appearance.frames.push(render(&scene));

    let mut full = vec![0.0f64; SCENE_SIZE * SCENE_SIZE * 2];
    for &target in &waypoints[1..] {
        full.iter_mut().for_each(|v| *v = 0.0);
        let from = scene.tool.position;
        let mut step = target - from;
        let len = step.norm();
        if len > MAX_TOOL_SPEED {
            step = step.scale(MAX_TOOL_SPEED / len);
        }
        scene.tool.position = from + step;

        // particles the tool lands on are dragged along with part of its motion
        let push = step.scale(coefficient);
        for i in 0..scene.particles.len() {
            let old = scene.particles[i].position;
            if !scene.tool.covers(old) {
                continue;
            }
            let scatter = PARTICLE_SCATTER * push.norm();
            let jitter = Point2::new(scatter * standard_normal(&mut rng), scatter * standard_normal(&mut rng));
            let mut delta = push + jitter;
            if delta.norm() > MAX_TOOL_SPEED {
                delta = delta.scale(MAX_TOOL_SPEED / delta.norm());
            }
            let new = scene.clamp_to_recipient(old + delta);
            scene.particles[i].position = new;
            let moved = new - old;
            if let Some(px) = pixel_index(new) {
                full[2 * px] = moved.x;
                full[2 * px + 1] = moved.y;
            }
            if scene.paint == Paint::Particles && moved.norm() > 0.0 {
                stamp(&mut scene, &recipient_cells, old + moved.scale(0.5));
                stamp(&mut scene, &recipient_cells, new);
            }
        }

        // the arm and tool translate rigidly and hide what lies beneath them
        for px in 0..SCENE_SIZE * SCENE_SIZE {
            let c = pixel_center(px);
            if scene.tool.arm_covers(c) || scene.tool.covers(c) {
                full[2 * px] = step.x;
                full[2 * px + 1] = step.y;
            }
        }

        if scene.paint == Paint::Tool {
            let tool = scene.tool.clone();
            for &cell in &recipient_cells {
                if !scene.coverage[cell] && tool.covers(pixel_center(cell)) && rng.random::<f64>() < coefficient {
                    scene.coverage[cell] = true;
                }
            }
        }

        video.push(downsample(&full))?;
        progress.push(scene.progress()?);
        appearance.frames.push(render(&scene));
    }

    Ok(Execution {
        video,
        appearance,
        progress: ProgressTrace { values: progress },
        final_scene: scene,
    })
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn pixel_index(p: Point2) -> Option<usize> {
    let (x, y) = (p.x.floor(), p.y.floor());
    let s = SCENE_SIZE as f64;
    if x < 0.0 || y < 0.0 || x >= s || y >= s {
        return None;
    }
    Some(y as usize * SCENE_SIZE + x as usize)
}

fn stamp(scene: &mut Scene, recipient_cells: &[usize], at: Point2) {
    for &cell in recipient_cells {
        if pixel_center(cell).distance(at) <= PARTICLE_STAMP {
            scene.coverage[cell] = true;
        }
    }
}

/// 2x2 box average from the scene grid to the flow grid, cast to f32.
fn downsample(full: &[f64]) -> Vec<f32> {
    let mut out = vec![0.0f32; FLOW_SIZE * FLOW_SIZE * 2];
    for y in 0..FLOW_SIZE {
        for x in 0..FLOW_SIZE {
            for ch in 0..2 {
                let mut sum = 0.0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    sum += full[2 * ((2 * y + dy) * SCENE_SIZE + 2 * x + dx) + ch];
                }
                out[2 * (y * FLOW_SIZE + x) + ch] = (sum * 0.25) as f32;
            }
        }
    }
    out
}

const RECIPIENT_SHADE: f32 = 0.4;
const PARTICLE_SHADE: f32 = 0.7;
const TOOL_SHADE: f32 = 1.0;

/// 16x16 grayscale render sampled at 4 px cell centers.
fn render(scene: &Scene) -> Vec<f32> {
    let cell = (SCENE_SIZE / APPEARANCE_SIZE) as f64;
    let mut frame = vec![0.0f32; APPEARANCE_SIZE * APPEARANCE_SIZE];
    for p in &scene.particles {
        let (x, y) = ((p.position.x / cell) as usize, (p.position.y / cell) as usize);
        if x < APPEARANCE_SIZE && y < APPEARANCE_SIZE {
            frame[y * APPEARANCE_SIZE + x] = PARTICLE_SHADE;
        }
    }
    for y in 0..APPEARANCE_SIZE {
        for x in 0..APPEARANCE_SIZE {
            let c = Point2::new((x as f64 + 0.5) * cell, (y as f64 + 0.5) * cell);
            let v = &mut frame[y * APPEARANCE_SIZE + x];
            if scene.tool.covers(c) {
                *v = TOOL_SHADE;
            } else if *v == 0.0 && scene.recipient.contains(c) {
                *v = RECIPIENT_SHADE;
            }
        }
    }
    frame
}

/// Covered fraction of the recipient footprint.
pub fn wipe_coverage(scene: &Scene) -> Result<f64> {
    let (mut total, mut covered) = (0usize, 0usize);
    for cell in scene.recipient_cells() {
        total += 1;
        covered += scene.coverage[cell] as usize;
    }
    if total == 0 {
        return Err(Error::DegenerateGeometry("recipient covers no pixel centers".into()));
    }
    Ok(covered as f64 / total as f64)
}

/// Fraction of the initial particles lying within the recipient's edge band.
pub fn scrape_cleared(scene: &Scene) -> Result<f64> {
    if scene.initial_particle_count == 0 {
        return Err(Error::NoParticles);
    }
    let r = &scene.recipient;
    let in_band = scene
        .particles
        .iter()
        .filter(|p| {
            let d = p.position - r.center;
            let to_edge_x = (r.half_extents.x - d.x.abs()).abs();
            let to_edge_y = (r.half_extents.y - d.y.abs()).abs();
            let outside = d.x.abs() > r.half_extents.x || d.y.abs() > r.half_extents.y;
            if outside {
                // distance to the rectangle from outside
                let ox = (d.x.abs() - r.half_extents.x).max(0.0);
                let oy = (d.y.abs() - r.half_extents.y).max(0.0);
                ox.hypot(oy) <= EDGE_BAND
            } else {
                to_edge_x.min(to_edge_y) <= EDGE_BAND
            }
        })
        .count();
    Ok(in_band as f64 / scene.initial_particle_count as f64)
}

/// Particle variance gain, normalized so a uniform spread over the recipient scores 1.
pub fn stir_dispersion(scene: &Scene) -> Result<f64> {
    if scene.initial_particle_count == 0 {
        return Err(Error::NoParticles);
    }
    let h = scene.recipient.half_extents;
    let uniform = ((2.0 * h.x).powi(2) + (2.0 * h.y).powi(2)) / 12.0;
    let span = uniform - scene.initial_variance;
    if span <= 0.0 {
        return Ok(1.0);
    }
    let now = position_variance(scene.particles.iter().map(|p| p.position));
    Ok(((now - scene.initial_variance) / span).clamp(0.0, 1.0))
}
