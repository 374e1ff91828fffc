//! Deterministic top-down kitchen simulator.
//!
//! The scene is a 64x64 px table viewed from above. A tool follows template waypoints over
//! a fixed recipient object; contact moves particles (food bits, sauce) and marks wiped
//! cells. Every frame the simulator knows the true per-pixel displacement, which it emits as
//! a 32x32 dense flow field, alongside a 16x16 grayscale render.

mod corpus;
mod execute;
mod video;

pub use corpus::{flow_training_frames, read_corpus, synth_demo_corpus, write_corpus, DemoMeta, DemoRecord};
pub use execute::{
    execute_template, execute_waypoints, scrape_cleared, stir_dispersion, wipe_coverage, Execution, ProgressTrace,
};
pub use video::{AppearanceVideo, FlowVideo, APPEARANCE_MAGIC, FLOW_MAGIC};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{ForceLevel, ObjectGeometry, Point2, SkillLabel, Template, TrajectoryKind};
use crate::error::{Error, Result};

pub const SCENE_SIZE: usize = 64;
pub const FLOW_SIZE: usize = 32;
pub const APPEARANCE_SIZE: usize = 16;
/// Waypoints per episode; an episode has one fewer flow frame.
pub const EPISODE_STEPS: usize = 61;
pub const MAX_TOOL_SPEED: f64 = 4.0;
pub const EDGE_BAND: f64 = 4.0;
/// Half width in px of the arm band that moves with the tool in the flow field.
pub const ARM_HALF_WIDTH: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProgressMetric {
    /// Fraction of the recipient footprint marked as covered.
    Coverage,
    /// Fraction of the initial particles sitting in the recipient's edge band.
    EdgeClearance,
    /// Normalized gain in particle-position variance.
    Dispersion,
}

/// What contact with the tool does besides pushing particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paint {
    None,
    /// Cells under the tool are marked covered with probability = force coefficient.
    Tool,
    /// Particles mark the cells they are dragged over.
    Particles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Point2,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub half_extents: Point2,
    pub position: Point2,
}

impl Tool {
    /// Pixel-center containment; strict so that a footprint edge never lands on a center.
    pub fn covers(&self, p: Point2) -> bool {
        (p.x - self.position.x).abs() < self.half_extents.x && (p.y - self.position.y).abs() < self.half_extents.y
    }

    /// The arm holding the tool: a band from the tool center to the bottom edge of the view.
    pub fn arm_covers(&self, p: Point2) -> bool {
        (p.x - self.position.x).abs() < ARM_HALF_WIDTH && p.y > self.position.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub recipient: ObjectGeometry,
    pub particles: Vec<Particle>,
    pub initial_particle_count: usize,
    /// Mean squared distance of the initial particles to their centroid.
    pub initial_variance: f64,
    /// Row-major SCENE_SIZE x SCENE_SIZE.
    pub coverage: Vec<bool>,
    pub tool: Tool,
    pub paint: Paint,
    pub metric: ProgressMetric,
}

impl Scene {
    pub fn new(
        recipient: ObjectGeometry,
        tool_half_extents: Point2,
        particles: Vec<Particle>,
        paint: Paint,
        metric: ProgressMetric,
    ) -> Result<Self> {
        let scene = Self {
            tool: Tool {
                half_extents: tool_half_extents,
                position: recipient.center,
            },
            initial_particle_count: particles.len(),
            initial_variance: position_variance(particles.iter().map(|p| p.position)),
            coverage: vec![false; SCENE_SIZE * SCENE_SIZE],
            recipient,
            particles,
            paint,
            metric,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        self.recipient.validate()?;
        let (lo, hi) = (self.recipient.min_corner(), self.recipient.max_corner());
        let size = SCENE_SIZE as f64;
        if lo.x < 0.0 || lo.y < 0.0 || hi.x > size || hi.y > size {
            return Err(Error::DegenerateGeometry(format!(
                "recipient spans ({}, {})..({}, {}), outside the {SCENE_SIZE} px scene",
                lo.x, lo.y, hi.x, hi.y
            )));
        }
        let h = self.tool.half_extents;
        if !(h.x > 0.0 && h.y > 0.0) {
            return Err(Error::DegenerateGeometry("tool footprint must be positive".into()));
        }
        if self.particles.iter().any(|p| !in_bounds(p.position)) {
            return Err(Error::DegenerateGeometry("particle outside scene".into()));
        }
        Ok(())
    }

    pub fn progress(&self) -> Result<f64> {
        match self.metric {
            ProgressMetric::Coverage => wipe_coverage(self),
            ProgressMetric::EdgeClearance => scrape_cleared(self),
            ProgressMetric::Dispersion => stir_dispersion(self),
        }
    }

    /// Pixels whose centers lie inside the recipient.
    pub fn recipient_cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..SCENE_SIZE * SCENE_SIZE).filter(move |&i| self.recipient.contains(pixel_center(i)))
    }

    pub fn clamp_to_recipient(&self, p: Point2) -> Point2 {
        let (lo, hi) = (self.recipient.min_corner(), self.recipient.max_corner());
        // keep particles strictly inside so they stay on a recipient pixel
        let eps = 1e-6;
        Point2::new(p.x.clamp(lo.x + eps, hi.x - eps), p.y.clamp(lo.y + eps, hi.y - eps))
    }
}

pub(crate) fn pixel_center(i: usize) -> Point2 {
    Point2::new((i % SCENE_SIZE) as f64 + 0.5, (i / SCENE_SIZE) as f64 + 0.5)
}

fn in_bounds(p: Point2) -> bool {
    let s = SCENE_SIZE as f64;
    (0.0..s).contains(&p.x) && (0.0..s).contains(&p.y)
}

pub(crate) fn position_variance(points: impl Iterator<Item = Point2> + Clone) -> f64 {
    let n = points.clone().count();
    if n == 0 {
        return 0.0;
    }
    let sum = points.clone().fold(Point2::default(), |a, p| a + p);
    let mean = sum.scale(1.0 / n as f64);
    points
        .map(|p| {
            let d = p - mean;
            d.x * d.x + d.y * d.y
        })
        .sum::<f64>()
        / n as f64
}

/// Desk-scale skills with a defined scene and progress metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Wipe,
    Scrape,
    Stir,
    Spread,
}

impl SkillKind {
    pub const ALL: [SkillKind; 4] = [SkillKind::Wipe, SkillKind::Scrape, SkillKind::Stir, SkillKind::Spread];

    pub fn from_verb(verb: &str) -> Option<Self> {
        match verb {
            "wipe" => Some(SkillKind::Wipe),
            "scrape" => Some(SkillKind::Scrape),
            "stir" => Some(SkillKind::Stir),
            "spread" => Some(SkillKind::Spread),
            _ => None,
        }
    }

    pub fn label(self) -> SkillLabel {
        let (verb, tool, recipient) = match self {
            SkillKind::Wipe => ("wipe", "cloth", "plate"),
            SkillKind::Scrape => ("scrape", "bench scraper", "cutting board"),
            SkillKind::Stir => ("stir", "spatula", "pan"),
            SkillKind::Spread => ("spread", "spoon", "pizza"),
        };
        SkillLabel::new(verb, tool, recipient).expect("catalog labels are valid")
    }

    pub fn metric(self) -> ProgressMetric {
        match self {
            SkillKind::Wipe | SkillKind::Spread => ProgressMetric::Coverage,
            SkillKind::Scrape => ProgressMetric::EdgeClearance,
            SkillKind::Stir => ProgressMetric::Dispersion,
        }
    }

    /// The technique the synthetic human demonstrations use.
    pub fn expert_template(self) -> Template {
        let (kind, force) = match self {
            SkillKind::Wipe => (TrajectoryKind::SideToSideLong, ForceLevel::Medium),
            SkillKind::Scrape => (TrajectoryKind::SideToSideLong, ForceLevel::High),
            SkillKind::Stir => (TrajectoryKind::LargeCircle, ForceLevel::High),
            SkillKind::Spread => (TrajectoryKind::SmallCircle, ForceLevel::High),
        };
        Template::new(kind, force)
    }
}

/// Randomization applied to a skill's canonical layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneJitter {
    /// Max center offset in px along each axis.
    pub shift: f64,
    /// Half extents are scaled by a factor drawn from [1 - scale, 1 + scale].
    pub scale: f64,
}

impl SceneJitter {
    pub const NONE: SceneJitter = SceneJitter { shift: 0.0, scale: 0.0 };
    /// Robot-side scene variations.
    pub const VARIATION: SceneJitter = SceneJitter {
        shift: 3.0,
        scale: 0.08,
    };
    /// Codec training data: broad coverage of speeds and placements.
    pub const TRAINING: SceneJitter = SceneJitter {
        shift: 4.0,
        scale: 0.25,
    };
    /// Human demonstrations: different kitchens, similar objects.
    pub const DEMO: SceneJitter = SceneJitter {
        shift: 6.0,
        scale: 0.05,
    };
}

struct Layout {
    center: Point2,
    half: Point2,
    tool: Point2,
    particles: ParticleLayout,
    paint: Paint,
}

enum ParticleLayout {
    None,
    /// Uniform over the recipient interior, at least `margin` px from its boundary.
    Scattered {
        count: usize,
        kind: &'static str,
        margin: f64,
    },
    /// Gaussian blob at `offset` (in half-extent units) from the recipient center.
    Blob {
        count: usize,
        kind: &'static str,
        sigma: f64,
        offset: Point2,
    },
}

fn layout(label: &SkillLabel) -> (Layout, ProgressMetric) {
    let Some(kind) = SkillKind::from_verb(&label.verb) else {
        return (
            Layout {
                center: Point2::new(32.0, 32.0),
                half: Point2::new(14.0, 12.0),
                tool: Point2::new(4.0, 4.0),
                particles: ParticleLayout::None,
                paint: Paint::Tool,
            },
            ProgressMetric::Coverage,
        );
    };
    let l = match kind {
        SkillKind::Wipe => Layout {
            center: Point2::new(32.0, 32.0),
            half: Point2::new(20.0, 9.0),
            tool: Point2::new(5.0, 8.0),
            particles: ParticleLayout::None,
            paint: Paint::Tool,
        },
        SkillKind::Scrape => Layout {
            center: Point2::new(32.0, 32.0),
            half: Point2::new(18.0, 12.0),
            tool: Point2::new(3.0, 10.0),
            particles: ParticleLayout::Scattered {
                count: 24,
                kind: "pepper",
                margin: 6.0,
            },
            paint: Paint::None,
        },
        SkillKind::Stir => Layout {
            center: Point2::new(32.0, 32.0),
            half: Point2::new(15.0, 15.0),
            tool: Point2::new(5.0, 5.0),
            particles: ParticleLayout::Blob {
                count: 30,
                kind: "pepper",
                sigma: 2.5,
                offset: Point2::new(0.6, -0.6),
            },
            paint: Paint::None,
        },
        SkillKind::Spread => Layout {
            center: Point2::new(32.0, 32.0),
            half: Point2::new(14.0, 14.0),
            tool: Point2::new(4.0, 4.0),
            particles: ParticleLayout::Blob {
                count: 30,
                kind: "sauce",
                sigma: 2.0,
                offset: Point2::new(0.0, 0.0),
            },
            paint: Paint::Particles,
        },
    };
    (l, kind.metric())
}

/// Builds the scene for `label` with the given jitter; `seed` drives every random choice.
pub fn skill_scene(label: &SkillLabel, jitter: SceneJitter, seed: u64) -> Result<Scene> {
    label.validate()?;
    let (l, metric) = layout(label);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |amp: f64| {
        if amp > 0.0 {
            rng.random_range(-amp..=amp)
        } else {
            0.0
        }
    };
    let center = l.center + Point2::new(draw(jitter.shift), draw(jitter.shift));
    let half = Point2::new(
        l.half.x * (1.0 + draw(jitter.scale)),
        l.half.y * (1.0 + draw(jitter.scale)),
    );
    let recipient = ObjectGeometry::new(center, half, &label.recipient)?;
    let particles = match l.particles {
        ParticleLayout::None => Vec::new(),
        ParticleLayout::Scattered { count, kind, margin } => (0..count)
            .map(|_| Particle {
                position: Point2::new(
                    rng.random_range(center.x - half.x + margin..center.x + half.x - margin),
                    rng.random_range(center.y - half.y + margin..center.y + half.y - margin),
                ),
                kind: kind.to_string(),
            })
            .collect(),
        ParticleLayout::Blob {
            count,
            kind,
            sigma,
            offset,
        } => {
            let normal = Normal::new(0.0, sigma).expect("positive sigma");
            let center = center + Point2::new(offset.x * half.x, offset.y * half.y);
            (0..count)
                .map(|_| Particle {
                    position: Point2::new(center.x + normal.sample(&mut rng), center.y + normal.sample(&mut rng)),
                    kind: kind.to_string(),
                })
                .collect()
        }
    };
    let mut scene = Scene::new(recipient, l.tool, Vec::new(), l.paint, metric)?;
    for mut p in particles {
        p.position = scene.clamp_to_recipient(p.position);
        scene.particles.push(p);
    }
    scene.initial_particle_count = scene.particles.len();
    scene.initial_variance = position_variance(scene.particles.iter().map(|p| p.position));
    scene.validate()?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_scenes_are_valid_and_seeded() {
        for kind in SkillKind::ALL {
            let a = skill_scene(&kind.label(), SceneJitter::VARIATION, 7).unwrap();
            let b = skill_scene(&kind.label(), SceneJitter::VARIATION, 7).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.metric, kind.metric());
            for p in &a.particles {
                assert!(a.recipient.contains(p.position));
            }
        }
    }

    #[test]
    fn unknown_verbs_get_a_generic_scene() {
        let label = SkillLabel::new("scrub", "sponge", "plate").unwrap();
        let s = skill_scene(&label, SceneJitter::DEMO, 3).unwrap();
        assert_eq!(s.metric, ProgressMetric::Coverage);
        assert!(s.particles.is_empty());
    }

    #[test]
    fn recipient_outside_bounds_is_rejected() {
        let g = ObjectGeometry::new(Point2::new(60.0, 32.0), Point2::new(10.0, 5.0), "plate").unwrap();
        assert!(Scene::new(g, Point2::new(3.0, 3.0), vec![], Paint::Tool, ProgressMetric::Coverage).is_err());
    }
}
