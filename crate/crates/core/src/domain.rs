//! Skills, trajectory kinds, force levels and the 33-entry behavior template library.
//!
//! Trajectories are object-centric: every kind is defined as an offset curve in units of the
//! recipient's half extents, so the same template centers on and scales with whatever object
//! it is applied to.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOOL_PLACEHOLDER: &str = "[tool]";
pub const RECIPIENT_PLACEHOLDER: &str = "[recipient]";
pub const LIBRARY_SIZE: usize = TrajectoryKind::ALL.len() * ForceLevel::ALL.len();

/// Offsets are snapped to this lattice (2^-40 px). Sums of lattice values with scene
/// coordinates stay exact in f64, which makes translation equivariance bit-exact.
const OFFSET_LATTICE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

/// Natural-language skill triple, e.g. wipe / cloth / plate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkillLabel {
    pub verb: String,
    pub tool: String,
    pub recipient: String,
}

impl SkillLabel {
    pub fn new(verb: &str, tool: &str, recipient: &str) -> Result<Self> {
        let label = Self {
            verb: verb.to_string(),
            tool: tool.to_string(),
            recipient: recipient.to_string(),
        };
        label.validate()?;
        Ok(label)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("verb", &self.verb),
            ("tool", &self.tool),
            ("recipient", &self.recipient),
        ] {
            if v.is_empty() {
                return Err(Error::InvalidSkill(format!("{name} is empty")));
            }
            if v.trim() != v || v.to_lowercase() != *v || v.contains(['[', ']']) {
                return Err(Error::InvalidSkill(format!(
                    "{name} {v:?} is not a clean lowercase token"
                )));
            }
        }
        Ok(())
    }

    /// "<verb> the <recipient> with the <tool>"
    pub fn caption(&self) -> String {
        format!("{} the {} with the {}", self.verb, self.recipient, self.tool)
    }
}

impl fmt::Display for SkillLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.caption())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionPattern {
    /// Closed elliptical loops, counter-clockwise on screen.
    Loop,
    /// Constant-speed back-and-forth along one axis, starting at the center.
    Oscillate(Axis),
    /// One constant-speed stroke from `-direction` to `+direction`.
    Stroke(Point2),
    /// Side-to-side oscillation while advancing away from the user.
    Zigzag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Shape parameters in object-frame units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryShape {
    /// Fraction of the recipient extent spanned along the motion axis.
    pub span: f64,
    pub periods: f64,
    pub pattern: MotionPattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    SmallCircle,
    LargeCircle,
    ForwardBackShort,
    ForwardBackLong,
    SideToSideShort,
    SideToSideLong,
    PushAway,
    PullToward,
    PushLeft,
    PushRight,
    ZigzagSweep,
}

const SHORT_SPAN: f64 = 0.5;
const LONG_SPAN: f64 = 0.9;

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 11] = [
        TrajectoryKind::SmallCircle,
        TrajectoryKind::LargeCircle,
        TrajectoryKind::ForwardBackShort,
        TrajectoryKind::ForwardBackLong,
        TrajectoryKind::SideToSideShort,
        TrajectoryKind::SideToSideLong,
        TrajectoryKind::PushAway,
        TrajectoryKind::PullToward,
        TrajectoryKind::PushLeft,
        TrajectoryKind::PushRight,
        TrajectoryKind::ZigzagSweep,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Phrase used after "in a" in template descriptors.
    pub fn phrase(self) -> &'static str {
        match self {
            TrajectoryKind::SmallCircle => "small circle",
            TrajectoryKind::LargeCircle => "large circle",
            TrajectoryKind::ForwardBackShort => "short forward and back motion",
            TrajectoryKind::ForwardBackLong => "long forward and back motion",
            TrajectoryKind::SideToSideShort => "short side to side motion",
            TrajectoryKind::SideToSideLong => "long side to side motion",
            TrajectoryKind::PushAway => "pushing motion away from you",
            TrajectoryKind::PullToward => "pulling motion toward you",
            TrajectoryKind::PushLeft => "pushing motion to the left",
            TrajectoryKind::PushRight => "pushing motion to the right",
            TrajectoryKind::ZigzagSweep => "zigzag sweep",
        }
    }

    pub fn shape(self) -> TrajectoryShape {
        use MotionPattern::*;
        let (span, periods, pattern) = match self {
            TrajectoryKind::SmallCircle => (SHORT_SPAN, 1.0, Loop),
            TrajectoryKind::LargeCircle => (LONG_SPAN, 1.0, Loop),
            TrajectoryKind::ForwardBackShort => (SHORT_SPAN, 1.5, Oscillate(Axis::Y)),
            TrajectoryKind::ForwardBackLong => (LONG_SPAN, 1.5, Oscillate(Axis::Y)),
            TrajectoryKind::SideToSideShort => (SHORT_SPAN, 1.5, Oscillate(Axis::X)),
            TrajectoryKind::SideToSideLong => (LONG_SPAN, 1.5, Oscillate(Axis::X)),
            // screen y grows toward the user, so "away" is -y
            TrajectoryKind::PushAway => (LONG_SPAN, 1.0, Stroke(Point2::new(0.0, -1.0))),
            TrajectoryKind::PullToward => (LONG_SPAN, 1.0, Stroke(Point2::new(0.0, 1.0))),
            TrajectoryKind::PushLeft => (LONG_SPAN, 1.0, Stroke(Point2::new(-1.0, 0.0))),
            TrajectoryKind::PushRight => (LONG_SPAN, 1.0, Stroke(Point2::new(1.0, 0.0))),
            TrajectoryKind::ZigzagSweep => (LONG_SPAN, 1.5, Zigzag),
        };
        TrajectoryShape { span, periods, pattern }
    }

    /// Offset from the object center at normalized time `t` in [0,1], in half-extent units.
    fn unit_offset(self, t: f64) -> Point2 {
        let shape = self.shape();
        let a = shape.span;
        match shape.pattern {
            MotionPattern::Loop => {
                let phase = TAU * shape.periods * t;
                Point2::new(a * phase.cos(), -a * phase.sin())
            }
            MotionPattern::Oscillate(Axis::X) => Point2::new(a * triangle(shape.periods * t), 0.0),
            MotionPattern::Oscillate(Axis::Y) => Point2::new(0.0, -a * triangle(shape.periods * t)),
            MotionPattern::Stroke(dir) => dir.scale(a * (2.0 * t - 1.0)),
            MotionPattern::Zigzag => Point2::new(a * triangle(shape.periods * t), a * (1.0 - 2.0 * t)),
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

/// Unit-amplitude triangle wave with period 1: 0 → 1 → 0 → -1 → 0.
fn triangle(p: f64) -> f64 {
    let u = p.rem_euclid(1.0);
    if u < 0.25 {
        4.0 * u
    } else if u < 0.75 {
        2.0 - 4.0 * u
    } else {
        4.0 * u - 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceLevel {
    Low,
    Medium,
    High,
}

impl ForceLevel {
    pub const ALL: [ForceLevel; 3] = [ForceLevel::Low, ForceLevel::Medium, ForceLevel::High];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Fraction of tool motion transferred to whatever the tool is in contact with.
    pub fn coefficient(self) -> f64 {
        match self {
            ForceLevel::Low => 0.25,
            ForceLevel::Medium => 0.55,
            ForceLevel::High => 0.9,
        }
    }

    pub fn pressure_word(self) -> &'static str {
        match self {
            ForceLevel::Low => "light",
            ForceLevel::Medium => "medium",
            ForceLevel::High => "firm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: usize,
    pub trajectory: TrajectoryKind,
    pub force: ForceLevel,
    pub descriptor_template: String,
}

impl Template {
    pub fn new(trajectory: TrajectoryKind, force: ForceLevel) -> Self {
        Self {
            id: 3 * trajectory.index() + force.index(),
            trajectory,
            force,
            descriptor_template: format!(
                "Move the {TOOL_PLACEHOLDER} in a {} while applying {} pressure to the {RECIPIENT_PLACEHOLDER}",
                trajectory.phrase(),
                force.pressure_word()
            ),
        }
    }
}

pub fn build_library() -> Vec<Template> {
    TrajectoryKind::ALL
        .iter()
        .flat_map(|&k| ForceLevel::ALL.iter().map(move |&f| Template::new(k, f)))
        .collect()
}

pub fn library_to_json(library: &[Template]) -> Result<String> {
    Ok(serde_json::to_string_pretty(library)?)
}

pub fn library_from_json(s: &str) -> Result<Vec<Template>> {
    Ok(serde_json::from_str(s)?)
}

pub fn fill_descriptor(template: &Template, skill: &SkillLabel) -> Result<String> {
    skill.validate()?;
    let text = &template.descriptor_template;
    for placeholder in [TOOL_PLACEHOLDER, RECIPIENT_PLACEHOLDER] {
        let n = text.matches(placeholder).count();
        if n != 1 {
            return Err(Error::MalformedDescriptor(format!(
                "template {} has {n} occurrences of {placeholder}",
                template.id
            )));
        }
    }
    let filled = text
        .replace(TOOL_PLACEHOLDER, &skill.tool)
        .replace(RECIPIENT_PLACEHOLDER, &skill.recipient);
    if filled.contains(['[', ']']) {
        return Err(Error::MalformedDescriptor(format!("unresolved bracket in {filled:?}")));
    }
    Ok(filled)
}

/// Axis-aligned recipient object as seen from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectGeometry {
    pub center: Point2,
    pub half_extents: Point2,
    pub label: String,
}

impl ObjectGeometry {
    pub fn new(center: Point2, half_extents: Point2, label: &str) -> Result<Self> {
        let g = Self {
            center,
            half_extents,
            label: label.to_string(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.half_extents;
        if !(h.x > 0.0 && h.y > 0.0) || !h.x.is_finite() || !h.y.is_finite() {
            return Err(Error::DegenerateGeometry(format!(
                "half extents ({}, {}) must be positive",
                h.x, h.y
            )));
        }
        if !self.center.x.is_finite() || !self.center.y.is_finite() {
            return Err(Error::DegenerateGeometry("non-finite center".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: Point2) -> bool {
        (p.x - self.center.x).abs() <= self.half_extents.x && (p.y - self.center.y).abs() <= self.half_extents.y
    }

    pub fn translated(&self, d: Point2) -> Self {
        Self {
            center: self.center + d,
            ..self.clone()
        }
    }

    pub fn min_corner(&self) -> Point2 {
        self.center - self.half_extents
    }

    pub fn max_corner(&self) -> Point2 {
        self.center + self.half_extents
    }
}

/// Samples `steps` waypoints of `kind` centered on and scaled by `geometry`.
pub fn trajectory_waypoints(kind: TrajectoryKind, geometry: &ObjectGeometry, steps: usize) -> Result<Vec<Point2>> {
    geometry.validate()?;
    if steps < 2 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 2 waypoints, got {steps}"
        )));
    }
    let h = geometry.half_extents;
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            let u = kind.unit_offset(i as f64 / last);
            let off = Point2::new(snap(u.x * h.x), snap(u.y * h.y));
            geometry.center + off
        })
        .collect())
}

fn snap(v: f64) -> f64 {
    (v * OFFSET_LATTICE).round() / OFFSET_LATTICE
}
