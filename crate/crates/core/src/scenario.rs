//! Neutral scenario data model: replayable traffic logs with drivable-area
//! polygons, loading and validation, frame extraction and the ego frame.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{is_simple_polygon, point_in_polygon, OrientedRect, Vec2};

/// Simulation step length in seconds. Every fifth step is a 0.5 s keyframe.
pub const DT: f64 = 0.1;
/// Steps between keyframes and between closed-loop decisions.
pub const STEPS_PER_KEYFRAME: usize = 5;

const HEADING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("step {step} out of range for horizon {horizon}")]
    OutOfRange { step: usize, horizon: usize },
    #[error("unknown synthetic layout `{0}`")]
    UnknownLayout(String),
}

/// Position plus unit heading vector, world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub position: Vec2,
    pub heading: Vec2,
}

impl Pose2D {
    pub fn new(position: Vec2, heading: Vec2) -> Self {
        Self { position, heading }
    }

    pub fn heading_is_unit(&self) -> bool {
        (self.heading.norm() - 1.0).abs() <= HEADING_TOL
    }
}

/// Maps a world point into the frame of `ego`: x forward, y to the left.
pub fn to_ego_frame(ego: &Pose2D, p: Vec2) -> Vec2 {
    let d = p - ego.position;
    Vec2::new(d.dot(ego.heading), d.dot(ego.heading.perp()))
}

/// Inverse of [`to_ego_frame`].
pub fn from_ego_frame(ego: &Pose2D, local: Vec2) -> Vec2 {
    ego.position + ego.heading * local.x + ego.heading.perp() * local.y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectState {
    pub pose: Pose2D,
    pub speed: f64,
    /// (length / 2, width / 2)
    pub half_extents: Vec2,
    pub valid: bool,
}

impl ObjectState {
    pub fn rect(&self) -> OrientedRect {
        OrientedRect::new(self.pose.position, self.pose.heading, self.half_extents)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObjectKind {
    #[serde(rename = "sedan")]
    Sedan,
    #[serde(rename = "SUV")]
    Suv,
    #[serde(rename = "pickup")]
    Pickup,
    #[serde(rename = "truck")]
    Truck,
    #[serde(rename = "bus")]
    Bus,
    #[serde(rename = "pedestrian")]
    Pedestrian,
    #[serde(rename = "cyclist")]
    Cyclist,
    #[serde(rename = "motorcycle")]
    Motorcycle,
    #[serde(rename = "traffic_cone")]
    TrafficCone,
    #[serde(rename = "barrier")]
    Barrier,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 10] = [
        ObjectKind::Sedan,
        ObjectKind::Suv,
        ObjectKind::Pickup,
        ObjectKind::Truck,
        ObjectKind::Bus,
        ObjectKind::Pedestrian,
        ObjectKind::Cyclist,
        ObjectKind::Motorcycle,
        ObjectKind::TrafficCone,
        ObjectKind::Barrier,
    ];

    /// Human-readable name used in questions.
    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Sedan => "sedan",
            ObjectKind::Suv => "SUV",
            ObjectKind::Pickup => "pickup",
            ObjectKind::Truck => "truck",
            ObjectKind::Bus => "bus",
            ObjectKind::Pedestrian => "pedestrian",
            ObjectKind::Cyclist => "cyclist",
            ObjectKind::Motorcycle => "motorcycle",
            ObjectKind::TrafficCone => "traffic cone",
            ObjectKind::Barrier => "barrier",
        }
    }

    pub fn is_vehicle(self) -> bool {
        matches!(
            self,
            ObjectKind::Sedan
                | ObjectKind::Suv
                | ObjectKind::Pickup
                | ObjectKind::Truck
                | ObjectKind::Bus
        )
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Black,
    Gray,
    Red,
    Blue,
    Green,
    Yellow,
    Orange,
}

impl Color {
    pub const ALL: [Color; 8] = [
        Color::White,
        Color::Black,
        Color::Gray,
        Color::Red,
        Color::Blue,
        Color::Green,
        Color::Yellow,
        Color::Orange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Color::White => "white",
            Color::Black => "black",
            Color::Gray => "gray",
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Orange => "orange",
        }
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            Color::White => [235, 235, 235],
            Color::Black => [25, 25, 25],
            Color::Gray => [128, 128, 128],
            Color::Red => [200, 30, 30],
            Color::Blue => [30, 70, 210],
            Color::Green => [30, 160, 60],
            Color::Yellow => [230, 210, 40],
            Color::Orange => [240, 140, 20],
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceTag {
    Real,
    Sim,
    Synthetic,
}

impl SourceTag {
    pub fn name(self) -> &'static str {
        match self {
            SourceTag::Real => "real",
            SourceTag::Sim => "sim",
            SourceTag::Synthetic => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: String,
    pub kind: ObjectKind,
    pub color: Option<Color>,
    pub height: f64,
    pub states: Vec<ObjectState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRecord {
    pub id: String,
    pub dt: f64,
    pub horizon: usize,
    pub ego_id: String,
    pub tracks: Vec<Track>,
    pub drivable: Vec<Vec<Vec2>>,
    pub destination: Vec2,
    pub source_tag: SourceTag,
}

/// One tracked object at one step, with its static metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObject {
    pub track_id: String,
    pub kind: ObjectKind,
    pub color: Option<Color>,
    pub height: f64,
    pub state: ObjectState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSnapshot {
    pub scenario_id: String,
    pub step: usize,
    pub ego: FrameObject,
    pub others: Vec<FrameObject>,
}

impl ScenarioRecord {
    pub fn ego_track(&self) -> &Track {
        self.track(&self.ego_id)
            .expect("validated scenario always resolves its ego id")
    }

    pub fn track(&self, id: &str) -> Option<&Track> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn non_ego_tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(move |t| t.id != self.ego_id)
    }

    /// Logged ego positions, one per step.
    pub fn ego_positions(&self) -> Vec<Vec2> {
        self.ego_track()
            .states
            .iter()
            .map(|s| s.pose.position)
            .collect()
    }

    /// Arc length of the logged ego path.
    pub fn route_length(&self) -> f64 {
        self.ego_positions()
            .windows(2)
            .map(|w| w[0].distance(w[1]))
            .sum()
    }

    pub fn keyframes(&self) -> impl Iterator<Item = usize> {
        (0..self.horizon).step_by(STEPS_PER_KEYFRAME)
    }

    pub fn on_drivable(&self, p: Vec2) -> bool {
        self.drivable.iter().any(|poly| point_in_polygon(p, poly))
    }

    /// Snapshot of the ego and every valid non-ego object at `step`.
    pub fn frame_at(&self, step: usize) -> Result<FrameSnapshot, ScenarioError> {
        if step >= self.horizon {
            return Err(ScenarioError::OutOfRange {
                step,
                horizon: self.horizon,
            });
        }
        let object = |t: &Track| FrameObject {
            track_id: t.id.clone(),
            kind: t.kind,
            color: t.color,
            height: t.height,
            state: t.states[step],
        };
        let ego = object(self.ego_track());
        let others = self
            .non_ego_tracks()
            .filter(|t| t.states[step].valid)
            .map(object)
            .collect();
        Ok(FrameSnapshot {
            scenario_id: self.id.clone(),
            step,
            ego,
            others,
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let inv = |m: String| Err(ScenarioError::Invariant(m));
        if self.dt != DT {
            return inv("dt must be 0.1".into());
        }
        if self.horizon < 1 {
            return inv("horizon must be at least 1".into());
        }
        let mut seen = HashSet::new();
        for (i, t) in self.tracks.iter().enumerate() {
            if !seen.insert(t.id.as_str()) {
                return Err(ScenarioError::Schema {
                    path: format!("tracks[{i}].id"),
                    message: format!("duplicate track id `{}`", t.id),
                });
            }
        }
        if self.track(&self.ego_id).is_none() {
            return inv(format!("ego_id `{}` does not name a track", self.ego_id));
        }
        for t in &self.tracks {
            if !(t.height > 0.0 && t.height.is_finite()) {
                return inv(format!("track `{}` height must be positive", t.id));
            }
            if t.states.len() != self.horizon {
                return inv(format!(
                    "track `{}` has {} states, horizon is {}",
                    t.id,
                    t.states.len(),
                    self.horizon
                ));
            }
            for (k, s) in t.states.iter().enumerate() {
                if !s.pose.position.is_finite() || !s.pose.heading_is_unit() {
                    return inv(format!("track `{}` step {k}: heading must be a unit vector", t.id));
                }
                if !(s.speed >= 0.0 && s.speed.is_finite()) {
                    return inv(format!("track `{}` step {k}: speed must be >= 0", t.id));
                }
                if !(s.half_extents.x > 0.0 && s.half_extents.y > 0.0)
                    || !s.half_extents.is_finite()
                {
                    return inv(format!("track `{}` step {k}: extents must be positive", t.id));
                }
            }
        }
        if !self.ego_track().states[0].valid {
            return inv("ego must be valid at step 0".into());
        }
        for (i, poly) in self.drivable.iter().enumerate() {
            if !is_simple_polygon(poly) {
                return inv(format!("drivable[{i}] is not a simple polygon"));
            }
        }
        if !self.destination.is_finite() {
            return inv("destination must be finite".into());
        }
        Ok(())
    }

    /// Parses and validates the scenario JSON schema.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            ScenarioError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            }
        })?;
        let record = raw.into_record();
        record.validate()?;
        Ok(record)
    }

    /// Canonical serialization: pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ScenarioFile::from_record(self))
            .expect("scenario serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioRecord, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    ScenarioRecord::from_json(&text)
}

/// Loads every `*.json` file in a directory, sorted by file name.
pub fn load_scenario_dir(dir: &Path) -> Result<Vec<ScenarioRecord>, ScenarioError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_scenario(p)).collect()
}

// On-disk schema. Field order here is the canonical key order.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: String,
    dt: f64,
    horizon: usize,
    ego_id: String,
    tracks: Vec<TrackFile>,
    drivable: Vec<Vec<[f64; 2]>>,
    destination: [f64; 2],
    source_tag: SourceTag,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackFile {
    id: String,
    kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<Color>,
    height: f64,
    states: Vec<StateFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    x: f64,
    y: f64,
    hx: f64,
    hy: f64,
    speed: f64,
    len: f64,
    wid: f64,
    valid: bool,
}

impl ScenarioFile {
    fn into_record(self) -> ScenarioRecord {
        ScenarioRecord {
            id: self.id,
            dt: self.dt,
            horizon: self.horizon,
            ego_id: self.ego_id,
            tracks: self
                .tracks
                .into_iter()
                .map(|t| Track {
                    id: t.id,
                    kind: t.kind,
                    color: t.color,
                    height: t.height,
                    states: t
                        .states
                        .into_iter()
                        .map(|s| ObjectState {
                            pose: Pose2D::new(Vec2::new(s.x, s.y), Vec2::new(s.hx, s.hy)),
                            speed: s.speed,
                            half_extents: Vec2::new(s.len / 2.0, s.wid / 2.0),
                            valid: s.valid,
                        })
                        .collect(),
                })
                .collect(),
            drivable: self
                .drivable
                .into_iter()
                .map(|poly| poly.into_iter().map(|[x, y]| Vec2::new(x, y)).collect())
                .collect(),
            destination: Vec2::new(self.destination[0], self.destination[1]),
            source_tag: self.source_tag,
        }
    }

    fn from_record(r: &ScenarioRecord) -> Self {
        ScenarioFile {
            id: r.id.clone(),
            dt: r.dt,
            horizon: r.horizon,
            ego_id: r.ego_id.clone(),
            tracks: r
                .tracks
                .iter()
                .map(|t| TrackFile {
                    id: t.id.clone(),
                    kind: t.kind,
                    color: t.color,
                    height: t.height,
                    states: t
                        .states
                        .iter()
                        .map(|s| StateFile {
                            x: s.pose.position.x,
                            y: s.pose.position.y,
                            hx: s.pose.heading.x,
                            hy: s.pose.heading.y,
                            speed: s.speed,
                            len: s.half_extents.x * 2.0,
                            wid: s.half_extents.y * 2.0,
                            valid: s.valid,
                        })
                        .collect(),
                })
                .collect(),
            drivable: r
                .drivable
                .iter()
                .map(|poly| poly.iter().map(|p| [p.x, p.y]).collect())
                .collect(),
            destination: [r.destination.x, r.destination.y],
            source_tag: r.source_tag,
        }
    }
}
