//! Closed-loop driving: the agent picks an action every keyframe, the ego
//! follows the vehicle model, every other track replays its log.

pub mod agent;
pub mod metrics;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{rollout, ActionCatalog, DynamicsError, EgoState, VehicleParams, KEEP_STRAIGHT};
use crate::geometry::{obb_overlap, OrientedRect, Vec2};
use crate::parallel::map_ordered;
use crate::qa::parser::parse_response;
use crate::qa::QaOption;
use crate::scenario::{to_ego_frame, Pose2D, ScenarioError, ScenarioRecord, STEPS_PER_KEYFRAME};
use crate::scene_graph::{DistanceBucket, Sector, SpatialVocab, VisibilityPolicy};
use crate::view::{annotate_snapshot, render_frame, CameraRig, RenderOptions};

pub use agent::{Agent, AgentError, AgentSpec, FixedAgent, RandomAgent, RemoteAgent, RemoteSettings};
pub use metrics::{ade, metrics, pad_trajectory, MetricsError, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavCommand {
    pub distance: DistanceBucket,
    pub sector: Sector,
}

impl NavCommand {
    pub fn text(&self) -> String {
        format!(
            "your final destination is at {} distance to {} at this moment.",
            self.distance.word(),
            self.sector.word()
        )
    }
}

/// Destination relative to the current pose; a zero offset reads as front.
pub fn nav_command(ego: &Pose2D, dest: Vec2, vocab: &SpatialVocab) -> NavCommand {
    let local = to_ego_frame(ego, dest);
    NavCommand {
        distance: vocab.bucket(local.norm()),
        sector: Sector::of_direction(local),
    }
}

/// Letter-keyed action options in catalog order.
pub fn action_options(catalog: &ActionCatalog) -> Vec<QaOption> {
    catalog
        .names()
        .zip(b'A'..=b'Z')
        .map(|(name, l)| QaOption {
            letter: l as char,
            text: name.to_string(),
        })
        .collect()
}

pub fn build_prompt(nav: &NavCommand, speed: f64, catalog: &ActionCatalog) -> String {
    let mut p = format!(
        "You are driving the ego vehicle; the image shows the view from its front camera, \
         with nearby objects marked by numeric labels. Navigation: {} \
         Your current speed is {speed:.1} m/s.\nChoose one action for the next 0.5 seconds:\n",
        nav.text()
    );
    for (o, a) in action_options(catalog).iter().zip(catalog.actions()) {
        p.push_str(&format!("({}) {}: {}\n", o.letter, a.name, a.gloss()));
    }
    p.push_str("Answer with a single capitalized character: the letter of the chosen action.");
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub scenario: String,
    pub step: usize,
    /// PNG bytes; absent when neither the agent nor the run keeps images.
    pub image: Option<Vec<u8>>,
    pub prompt: String,
    pub options: Vec<QaOption>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveConfig {
    pub vehicle: VehicleParams,
    pub catalog: ActionCatalog,
    pub vocab: SpatialVocab,
    pub visibility: VisibilityPolicy,
    pub camera: CameraRig,
    /// Where observation PNGs are written, one directory per scenario.
    pub observation_dir: Option<PathBuf>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            catalog: ActionCatalog::default(),
            vocab: SpatialVocab::default(),
            visibility: VisibilityPolicy::default(),
            camera: CameraRig::closed_loop(),
            observation_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    OffRoad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoLog {
    pub position: Vec2,
    pub heading: Vec2,
    pub speed: f64,
}

impl From<&EgoState> for EgoLog {
    fn from(s: &EgoState) -> Self {
        Self {
            position: s.pose.position,
            heading: s.pose.heading,
            speed: s.speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub step: usize,
    pub observation: Option<String>,
    pub nav: String,
    pub response: String,
    /// Action parsed from the response; `None` on parse failure.
    pub parsed: Option<String>,
    /// Action actually applied.
    pub action: String,
    pub ego: EgoLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub agent: String,
    pub steps: Vec<DecisionLog>,
    pub termination: Termination,
    pub collided: bool,
    pub first_collision_step: Option<usize>,
    pub traveled: f64,
    pub route_len: f64,
    pub destination: Vec2,
    pub driven_traj: Vec<Vec2>,
    pub gt_traj: Vec<Vec2>,
}

impl EpisodeResult {
    pub fn parse_failures(&self) -> usize {
        self.steps.iter().filter(|s| s.parsed.is_none()).count()
    }
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("scenario `{scenario}` aborted at step {step}: {source}")]
    Agent {
        scenario: String,
        step: usize,
        #[source]
        source: AgentError,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn observation_path(dir: &Path, scenario: &str, step: usize) -> PathBuf {
    dir.join(scenario).join(format!("{step:04}.png"))
}

fn observe(
    scenario: &ScenarioRecord,
    step: usize,
    ego: &EgoState,
    cfg: &DriveConfig,
    want_image: bool,
) -> Result<(Observation, Option<String>), EpisodeError> {
    let nav = nav_command(&ego.pose, scenario.destination, &cfg.vocab);
    let prompt = build_prompt(&nav, ego.speed, &cfg.catalog);
    let mut image = None;
    let mut reference = None;
    if want_image || cfg.observation_dir.is_some() {
        let mut frame = scenario.frame_at(step)?;
        frame.ego.state.pose = ego.pose;
        frame.ego.state.speed = ego.speed;
        let annotation = annotate_snapshot(frame, &cfg.camera, &cfg.visibility);
        let png = render_frame(scenario, &annotation, &RenderOptions::default()).png;
        if let Some(dir) = &cfg.observation_dir {
            let path = observation_path(dir, &scenario.id, step);
            let io = |source| EpisodeError::Io {
                path: path.clone(),
                source,
            };
            std::fs::create_dir_all(path.parent().expect("has parent")).map_err(io)?;
            std::fs::write(&path, &png).map_err(io)?;
            reference = Some(format!("{}/{step:04}.png", scenario.id));
        }
        if want_image {
            image = Some(png);
        }
    }
    Ok((
        Observation {
            scenario: scenario.id.clone(),
            step,
            image,
            prompt,
            options: action_options(&cfg.catalog),
        },
        reference,
    ))
}

fn collides(scenario: &ScenarioRecord, step: usize, ego: &OrientedRect) -> bool {
    scenario
        .tracks
        .iter()
        .filter(|t| t.id != scenario.ego_id)
        .filter_map(|t| t.states.get(step))
        .filter(|s| s.valid)
        .any(|s| matches!(obb_overlap(ego, &s.rect()), Ok(true)))
}

/// Drives one scenario. The agent is queried at every keyframe of the log,
/// each decision covers the following five steps (fewer at the end).
pub fn run_episode(
    scenario: &ScenarioRecord,
    agent: &mut dyn Agent,
    agent_name: &str,
    cfg: &DriveConfig,
) -> Result<EpisodeResult, EpisodeError> {
    let ego_track = scenario.ego_track();
    let first = &ego_track.states[0];
    let half = first.half_extents;
    let mut state = EgoState {
        pose: first.pose,
        speed: first.speed,
    };
    let options = action_options(&cfg.catalog);
    let mut driven = vec![state.pose.position];
    let mut steps = Vec::new();
    let mut first_collision = None;
    if collides(scenario, 0, &OrientedRect::new(state.pose.position, state.pose.heading, half)) {
        first_collision = Some(0);
    }
    let mut termination = Termination::Horizon;
    let mut t = 0;
    'outer: while t < scenario.horizon {
        let (obs, reference) = observe(scenario, t, &state, cfg, agent.wants_image())?;
        let response = agent.decide(&obs).map_err(|source| EpisodeError::Agent {
            scenario: scenario.id.clone(),
            step: t,
            source,
        })?;
        let parsed = parse_response(&response, &options).ok().and_then(|l| {
            options
                .iter()
                .find(|o| o.letter == l)
                .map(|o| o.text.clone())
        });
        let action = parsed.clone().unwrap_or_else(|| KEEP_STRAIGHT.to_string());
        steps.push(DecisionLog {
            step: t,
            observation: reference,
            nav: nav_command(&state.pose, scenario.destination, &cfg.vocab).text(),
            response,
            parsed,
            action: action.clone(),
            ego: EgoLog::from(&state),
        });
        let n = STEPS_PER_KEYFRAME.min(scenario.horizon - 1 - t);
        let traj = rollout(&state, &action, n, &cfg.catalog, &cfg.vehicle)?;
        for s in &traj[1..] {
            t += 1;
            state = *s;
            driven.push(state.pose.position);
            let rect = OrientedRect::new(state.pose.position, state.pose.heading, half);
            if first_collision.is_none() && collides(scenario, t, &rect) {
                first_collision = Some(t);
            }
            if !scenario.on_drivable(state.pose.position) {
                termination = Termination::OffRoad;
                break 'outer;
            }
        }
        if n < STEPS_PER_KEYFRAME {
            break;
        }
    }
    let traveled = driven.windows(2).map(|w| w[0].distance(w[1])).sum();
    Ok(EpisodeResult {
        scenario: scenario.id.clone(),
        agent: agent_name.to_string(),
        steps,
        termination,
        collided: first_collision.is_some(),
        first_collision_step: first_collision,
        traveled,
        route_len: scenario.route_length(),
        destination: scenario.destination,
        driven_traj: driven,
        gt_traj: scenario.ego_positions(),
    })
}

/// Runs every scenario with a fresh agent; outcomes keep input order.
pub fn run_suite(
    scenarios: &[ScenarioRecord],
    spec: &AgentSpec,
    remote: &RemoteSettings,
    cfg: &DriveConfig,
    seed: u64,
    jobs: usize,
) -> Vec<Result<EpisodeResult, EpisodeError>> {
    let name = spec.name();
    map_ordered(scenarios, jobs, |s| {
        let mut agent = spec.build(seed, &s.id, &cfg.catalog, remote);
        run_episode(s, agent.as_mut(), &name, cfg)
    })
}
