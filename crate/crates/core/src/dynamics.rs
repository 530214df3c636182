//! Kinematic vehicle model, the normalized-action to control-signal mapping,
//! the discrete action catalog, rollouts, and greedy reconstruction of
//! logged trajectories as catalog action sequences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;
use crate::scenario::{Pose2D, DT, STEPS_PER_KEYFRAME};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("normalized action ({0}, {1}) outside [-1, 1]^2")]
    OutOfRange(f64, f64),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("trajectory has {0} points, at least 6 are needed")]
    TooShort(usize),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

/// Vehicle configuration. Engine and brake limits are in the simulator's
/// horsepower-like units; `full_accel` and `full_brake` convert them to
/// m/s^2 at full actuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    pub max_steer_deg: f64,
    pub max_engine_force: f64,
    pub max_brake_force: f64,
    pub full_accel: f64,
    pub full_brake: f64,
    pub wheelbase: f64,
    pub v_max: f64,
    pub drag: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            max_steer_deg: 40.0,
            max_engine_force: 500.0,
            max_brake_force: 200.0,
            full_accel: 4.0,
            full_brake: 8.0,
            wheelbase: 2.8,
            v_max: 25.0,
            drag: 0.05,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("max_steer_deg", self.max_steer_deg),
            ("max_engine_force", self.max_engine_force),
            ("max_brake_force", self.max_brake_force),
            ("full_accel", self.full_accel),
            ("full_brake", self.full_brake),
            ("wheelbase", self.wheelbase),
            ("v_max", self.v_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(DynamicsError::InvalidParams(format!("{name} must be > 0")));
            }
        }
        if !(self.drag >= 0.0 && self.drag.is_finite()) {
            return Err(DynamicsError::InvalidParams("drag must be >= 0".into()));
        }
        Ok(())
    }

    fn accel_gain(&self) -> f64 {
        self.full_accel / self.max_engine_force
    }

    fn brake_gain(&self) -> f64 {
        self.full_brake / self.max_brake_force
    }
}

/// Low-level control: steering in degrees, throttle and brake in engine units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub steer_deg: f64,
    pub accel: f64,
    pub brake: f64,
}

/// Converts a normalized action `(a1, a2)` into steering, throttle and brake:
/// `u_s = S_max a1`, `u_a = F_max max(0, a2)`, `u_b = -B_max min(0, a2)`.
pub fn map_action(a: [f64; 2], p: &VehicleParams) -> Result<ControlSignal, DynamicsError> {
    let [a1, a2] = a;
    if !(-1.0..=1.0).contains(&a1) || !(-1.0..=1.0).contains(&a2) {
        return Err(DynamicsError::OutOfRange(a1, a2));
    }
    Ok(ControlSignal {
        steer_deg: p.max_steer_deg * a1,
        accel: p.max_engine_force * a2.max(0.0),
        brake: -p.max_brake_force * a2.min(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub steer: f64,
    pub throttle: f64,
}

impl Action {
    pub fn new(name: &str, steer: f64, throttle: f64) -> Self {
        Self {
            name: name.to_string(),
            steer,
            throttle,
        }
    }

    pub fn normalized(&self) -> [f64; 2] {
        [self.steer, self.throttle]
    }

    /// Short natural-language gloss used in driving prompts.
    pub fn gloss(&self) -> String {
        match self.name.as_str() {
            "TURN_LEFT" => "turn left".into(),
            "TURN_RIGHT" => "turn right".into(),
            "KEEP_STRAIGHT" => "keep the current speed and heading".into(),
            "SPEED_UP" => "accelerate".into(),
            "BRAKE" => "slow down".into(),
            "BIG_LEFT" => "turn left sharply".into(),
            "BIG_RIGHT" => "turn right sharply".into(),
            "STOP" => "brake to a stop".into(),
            other => other.to_lowercase().replace('_', " "),
        }
    }
}

/// Ordered set of named normalized actions. Declaration order is the
/// tie-breaking order everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionCatalog {
    actions: Vec<Action>,
}

pub const KEEP_STRAIGHT: &str = "KEEP_STRAIGHT";

impl Default for ActionCatalog {
    fn default() -> Self {
        Self {
            actions: vec![
                Action::new("TURN_LEFT", 0.5, 0.0),
                Action::new("TURN_RIGHT", -0.5, 0.0),
                Action::new(KEEP_STRAIGHT, 0.0, 0.0),
                Action::new("SPEED_UP", 0.0, 0.6),
                Action::new("BRAKE", 0.0, -0.6),
                Action::new("BIG_LEFT", 1.0, 0.0),
                Action::new("BIG_RIGHT", -1.0, 0.0),
                Action::new("STOP", 0.0, -1.0),
            ],
        }
    }
}

impl ActionCatalog {
    pub fn new(actions: Vec<Action>) -> Result<Self, DynamicsError> {
        let catalog = Self { actions };
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        for a in &self.actions {
            if !(-1.0..=1.0).contains(&a.steer) || !(-1.0..=1.0).contains(&a.throttle) {
                return Err(DynamicsError::OutOfRange(a.steer, a.throttle));
            }
        }
        if self.get(KEEP_STRAIGHT).is_none() {
            return Err(DynamicsError::UnknownAction(KEEP_STRAIGHT.into()));
        }
        let mut names: Vec<&str> = self.names().collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(DynamicsError::InvalidParams(format!(
                "duplicate action `{}`",
                w[0]
            )));
        }
        Ok(())
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.actions.iter().map(|a| a.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Action> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    pub pose: Pose2D,
    pub speed: f64,
}

impl EgoState {
    pub fn new(position: Vec2, heading: Vec2, speed: f64) -> Self {
        Self {
            pose: Pose2D::new(position, heading),
            speed,
        }
    }
}

/// One 0.1 s step of the kinematic bicycle model.
pub fn step(state: &EgoState, c: &ControlSignal, p: &VehicleParams) -> EgoState {
    let accel = p.accel_gain() * c.accel - p.brake_gain() * c.brake - p.drag * state.speed;
    let speed = (state.speed + accel * DT).clamp(0.0, p.v_max);
    let yaw = state.speed / p.wheelbase * c.steer_deg.to_radians().tan() * DT;
    let heading = state
        .pose
        .heading
        .rotated(yaw)
        .normalized()
        .unwrap_or(state.pose.heading);
    EgoState {
        pose: Pose2D::new(state.pose.position + heading * (speed * DT), heading),
        speed,
    }
}

/// Applies the named action for `n_steps`; the result starts with `state`.
pub fn rollout(
    state: &EgoState,
    action: &str,
    n_steps: usize,
    catalog: &ActionCatalog,
    p: &VehicleParams,
) -> Result<Vec<EgoState>, DynamicsError> {
    let a = catalog
        .get(action)
        .ok_or_else(|| DynamicsError::UnknownAction(action.to_string()))?;
    let control = map_action(a.normalized(), p)?;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(*state);
    let mut s = *state;
    for _ in 0..n_steps {
        s = step(&s, &control, p);
        out.push(s);
    }
    Ok(out)
}

/// Executes each action for one decision period (5 steps) in sequence.
pub fn drive_actions(
    state: &EgoState,
    actions: &[&str],
    catalog: &ActionCatalog,
    p: &VehicleParams,
) -> Result<Vec<EgoState>, DynamicsError> {
    let mut traj = vec![*state];
    for a in actions {
        let last = *traj.last().expect("trajectory is never empty");
        let seg = rollout(&last, a, STEPS_PER_KEYFRAME, catalog, p)?;
        traj.extend_from_slice(&seg[1..]);
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructedDecision {
    pub step: usize,
    pub action: String,
    /// Distance to the logged position at the end of this decision period.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    pub decisions: Vec<ReconstructedDecision>,
    /// Mean per-step distance between simulated and logged positions.
    pub mean_deviation: f64,
    pub max_deviation: f64,
    #[serde(skip)]
    pub simulated: Vec<Vec2>,
}

impl Reconstruction {
    pub fn actions(&self) -> Vec<&str> {
        self.decisions.iter().map(|d| d.action.as_str()).collect()
    }
}

/// Greedy, autoregressive reconstruction: every 5 steps, from the current
/// simulated state, pick the catalog action whose rollout lands closest to
/// the logged position at the end of the period. The chosen rollout becomes
/// the new simulated state. Ties go to the earlier catalog entry.
pub fn reconstruct_actions(
    initial: &EgoState,
    recorded: &[Vec2],
    catalog: &ActionCatalog,
    p: &VehicleParams,
) -> Result<Reconstruction, DynamicsError> {
    if recorded.len() < STEPS_PER_KEYFRAME + 1 {
        return Err(DynamicsError::TooShort(recorded.len()));
    }
    let last = recorded.len() - 1;
    let mut state = *initial;
    let mut simulated = vec![initial.pose.position];
    let mut decisions = Vec::new();
    let mut t = 0;
    while t < last {
        let k = STEPS_PER_KEYFRAME.min(last - t);
        let target = recorded[t + k];
        let mut best: Option<(f64, &Action, Vec<EgoState>)> = None;
        for a in catalog.actions() {
            let traj = rollout(&state, &a.name, k, catalog, p)?;
            let dev = traj[k].pose.position.distance(target);
            if best.as_ref().is_none_or(|(d, _, _)| dev < *d) {
                best = Some((dev, a, traj));
            }
        }
        let (deviation, action, traj) = best.expect("catalog is never empty");
        simulated.extend(traj[1..].iter().map(|s| s.pose.position));
        decisions.push(ReconstructedDecision {
            step: t,
            action: action.name.clone(),
            deviation,
        });
        state = traj[k];
        t += k;
    }
    let devs: Vec<f64> = simulated
        .iter()
        .zip(recorded)
        .skip(1)
        .map(|(s, r)| s.distance(*r))
        .collect();
    let mean_deviation = devs.iter().sum::<f64>() / devs.len() as f64;
    let max_deviation = devs.iter().cloned().fold(0.0, f64::max);
    Ok(Reconstruction {
        decisions,
        mean_deviation,
        max_deviation,
        simulated,
    })
}
