//! Deterministic synthetic scenario generator. Ego logs are produced by
//! driving catalog actions through the kinematic model, so every synthetic
//! ego trajectory is exactly reconstructible from the default catalog.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{drive_actions, ActionCatalog, EgoState, VehicleParams, KEEP_STRAIGHT};
use crate::geometry::Vec2;
use crate::scenario::{
    Color, ObjectKind, ObjectState, Pose2D, ScenarioError, ScenarioRecord, SourceTag, Track, DT,
    STEPS_PER_KEYFRAME,
};

pub const LANE_WIDTH: f64 = 3.5;

pub const LAYOUTS: [&str; 4] = ["straight_road", "intersection", "cut_in", "static_obstacles"];

/// (length, width, height) in meters.
pub fn kind_dimensions(kind: ObjectKind) -> (f64, f64, f64) {
    match kind {
        ObjectKind::Sedan => (4.6, 1.9, 1.5),
        ObjectKind::Suv => (4.9, 2.0, 1.8),
        ObjectKind::Pickup => (5.3, 2.0, 1.9),
        ObjectKind::Truck => (8.0, 2.5, 3.2),
        ObjectKind::Bus => (11.0, 2.6, 3.2),
        ObjectKind::Pedestrian => (0.6, 0.6, 1.75),
        ObjectKind::Cyclist => (1.8, 0.7, 1.7),
        ObjectKind::Motorcycle => (2.1, 0.8, 1.5),
        ObjectKind::TrafficCone => (0.4, 0.4, 0.7),
        ObjectKind::Barrier => (2.0, 0.5, 1.0),
    }
}

const VEHICLES: [ObjectKind; 5] = [
    ObjectKind::Sedan,
    ObjectKind::Suv,
    ObjectKind::Pickup,
    ObjectKind::Truck,
    ObjectKind::Bus,
];

struct Builder {
    rng: ChaCha8Rng,
    horizon: usize,
    tracks: Vec<Track>,
}

impl Builder {
    fn new(seed: u64, layout_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(layout_index);
        let horizon = rng.random_range(90..=120);
        Self {
            rng,
            horizon,
            tracks: Vec::new(),
        }
    }

    fn random_color(&mut self) -> Color {
        Color::ALL[self.rng.random_range(0..Color::ALL.len())]
    }

    fn random_vehicle(&mut self) -> ObjectKind {
        // sedans dominate real traffic
        if self.rng.random_bool(0.4) {
            ObjectKind::Sedan
        } else {
            VEHICLES[self.rng.random_range(0..VEHICLES.len())]
        }
    }

    fn push_states(&mut self, id: String, kind: ObjectKind, color: Option<Color>, states: Vec<ObjectState>) {
        let (_, _, h) = kind_dimensions(kind);
        self.tracks.push(Track {
            id,
            kind,
            color,
            height: h,
            states,
        });
    }

    /// Constant-velocity object, optionally present only inside `window`.
    fn constant_velocity(
        &mut self,
        kind: ObjectKind,
        color: Option<Color>,
        start: Vec2,
        heading: Vec2,
        speed: f64,
        window: Option<(usize, usize)>,
    ) {
        let (l, w, _) = kind_dimensions(kind);
        let states = (0..self.horizon)
            .map(|k| ObjectState {
                pose: Pose2D::new(start + heading * (speed * DT * k as f64), heading),
                speed,
                half_extents: Vec2::new(l / 2.0, w / 2.0),
                valid: window.is_none_or(|(a, b)| (a..b).contains(&k)),
            })
            .collect();
        let id = format!("obj_{}", self.tracks.len());
        self.push_states(id, kind, color, states);
    }

    /// Ego driven by one action per decision period.
    fn ego(&mut self, start: EgoState, plan: &[&str]) -> Vec2 {
        let catalog = ActionCatalog::default();
        let params = VehicleParams::default();
        let decisions = self.horizon.div_ceil(STEPS_PER_KEYFRAME);
        let actions: Vec<&str> = (0..decisions)
            .map(|i| *plan.get(i).unwrap_or(&KEEP_STRAIGHT))
            .collect();
        let traj = drive_actions(&start, &actions, &catalog, &params)
            .expect("synthetic plans only use default catalog actions");
        let (l, w, _) = kind_dimensions(ObjectKind::Sedan);
        let states: Vec<ObjectState> = traj[..self.horizon]
            .iter()
            .map(|s| ObjectState {
                pose: s.pose,
                speed: s.speed,
                half_extents: Vec2::new(l / 2.0, w / 2.0),
                valid: true,
            })
            .collect();
        let dest = states.last().expect("horizon >= 1").pose.position;
        let color = Some(self.random_color());
        self.push_states("ego".into(), ObjectKind::Sedan, color, states);
        dest
    }

    fn finish(
        self,
        id: String,
        drivable: Vec<Vec<Vec2>>,
        destination: Vec2,
    ) -> ScenarioRecord {
        let mut tracks = self.tracks;
        // ego first, remaining order preserved
        tracks.sort_by_key(|t| t.id != "ego");
        ScenarioRecord {
            id,
            dt: DT,
            horizon: self.horizon,
            ego_id: "ego".into(),
            tracks,
            drivable,
            destination,
            source_tag: SourceTag::Synthetic,
        }
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
    vec![
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
    ]
}

/// Three-lane road along +x; ego in the middle lane (y = 0).
fn straight_road(seed: u64) -> ScenarioRecord {
    let mut b = Builder::new(seed, 0);
    let half = 1.5 * LANE_WIDTH;
    let speed = b.rng.random_range(5.0..9.0);
    let dest = b.ego(EgoState::new(Vec2::ZERO, Vec2::X, speed), &[]);
    let lead_gap = b.rng.random_range(18.0..35.0);
    let kind = b.random_vehicle();
    let color = Some(b.random_color());
    b.constant_velocity(kind, color, Vec2::new(lead_gap, 0.0), Vec2::X, speed + 1.0, None);
    for lane in [-1.0, 1.0] {
        let n = b.rng.random_range(1..=2);
        for _ in 0..n {
            let x = b.rng.random_range(-5.0..45.0);
            let v = b.rng.random_range(3.0..10.0);
            let kind = b.random_vehicle();
            let color = Some(b.random_color());
            b.constant_velocity(kind, color, Vec2::new(x, lane * LANE_WIDTH), Vec2::X, v, None);
        }
    }
    // parked cones and a pedestrian on the shoulder
    for i in 0..3 {
        let x = 12.0 + 9.0 * i as f64 + b.rng.random_range(0.0..3.0);
        b.constant_velocity(ObjectKind::TrafficCone, Some(Color::Orange), Vec2::new(x, -half - 0.8), Vec2::X, 0.0, None);
    }
    let px = b.rng.random_range(10.0..30.0);
    let color = Some(b.random_color());
    b.constant_velocity(ObjectKind::Pedestrian, color, Vec2::new(px, half + 1.5), Vec2::X, 1.2, None);
    b.finish(
        format!("straight_road-{seed}"),
        vec![rect(-30.0, -half, 400.0, half)],
        dest,
    )
}

/// Four-way crossing at (50, 0); ego approaches along +x and goes straight
/// or turns left.
fn intersection(seed: u64) -> ScenarioRecord {
    let mut b = Builder::new(seed, 1);
    let half = LANE_WIDTH;
    let turn = b.rng.random_bool(0.5);
    let speed = b.rng.random_range(4.0..7.0);
    let plan: Vec<&str> = if turn {
        vec![KEEP_STRAIGHT, KEEP_STRAIGHT, KEEP_STRAIGHT, "BRAKE", "TURN_LEFT", "TURN_LEFT", "TURN_LEFT"]
    } else {
        vec![KEEP_STRAIGHT, "SPEED_UP", KEEP_STRAIGHT]
    };
    let dest = b.ego(EgoState::new(Vec2::new(15.0, -LANE_WIDTH / 2.0), Vec2::X, speed), &plan);
    // cross traffic from the south, appearing later
    let kind = b.random_vehicle();
    let color = Some(b.random_color());
    let appear = b.rng.random_range(20..50);
    b.constant_velocity(kind, color, Vec2::new(50.0 + LANE_WIDTH / 2.0, -60.0), Vec2::Y, 6.0, Some((appear, usize::MAX)));
    // stopped car waiting on the north arm
    let kind = b.random_vehicle();
    let color = Some(b.random_color());
    b.constant_velocity(kind, color, Vec2::new(50.0 - LANE_WIDTH / 2.0, 18.0), -Vec2::Y, 0.0, None);
    // oncoming traffic
    for _ in 0..b.rng.random_range(1..=2) {
        let x = b.rng.random_range(70.0..110.0);
        let kind = b.random_vehicle();
        let color = Some(b.random_color());
        let v = b.rng.random_range(3.0..7.0);
        b.constant_velocity(kind, color, Vec2::new(x, LANE_WIDTH / 2.0), -Vec2::X, v, None);
    }
    // cyclist crossing on the far side
    let color = Some(b.random_color());
    b.constant_velocity(ObjectKind::Cyclist, color, Vec2::new(62.0, -20.0), Vec2::Y, 3.0, None);
    for i in 0..2 {
        b.constant_velocity(ObjectKind::Barrier, Some(Color::White), Vec2::new(40.0 + 3.0 * i as f64, half + 2.0), Vec2::X, 0.0, None);
    }
    b.finish(
        format!("intersection-{seed}"),
        vec![
            rect(0.0, -half, 150.0, half),
            rect(50.0 - half, -100.0, 50.0 + half, 100.0),
        ],
        dest,
    )
}

/// Two-lane road; a faster car in the left lane merges into the ego lane.
fn cut_in(seed: u64) -> ScenarioRecord {
    let mut b = Builder::new(seed, 2);
    let speed = b.rng.random_range(6.0..9.0);
    let dest = b.ego(EgoState::new(Vec2::ZERO, Vec2::X, speed), &[]);
    let kind = b.random_vehicle();
    let color = Some(b.random_color());
    let (l, w, _) = kind_dimensions(kind);
    let start_x = b.rng.random_range(-4.0..6.0);
    let v = speed + b.rng.random_range(2.0..4.0);
    let merge_start = b.rng.random_range(10..30);
    let merge_len = 25;
    let states = (0..b.horizon)
        .map(|k| {
            let x = start_x + v * DT * k as f64;
            let s = ((k as f64 - merge_start as f64) / merge_len as f64).clamp(0.0, 1.0);
            let y = LANE_WIDTH * (1.0 - s);
            let lateral_rate = if (merge_start..merge_start + merge_len).contains(&k) {
                -LANE_WIDTH / (merge_len as f64 * DT)
            } else {
                0.0
            };
            let heading = Vec2::new(v, lateral_rate).normalized().expect("v > 0");
            ObjectState {
                pose: Pose2D::new(Vec2::new(x, y), heading),
                speed: v.hypot(lateral_rate),
                half_extents: Vec2::new(l / 2.0, w / 2.0),
                valid: true,
            }
        })
        .collect();
    b.push_states("cutter".into(), kind, color, states);
    let lead = b.rng.random_range(35.0..50.0);
    let kind = b.random_vehicle();
    let color = Some(b.random_color());
    b.constant_velocity(kind, color, Vec2::new(lead, 0.0), Vec2::X, speed + 2.0, None);
    let color = Some(b.random_color());
    b.constant_velocity(ObjectKind::Motorcycle, color, Vec2::new(-15.0, LANE_WIDTH), Vec2::X, speed + 1.0, None);
    b.finish(
        format!("cut_in-{seed}"),
        vec![rect(-40.0, -LANE_WIDTH / 2.0, 400.0, 1.5 * LANE_WIDTH)],
        dest,
    )
}

/// Wide road with cones and barriers scattered outside the ego lane.
fn static_obstacles(seed: u64) -> ScenarioRecord {
    let mut b = Builder::new(seed, 3);
    let half = 2.5 * LANE_WIDTH;
    // starts at rest and pulls away
    let pull_away = b.rng.random_range(3..=6);
    let dest = b.ego(EgoState::new(Vec2::ZERO, Vec2::X, 0.0), &vec!["SPEED_UP"; pull_away]);
    let n = b.rng.random_range(6..=10);
    for _ in 0..n {
        let kind = if b.rng.random_bool(0.6) {
            ObjectKind::TrafficCone
        } else {
            ObjectKind::Barrier
        };
        let x = b.rng.random_range(8.0..70.0);
        let lane = [-2.0, -1.0, 1.0, 2.0][b.rng.random_range(0..4)];
        let y = lane * LANE_WIDTH + b.rng.random_range(-0.8..0.8);
        let color = Some(if kind == ObjectKind::TrafficCone {
            Color::Orange
        } else {
            b.random_color()
        });
        let heading = Vec2::X.rotated(b.rng.random_range(-0.6..0.6));
        b.constant_velocity(kind, color, Vec2::new(x, y), heading, 0.0, None);
    }
    for _ in 0..2 {
        let x = b.rng.random_range(15.0..60.0);
        let kind = b.random_vehicle();
        let color = Some(b.random_color());
        b.constant_velocity(kind, color, Vec2::new(x, -2.0 * LANE_WIDTH), Vec2::X, 0.0, None);
    }
    b.finish(
        format!("static_obstacles-{seed}"),
        vec![rect(-30.0, -half, 300.0, half)],
        dest,
    )
}

/// Builds the named layout for `seed`. Output is a pure function of both.
pub fn synth_scenario(layout: &str, seed: u64) -> Result<ScenarioRecord, ScenarioError> {
    let record = match layout {
        "straight_road" => straight_road(seed),
        "intersection" => intersection(seed),
        "cut_in" => cut_in(seed),
        "static_obstacles" => static_obstacles(seed),
        other => return Err(ScenarioError::UnknownLayout(other.to_string())),
    };
    record.validate()?;
    Ok(record)
}

/// The bundled 10-scenario evaluation suite.
pub fn synthetic_suite(seed: u64) -> Vec<ScenarioRecord> {
    const MIX: [&str; 10] = [
        "straight_road",
        "straight_road",
        "straight_road",
        "intersection",
        "intersection",
        "cut_in",
        "cut_in",
        "cut_in",
        "static_obstacles",
        "static_obstacles",
    ];
    MIX.iter()
        .enumerate()
        .map(|(i, layout)| {
            synth_scenario(layout, seed.wrapping_mul(100).wrapping_add(i as u64))
                .expect("bundled layouts are known")
        })
        .collect()
}

/// Round-robin corpus of `n` scenarios over all layouts.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<ScenarioRecord> {
    (0..n)
        .map(|i| {
            synth_scenario(LAYOUTS[i % LAYOUTS.len()], seed.wrapping_mul(1000).wrapping_add(i as u64))
                .expect("known layout")
        })
        .collect()
}
