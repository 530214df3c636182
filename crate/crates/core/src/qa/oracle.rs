//! Ground-truth query programs: one per question type. Spatial types read
//! the scene graph; embodied and crash types forward-simulate or replay the
//! scenario log.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rollout, ActionCatalog, EgoState, VehicleParams};
use crate::geometry::{obb_overlap, OrientedRect, Vec2};
use crate::qa::{Binding, Lookahead, QaError, QuestionType, Side, Truth};
use crate::scenario::{to_ego_frame, ScenarioRecord, DT};
use crate::scene_graph::{Extreme, Node, SceneGraph, Sector, SpatialVocab};

/// Lateral displacement below which the ego counts as going straight.
pub const SIDE_DEADBAND_M: f64 = 0.1;

/// Objects closer than this in the ordering criterion make identify_*st,
/// order_* and pick_closer questions ambiguous; such questions are skipped.
pub const TIE_MARGIN_M: f64 = 0.5;

/// Motion assumptions behind the crash and collision questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrashAssumptions {
    /// Longest look-ahead of any crash question, seconds.
    pub max_horizon_s: f64,
    /// predict_crash_ego_still: the object replays its log against a
    /// frozen ego. When false, both stay frozen.
    pub ego_still_other_moves: bool,
    /// embodied_collision: the target replays its log instead of staying
    /// at its current pose.
    pub embodied_target_moves: bool,
}

impl Default for CrashAssumptions {
    fn default() -> Self {
        Self {
            max_horizon_s: 3.0,
            ego_still_other_moves: true,
            embodied_target_moves: false,
        }
    }
}

/// Everything a query program may consult for one keyframe.
#[derive(Debug, Clone, Copy)]
pub struct FrameContext<'a> {
    pub scenario: &'a ScenarioRecord,
    pub graph: &'a SceneGraph,
    pub catalog: &'a ActionCatalog,
    pub vehicle: &'a VehicleParams,
    pub crash: &'a CrashAssumptions,
}

impl FrameContext<'_> {
    pub fn step(&self) -> usize {
        self.graph.step
    }

    pub fn ego_state(&self) -> EgoState {
        let s = &self.scenario.ego_track().states[self.step()];
        EgoState {
            pose: s.pose,
            speed: s.speed,
        }
    }

    fn ego_half_extents(&self) -> Vec2 {
        self.scenario.ego_track().states[self.step()].half_extents
    }

    /// Steps of look-ahead: the requested duration, capped by the
    /// configured maximum and by what remains of the log.
    pub fn window(&self, duration: Option<Lookahead>) -> usize {
        let cap = (self.crash.max_horizon_s / DT).round() as usize;
        let remaining = self.scenario.horizon - 1 - self.step();
        duration.map_or(cap, |d| d.steps()).min(cap).min(remaining)
    }

    fn logged_rect(&self, track_id: &str, t: usize) -> Option<OrientedRect> {
        let s = self.scenario.track(track_id)?.states.get(t)?;
        s.valid.then(|| s.rect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub truth: Truth,
    /// Numeric justification quoted in the explanation.
    pub detail: String,
}

fn answer(truth: Truth, detail: String) -> Result<Answer, QaError> {
    Ok(Answer { truth, detail })
}

/// First offset in `0..=n` at which both boxes exist and overlap.
fn first_overlap(
    n: usize,
    a: impl Fn(usize) -> Option<OrientedRect>,
    b: impl Fn(usize) -> Option<OrientedRect>,
) -> Option<usize> {
    (0..=n).find(|&k| match (a(k), b(k)) {
        (Some(ra), Some(rb)) => obb_overlap(&ra, &rb).unwrap_or(false),
        _ => false,
    })
}

fn crash_detail(hit: Option<usize>, what: &str) -> String {
    match hit {
        Some(0) => format!("{what} already overlap"),
        Some(k) => format!("{what} first overlap after {:.1} s", k as f64 * DT),
        None => format!("{what} never overlap"),
    }
}

fn lateral(v: f64) -> String {
    if v >= 0.0 {
        format!("{:.1} m to the left", v)
    } else {
        format!("{:.1} m to the right", -v)
    }
}

fn extreme_detail(e: Extreme, n: &Node, vocab: &SpatialVocab) -> String {
    match e {
        Extreme::Closest => format!("{:.1} m away, at {} distance", n.distance, vocab.bucket(n.distance)),
        Extreme::Leftmost | Extreme::Rightmost => lateral(n.ego_center.y),
        Extreme::Frontmost | Extreme::Backmost => format!("{:.1} m ahead", n.ego_center.x),
    }
}

/// Order by `e`, requiring the first `gaps` consecutive score gaps to
/// exceed the tie margin.
fn separated_order(
    g: &SceneGraph,
    e: Extreme,
    labels: &[u32],
    gaps: usize,
    qtype: QuestionType,
) -> Result<Vec<u32>, QaError> {
    let order = g.order(e, labels)?;
    let scores = order
        .iter()
        .map(|&l| Ok(e.score(g.node(l)?)))
        .collect::<Result<Vec<f64>, QaError>>()?;
    if scores.windows(2).take(gaps).any(|w| w[0] - w[1] < TIE_MARGIN_M) {
        return Err(QaError::unsupported(qtype, "ambiguous ordering"));
    }
    Ok(order)
}

fn ego_rollout(ctx: &FrameContext, qtype: QuestionType, b: &Binding) -> Result<Vec<EgoState>, QaError> {
    let action = b.action(qtype)?;
    let d = b.duration(qtype)?;
    Ok(rollout(&ctx.ego_state(), action, d.steps(), ctx.catalog, ctx.vehicle)?)
}

/// Executes the query program of `qtype` on the frame.
pub fn answer_query(qtype: QuestionType, b: &Binding, ctx: &FrameContext) -> Result<Answer, QaError> {
    use QuestionType as Q;
    let g = ctx.graph;
    let step = ctx.step();
    match qtype {
        Q::IdentifyDistance => {
            let n = g.node(b.id(qtype, 0)?)?;
            answer(Truth::Bucket(g.vocab.bucket(n.distance)), format!("{:.1} m", n.distance))
        }
        Q::IdentifyPosition => {
            let l = b.id(qtype, 0)?;
            let c = g.node(l)?.ego_center;
            answer(
                Truth::Sector(g.sector_of(l)?),
                format!("{:.1} m ahead and {}", c.x, lateral(c.y)),
            )
        }
        Q::IdentifyHeading => {
            let l = b.id(qtype, 0)?;
            let h = g.node(l)?.heading;
            let e = g.ego.heading;
            let deg = e.cross(h).atan2(e.dot(h)).to_degrees();
            let dir = if deg >= 0.0 { "counterclockwise" } else { "clockwise" };
            answer(
                Truth::Heading(g.heading_sector_of(l)?),
                format!("{:.0} degrees {dir}", deg.abs()),
            )
        }
        Q::IdentifyColor => {
            let n = g.node(b.id(qtype, 0)?)?;
            match n.color {
                Some(c) => answer(Truth::Color(c), String::new()),
                None => Err(QaError::unsupported(qtype, "object has no color")),
            }
        }
        Q::IdentifyType => {
            let n = g.node(b.id(qtype, 0)?)?;
            answer(Truth::Kind(n.kind), String::new())
        }
        Q::IdentifyLeftmost
        | Q::IdentifyRightmost
        | Q::IdentifyClosest
        | Q::IdentifyFrontmost
        | Q::IdentifyBackmost => {
            let e = qtype.extreme().expect("identify_*st has an extreme");
            let order = separated_order(g, e, &g.labels(), 1, qtype)?;
            let l = *order
                .first()
                .ok_or_else(|| QaError::unsupported(qtype, "no labeled objects"))?;
            answer(Truth::Label(l), extreme_detail(e, g.node(l)?, &g.vocab))
        }
        Q::RelativeDistance => {
            let d = g.pair_distance(b.id(qtype, 0)?, b.id(qtype, 1)?)?;
            answer(Truth::Bucket(g.vocab.bucket(d)), format!("{d:.1} m"))
        }
        Q::RelativePosition => {
            match g.relative_position(b.id(qtype, 0)?, b.id(qtype, 1)?)? {
                Some(e) => answer(Truth::Edge(e), String::new()),
                None => Err(QaError::unsupported(qtype, "objects have no separating relation")),
            }
        }
        Q::RelativeHeading => {
            let (x, y) = (b.id(qtype, 0)?, b.id(qtype, 1)?);
            let deg = g.heading_difference_deg(x, y)?;
            answer(Truth::YesNo(g.same_direction(x, y)?), format!("{deg:.0} degrees"))
        }
        Q::RelativePredictCrashStill => {
            let (x, y) = (g.node(b.id(qtype, 0)?)?, g.node(b.id(qtype, 1)?)?);
            let ra = ctx.logged_rect(&x.track_id, step);
            let rb = ctx.logged_rect(&y.track_id, step);
            let hit = first_overlap(0, |_| ra, |_| rb);
            answer(Truth::YesNo(hit.is_some()), crash_detail(hit, "their footprints"))
        }
        Q::RelativePredictCrashDynamic => {
            let (x, y) = (g.node(b.id(qtype, 0)?)?, g.node(b.id(qtype, 1)?)?);
            let n = ctx.window(Some(b.duration(qtype)?));
            let hit = first_overlap(
                n,
                |k| ctx.logged_rect(&x.track_id, step + k),
                |k| ctx.logged_rect(&y.track_id, step + k),
            );
            answer(Truth::YesNo(hit.is_some()), crash_detail(hit, "they"))
        }
        Q::PickCloser => {
            let (x, y) = (b.id(qtype, 0)?, b.id(qtype, 1)?);
            let c = separated_order(g, Extreme::Closest, &[x, y], 1, qtype)?[0];
            answer(
                Truth::Label(c),
                format!("{:.1} m versus {:.1} m", g.node(x)?.distance, g.node(y)?.distance),
            )
        }
        Q::OrderLeftmost | Q::OrderRightmost | Q::OrderClosest | Q::OrderFrontmost | Q::OrderBackmost => {
            let e = qtype.extreme().expect("order_* has an extreme");
            let order = separated_order(g, e, &g.labels(), usize::MAX, qtype)?;
            let detail = order
                .iter()
                .map(|&l| Ok(format!("<{l}> ({})", extreme_detail(e, g.node(l)?, &g.vocab))))
                .collect::<Result<Vec<_>, QaError>>()?
                .join(", ");
            answer(Truth::Ordering(order), detail)
        }
        Q::DescribeSector => answer(Truth::LabelSet(g.labels_in_sector(Sector::Front)), String::new()),
        Q::DescribeDistance => answer(Truth::LabelSet(g.labels_in_band(b.dist(qtype)?)), String::new()),
        Q::DescribeScenario => answer(
            Truth::Inventory(g.nodes.iter().map(|(&l, n)| (l, n.kind)).collect()),
            String::new(),
        ),
        Q::EmbodiedDistance => {
            let traj = ego_rollout(ctx, qtype, b)?;
            let d = traj[0].pose.position.distance(traj[traj.len() - 1].pose.position);
            answer(Truth::Bucket(g.vocab.bucket(d)), format!("{d:.1} m"))
        }
        Q::EmbodiedSideness => {
            let traj = ego_rollout(ctx, qtype, b)?;
            let y = to_ego_frame(&traj[0].pose, traj[traj.len() - 1].pose.position).y;
            let side = if y > SIDE_DEADBAND_M {
                Side::Left
            } else if y < -SIDE_DEADBAND_M {
                Side::Right
            } else {
                Side::Neither
            };
            answer(Truth::Side(side), format!("{:.2} m", y.abs()))
        }
        Q::EmbodiedCollision => {
            let target = g.node(b.id(qtype, 0)?)?;
            let traj = ego_rollout(ctx, qtype, b)?;
            let he = ctx.ego_half_extents();
            let frozen = ctx.logged_rect(&target.track_id, step);
            let moves = ctx.crash.embodied_target_moves;
            let hit = first_overlap(
                traj.len() - 1,
                |k| Some(OrientedRect::new(traj[k].pose.position, traj[k].pose.heading, he)),
                |k| {
                    if moves {
                        ctx.logged_rect(&target.track_id, step + k.min(ctx.window(None)))
                    } else {
                        frozen
                    }
                },
            );
            answer(Truth::YesNo(hit.is_some()), crash_detail(hit, "the footprints"))
        }
        Q::PredictCrashEgoStill | Q::PredictCrashEgoDynamic => {
            let target = g.node(b.id(qtype, 0)?)?;
            let n = ctx.window(Some(b.duration(qtype)?));
            let ego_id = ctx.scenario.ego_id.as_str();
            let ego_moves = qtype == Q::PredictCrashEgoDynamic;
            let other_moves = ego_moves || ctx.crash.ego_still_other_moves;
            let hit = first_overlap(
                n,
                |k| ctx.logged_rect(ego_id, if ego_moves { step + k } else { step }),
                |k| ctx.logged_rect(&target.track_id, if other_moves { step + k } else { step }),
            );
            answer(Truth::YesNo(hit.is_some()), crash_detail(hit, "the footprints"))
        }
        Q::Grounding => {
            let l = b.id(qtype, 0)?;
            g.node(l)?;
            answer(Truth::Label(l), String::new())
        }
    }
}
