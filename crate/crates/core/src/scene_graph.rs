//! Per-keyframe scene graphs: labeled visible objects as nodes, directed
//! spatial edges between every ordered pair, and the spatial queries the
//! question generator is built on.
//!
//! Ego frame convention: x points forward along the ego heading, y to the
//! left. "Leftmost" therefore means largest y.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{check_corners, GeometryError, Vec2};
use crate::scenario::{to_ego_frame, Color, FrameObject, FrameSnapshot, ObjectKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("unknown label <{0}>")]
    UnknownLabel(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialEdge {
    L,
    Lb,
    Lf,
    B,
    F,
    R,
    Rb,
    Rf,
}

impl SpatialEdge {
    pub const ALL: [SpatialEdge; 8] = [
        SpatialEdge::L,
        SpatialEdge::Lb,
        SpatialEdge::Lf,
        SpatialEdge::B,
        SpatialEdge::F,
        SpatialEdge::R,
        SpatialEdge::Rb,
        SpatialEdge::Rf,
    ];

    pub fn code(self) -> &'static str {
        match self {
            SpatialEdge::L => "l",
            SpatialEdge::Lb => "lb",
            SpatialEdge::Lf => "lf",
            SpatialEdge::B => "b",
            SpatialEdge::F => "f",
            SpatialEdge::R => "r",
            SpatialEdge::Rb => "rb",
            SpatialEdge::Rf => "rf",
        }
    }

    /// Phrase completing "B is ... A".
    pub fn phrase(self) -> &'static str {
        match self {
            SpatialEdge::L => "to the left of",
            SpatialEdge::Lb => "to the left and behind",
            SpatialEdge::Lf => "to the left and in front of",
            SpatialEdge::B => "behind",
            SpatialEdge::F => "in front of",
            SpatialEdge::R => "to the right of",
            SpatialEdge::Rb => "to the right and behind",
            SpatialEdge::Rf => "to the right and in front of",
        }
    }

    /// The edge seen from the other endpoint.
    pub fn reversed(self) -> SpatialEdge {
        match self {
            SpatialEdge::L => SpatialEdge::R,
            SpatialEdge::R => SpatialEdge::L,
            SpatialEdge::F => SpatialEdge::B,
            SpatialEdge::B => SpatialEdge::F,
            SpatialEdge::Lf => SpatialEdge::Rb,
            SpatialEdge::Rb => SpatialEdge::Lf,
            SpatialEdge::Lb => SpatialEdge::Rf,
            SpatialEdge::Rf => SpatialEdge::Lb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sidedness {
    Left,
    Right,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrontBack {
    Front,
    Back,
    None,
}

fn lateral_range(corners: &[Vec2; 4], left: Vec2) -> (f64, f64) {
    corners
        .iter()
        .map(|c| c.dot(left))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p), hi.max(p))
        })
}

/// Left iff every vertex of `b` lies strictly beyond the leftmost vertex of
/// `a`, with `v` as the front direction; Right symmetric; otherwise None.
pub fn sidedness(a: &[Vec2; 4], b: &[Vec2; 4], v: Vec2) -> Result<Sidedness, GeometryError> {
    check_corners(a)?;
    check_corners(b)?;
    let left = v.perp();
    let (amin, amax) = lateral_range(a, left);
    let (bmin, bmax) = lateral_range(b, left);
    Ok(if bmin > amax {
        Sidedness::Left
    } else if bmax < amin {
        Sidedness::Right
    } else {
        Sidedness::None
    })
}

/// Front iff every vertex of `b` projects onto `heading` strictly beyond the
/// maximum projection of `a`; Back symmetric.
pub fn front_back(a: &[Vec2; 4], b: &[Vec2; 4], heading: Vec2) -> Result<FrontBack, GeometryError> {
    // the left of rot90cw(heading) is heading itself
    let v = Vec2::new(heading.y, -heading.x);
    Ok(match sidedness(a, b, v)? {
        Sidedness::Left => FrontBack::Front,
        Sidedness::Right => FrontBack::Back,
        Sidedness::None => FrontBack::None,
    })
}

pub fn compose_edge(side: Sidedness, fb: FrontBack) -> Option<SpatialEdge> {
    use FrontBack as Fb;
    use Sidedness as S;
    match (side, fb) {
        (S::Left, Fb::Front) => Some(SpatialEdge::Lf),
        (S::Left, Fb::None) => Some(SpatialEdge::L),
        (S::Left, Fb::Back) => Some(SpatialEdge::Lb),
        (S::None, Fb::Front) => Some(SpatialEdge::F),
        (S::None, Fb::Back) => Some(SpatialEdge::B),
        (S::Right, Fb::Front) => Some(SpatialEdge::Rf),
        (S::Right, Fb::None) => Some(SpatialEdge::R),
        (S::Right, Fb::Back) => Some(SpatialEdge::Rb),
        (S::None, Fb::None) => None,
    }
}

/// Directed edge from `a` to `b`: where `b` lies relative to `a`, judged in
/// the ego's orientation.
pub fn spatial_edge(
    a: &[Vec2; 4],
    b: &[Vec2; 4],
    ego_heading: Vec2,
) -> Result<Option<SpatialEdge>, GeometryError> {
    Ok(compose_edge(
        sidedness(a, b, ego_heading)?,
        front_back(a, b, ego_heading)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisibilityPolicy {
    pub min_visible_fraction: f64,
    pub min_pixels: u32,
    pub max_range_m: f64,
}

impl Default for VisibilityPolicy {
    fn default() -> Self {
        Self {
            min_visible_fraction: 0.5,
            min_pixels: 1200,
            max_range_m: 75.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBucket {
    VeryClose,
    Close,
    Medium,
    Far,
}

impl DistanceBucket {
    pub const ALL: [DistanceBucket; 4] = [
        DistanceBucket::VeryClose,
        DistanceBucket::Close,
        DistanceBucket::Medium,
        DistanceBucket::Far,
    ];

    pub fn word(self) -> &'static str {
        match self {
            DistanceBucket::VeryClose => "very close",
            DistanceBucket::Close => "close",
            DistanceBucket::Medium => "medium",
            DistanceBucket::Far => "far",
        }
    }
}

impl fmt::Display for DistanceBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

/// 45-degree sectors around the ego, counterclockwise from the front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sector {
    Front,
    FrontLeft,
    Left,
    RearLeft,
    Rear,
    RearRight,
    Right,
    FrontRight,
}

impl Sector {
    pub const ALL: [Sector; 8] = [
        Sector::Front,
        Sector::FrontLeft,
        Sector::Left,
        Sector::RearLeft,
        Sector::Rear,
        Sector::RearRight,
        Sector::Right,
        Sector::FrontRight,
    ];

    pub fn word(self) -> &'static str {
        match self {
            Sector::Front => "front",
            Sector::FrontLeft => "front-left",
            Sector::Left => "left",
            Sector::RearLeft => "rear-left",
            Sector::Rear => "rear",
            Sector::RearRight => "rear-right",
            Sector::Right => "right",
            Sector::FrontRight => "front-right",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Sector containing an ego-frame direction. Each sector is closed on
    /// its clockwise boundary; the zero vector maps to Front.
    pub fn of_direction(local: Vec2) -> Sector {
        let deg = local.y.atan2(local.x).to_degrees();
        let k = ((deg + 22.5) / 45.0).floor().rem_euclid(8.0) as usize;
        Sector::ALL[k]
    }

    /// Angular separation in multiples of 45 degrees (0..=4).
    pub fn steps_apart(self, other: Sector) -> usize {
        let d = (self.index() as isize - other.index() as isize).rem_euclid(8) as usize;
        d.min(8 - d)
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

/// Discretization settings for distances, directions and heading agreement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpatialVocab {
    /// Upper bounds of very close, close and medium (meters).
    pub distance_bounds: [f64; 3],
    /// Maximum heading difference for "roughly the same direction" (degrees).
    pub same_direction_deg: f64,
}

impl Default for SpatialVocab {
    fn default() -> Self {
        Self {
            distance_bounds: [2.0, 10.0, 30.0],
            same_direction_deg: 30.0,
        }
    }
}

impl SpatialVocab {
    pub fn bucket(&self, d: f64) -> DistanceBucket {
        let [a, b, c] = self.distance_bounds;
        if d < a {
            DistanceBucket::VeryClose
        } else if d < b {
            DistanceBucket::Close
        } else if d < c {
            DistanceBucket::Medium
        } else {
            DistanceBucket::Far
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let [a, b, c] = self.distance_bounds;
        if !(0.0 < a && a < b && b < c) {
            return Err("distance_bounds must be positive and increasing".into());
        }
        if !(self.same_direction_deg > 0.0 && self.same_direction_deg < 180.0) {
            return Err("same_direction_deg must be in (0, 180)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeId {
    Ego,
    Label(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: NodeId,
    pub track_id: String,
    pub kind: ObjectKind,
    pub color: Option<Color>,
    pub height: f64,
    pub corners: [Vec2; 4],
    pub heading: Vec2,
    pub speed: f64,
    pub ego_center: Vec2,
    pub distance: f64,
}

impl Node {
    fn from_frame(id: NodeId, obj: &FrameObject, ego: &FrameObject) -> Self {
        let ego_center = to_ego_frame(&ego.state.pose, obj.state.pose.position);
        Self {
            id,
            track_id: obj.track_id.clone(),
            kind: obj.kind,
            color: obj.color,
            height: obj.height,
            corners: obj.state.rect().corners(),
            heading: obj.state.pose.heading,
            speed: obj.state.speed,
            ego_center,
            distance: ego_center.norm(),
        }
    }
}

/// Ordering criteria shared by identify_*, order_* and the leading-object
/// queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extreme {
    Closest,
    Leftmost,
    Rightmost,
    Frontmost,
    Backmost,
}

impl Extreme {
    pub const ALL: [Extreme; 5] = [
        Extreme::Closest,
        Extreme::Leftmost,
        Extreme::Rightmost,
        Extreme::Frontmost,
        Extreme::Backmost,
    ];

    pub fn word(self) -> &'static str {
        match self {
            Extreme::Closest => "closest",
            Extreme::Leftmost => "leftmost",
            Extreme::Rightmost => "rightmost",
            Extreme::Frontmost => "frontmost",
            Extreme::Backmost => "backmost",
        }
    }

    /// Larger is more extreme.
    pub fn score(self, n: &Node) -> f64 {
        match self {
            Extreme::Closest => -n.distance,
            Extreme::Leftmost => n.ego_center.y,
            Extreme::Rightmost => -n.ego_center.y,
            Extreme::Frontmost => n.ego_center.x,
            Extreme::Backmost => -n.ego_center.x,
        }
    }
}

/// Spatial query kinds, for callers that want a single entry point.
#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Extreme(Extreme),
    Order(Extreme, Vec<u32>),
    Sector(u32),
    DistanceBucket(u32),
    HeadingSector(u32),
    InSector(Sector),
    InDistanceBand(DistanceBucket),
    RelativeDistance(u32, u32),
    RelativePosition(u32, u32),
    SameDirection(u32, u32),
    Closer(u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryAnswer {
    Label(Option<u32>),
    Labels(Vec<u32>),
    Sector(Sector),
    Bucket(DistanceBucket),
    Edge(Option<SpatialEdge>),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub scenario_id: String,
    pub step: usize,
    pub ego: Node,
    pub nodes: BTreeMap<u32, Node>,
    pub edges: BTreeMap<(NodeId, NodeId), SpatialEdge>,
    pub vocab: SpatialVocab,
}

/// Builds the graph over objects that carry a label and lie within range.
/// Edges are evaluated for every ordered pair of nodes including the ego,
/// with the ego heading as reference direction.
pub fn build_scene_graph(
    frame: &FrameSnapshot,
    policy: &VisibilityPolicy,
    labels: &BTreeMap<u32, String>,
    vocab: &SpatialVocab,
) -> SceneGraph {
    let ego = Node::from_frame(NodeId::Ego, &frame.ego, &frame.ego);
    let mut nodes = BTreeMap::new();
    for (&label, track_id) in labels {
        let Some(obj) = frame.others.iter().find(|o| &o.track_id == track_id) else {
            continue;
        };
        let node = Node::from_frame(NodeId::Label(label), obj, &frame.ego);
        if node.distance <= policy.max_range_m {
            nodes.insert(label, node);
        }
    }
    let heading = frame.ego.state.pose.heading;
    let all: Vec<&Node> = std::iter::once(&ego).chain(nodes.values()).collect();
    let mut edges = BTreeMap::new();
    for a in &all {
        for b in &all {
            if a.id == b.id {
                continue;
            }
            // validated scenarios never produce degenerate boxes
            if let Ok(Some(e)) = spatial_edge(&a.corners, &b.corners, heading) {
                edges.insert((a.id, b.id), e);
            }
        }
    }
    SceneGraph {
        scenario_id: frame.scenario_id.clone(),
        step: frame.step,
        ego,
        nodes,
        edges,
        vocab: vocab.clone(),
    }
}

impl SceneGraph {
    pub fn labels(&self) -> Vec<u32> {
        self.nodes.keys().copied().collect()
    }

    pub fn node(&self, label: u32) -> Result<&Node, QueryError> {
        self.nodes.get(&label).ok_or(QueryError::UnknownLabel(label))
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<SpatialEdge> {
        self.edges.get(&(from, to)).copied()
    }

    /// Labels sorted most-extreme first; ties by ascending label.
    pub fn order(&self, by: Extreme, labels: &[u32]) -> Result<Vec<u32>, QueryError> {
        let mut scored = labels
            .iter()
            .map(|&l| Ok((by.score(self.node(l)?), l)))
            .collect::<Result<Vec<_>, QueryError>>()?;
        scored.sort_by(|(sa, la), (sb, lb)| sb.total_cmp(sa).then(la.cmp(lb)));
        Ok(scored.into_iter().map(|(_, l)| l).collect())
    }

    pub fn extreme(&self, by: Extreme) -> Option<u32> {
        self.order(by, &self.labels())
            .expect("own labels resolve")
            .first()
            .copied()
    }

    pub fn sector_of(&self, label: u32) -> Result<Sector, QueryError> {
        Ok(Sector::of_direction(self.node(label)?.ego_center))
    }

    pub fn distance_bucket_of(&self, label: u32) -> Result<DistanceBucket, QueryError> {
        Ok(self.vocab.bucket(self.node(label)?.distance))
    }

    /// Heading of the object expressed relative to the ego's front.
    pub fn heading_sector_of(&self, label: u32) -> Result<Sector, QueryError> {
        let h = self.node(label)?.heading;
        let e = self.ego.heading;
        Ok(Sector::of_direction(Vec2::new(h.dot(e), h.dot(e.perp()))))
    }

    pub fn labels_in_sector(&self, sector: Sector) -> Vec<u32> {
        self.nodes
            .values()
            .filter(|n| Sector::of_direction(n.ego_center) == sector)
            .filter_map(|n| match n.id {
                NodeId::Label(l) => Some(l),
                NodeId::Ego => None,
            })
            .collect()
    }

    pub fn labels_in_band(&self, band: DistanceBucket) -> Vec<u32> {
        self.nodes
            .iter()
            .filter(|(_, n)| self.vocab.bucket(n.distance) == band)
            .map(|(&l, _)| l)
            .collect()
    }

    /// Center-to-center distance between two objects.
    pub fn pair_distance(&self, a: u32, b: u32) -> Result<f64, QueryError> {
        Ok(self.node(a)?.ego_center.distance(self.node(b)?.ego_center))
    }

    /// Where `target` lies relative to `reference`.
    pub fn relative_position(&self, target: u32, reference: u32) -> Result<Option<SpatialEdge>, QueryError> {
        self.node(target)?;
        self.node(reference)?;
        Ok(self.edge(NodeId::Label(reference), NodeId::Label(target)))
    }

    pub fn heading_difference_deg(&self, a: u32, b: u32) -> Result<f64, QueryError> {
        let ha = self.node(a)?.heading;
        let hb = self.node(b)?.heading;
        Ok(ha.cross(hb).atan2(ha.dot(hb)).abs().to_degrees())
    }

    pub fn same_direction(&self, a: u32, b: u32) -> Result<bool, QueryError> {
        Ok(self.heading_difference_deg(a, b)? <= self.vocab.same_direction_deg)
    }

    /// The nearer of two objects; ties go to the smaller label.
    pub fn closer_of(&self, a: u32, b: u32) -> Result<u32, QueryError> {
        Ok(self.order(Extreme::Closest, &[a, b])?[0])
    }

    pub fn query(&self, q: &Query) -> Result<QueryAnswer, QueryError> {
        Ok(match q {
            Query::Extreme(e) => QueryAnswer::Label(self.extreme(*e)),
            Query::Order(e, labels) => QueryAnswer::Labels(self.order(*e, labels)?),
            Query::Sector(l) => QueryAnswer::Sector(self.sector_of(*l)?),
            Query::DistanceBucket(l) => QueryAnswer::Bucket(self.distance_bucket_of(*l)?),
            Query::HeadingSector(l) => QueryAnswer::Sector(self.heading_sector_of(*l)?),
            Query::InSector(s) => QueryAnswer::Labels(self.labels_in_sector(*s)),
            Query::InDistanceBand(b) => QueryAnswer::Labels(self.labels_in_band(*b)),
            Query::RelativeDistance(a, b) => {
                QueryAnswer::Bucket(self.vocab.bucket(self.pair_distance(*a, *b)?))
            }
            Query::RelativePosition(a, b) => QueryAnswer::Edge(self.relative_position(*a, *b)?),
            Query::SameDirection(a, b) => QueryAnswer::Bool(self.same_direction(*a, *b)?),
            Query::Closer(a, b) => QueryAnswer::Label(Some(self.closer_of(*a, *b)?)),
        })
    }

    /// JSON dump for debugging.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct EdgeDump {
            from: NodeId,
            to: NodeId,
            edge: SpatialEdge,
            phrase: &'static str,
        }
        let edges: Vec<EdgeDump> = self
            .edges
            .iter()
            .map(|(&(from, to), &edge)| EdgeDump {
                from,
                to,
                edge,
                phrase: edge.phrase(),
            })
            .collect();
        serde_json::json!({
            "scenario": self.scenario_id,
            "step": self.step,
            "ego": self.ego,
            "nodes": self.nodes.values().collect::<Vec<_>>(),
            "edges": edges,
        })
    }
}
