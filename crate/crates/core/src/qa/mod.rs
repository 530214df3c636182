//! Template question answering: question types, parameter bindings,
//! ground-truth oracles, distractors, multiple-choice formatting and
//! response parsing.

pub mod dataset;
pub mod generate;
pub mod oracle;
pub mod parser;
pub mod score;
mod templates;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::scenario::{Color, ObjectKind, SourceTag};
use crate::scene_graph::{DistanceBucket, Extreme, QueryError, Sector, SpatialEdge};
use crate::view::labels::label_text;

pub use generate::{format_mcq, gen_distractors, instantiate, render_question};
pub use oracle::{answer_query, Answer, CrashAssumptions, FrameContext};
pub use parser::{parse_response, ParseFailure};
pub use templates::{templates, Template, Templates};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QaError {
    #[error("{qtype} unsupported: {reason}")]
    Unsupported { qtype: QuestionType, reason: String },
    #[error("{0}: not enough distinct distractors")]
    InsufficientCandidates(QuestionType),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("{qtype}: binding is missing `{param}`")]
    MissingParam { qtype: QuestionType, param: &'static str },
}

impl QaError {
    pub(crate) fn unsupported(qtype: QuestionType, reason: &str) -> Self {
        QaError::Unsupported {
            qtype,
            reason: reason.to_string(),
        }
    }

    /// Short key used to aggregate skip reports.
    pub fn reason_key(&self) -> String {
        match self {
            QaError::Unsupported { reason, .. } => reason.clone(),
            QaError::InsufficientCandidates(_) => "insufficient candidates".into(),
            QaError::Query(e) => e.to_string(),
            QaError::Dynamics(e) => e.to_string(),
            QaError::MissingParam { param, .. } => format!("missing {param}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    IdentifyDistance,
    IdentifyPosition,
    IdentifyHeading,
    IdentifyColor,
    IdentifyType,
    IdentifyLeftmost,
    IdentifyRightmost,
    IdentifyClosest,
    IdentifyFrontmost,
    IdentifyBackmost,
    RelativeDistance,
    RelativePosition,
    RelativeHeading,
    RelativePredictCrashStill,
    RelativePredictCrashDynamic,
    PickCloser,
    OrderLeftmost,
    OrderRightmost,
    OrderClosest,
    OrderFrontmost,
    OrderBackmost,
    DescribeSector,
    DescribeDistance,
    DescribeScenario,
    EmbodiedDistance,
    EmbodiedSideness,
    EmbodiedCollision,
    PredictCrashEgoStill,
    PredictCrashEgoDynamic,
    Grounding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supertype {
    Spatial,
    Embodied,
    Grounding,
}

impl Supertype {
    pub fn name(self) -> &'static str {
        match self {
            Supertype::Spatial => "spatial",
            Supertype::Embodied => "embodied",
            Supertype::Grounding => "grounding",
        }
    }
}

impl QuestionType {
    pub const ALL: [QuestionType; 30] = [
        QuestionType::IdentifyDistance,
        QuestionType::IdentifyPosition,
        QuestionType::IdentifyHeading,
        QuestionType::IdentifyColor,
        QuestionType::IdentifyType,
        QuestionType::IdentifyLeftmost,
        QuestionType::IdentifyRightmost,
        QuestionType::IdentifyClosest,
        QuestionType::IdentifyFrontmost,
        QuestionType::IdentifyBackmost,
        QuestionType::RelativeDistance,
        QuestionType::RelativePosition,
        QuestionType::RelativeHeading,
        QuestionType::RelativePredictCrashStill,
        QuestionType::RelativePredictCrashDynamic,
        QuestionType::PickCloser,
        QuestionType::OrderLeftmost,
        QuestionType::OrderRightmost,
        QuestionType::OrderClosest,
        QuestionType::OrderFrontmost,
        QuestionType::OrderBackmost,
        QuestionType::DescribeSector,
        QuestionType::DescribeDistance,
        QuestionType::DescribeScenario,
        QuestionType::EmbodiedDistance,
        QuestionType::EmbodiedSideness,
        QuestionType::EmbodiedCollision,
        QuestionType::PredictCrashEgoStill,
        QuestionType::PredictCrashEgoDynamic,
        QuestionType::Grounding,
    ];

    pub fn name(self) -> &'static str {
        use QuestionType as Q;
        match self {
            Q::IdentifyDistance => "identify_distance",
            Q::IdentifyPosition => "identify_position",
            Q::IdentifyHeading => "identify_heading",
            Q::IdentifyColor => "identify_color",
            Q::IdentifyType => "identify_type",
            Q::IdentifyLeftmost => "identify_leftmost",
            Q::IdentifyRightmost => "identify_rightmost",
            Q::IdentifyClosest => "identify_closest",
            Q::IdentifyFrontmost => "identify_frontmost",
            Q::IdentifyBackmost => "identify_backmost",
            Q::RelativeDistance => "relative_distance",
            Q::RelativePosition => "relative_position",
            Q::RelativeHeading => "relative_heading",
            Q::RelativePredictCrashStill => "relative_predict_crash_still",
            Q::RelativePredictCrashDynamic => "relative_predict_crash_dynamic",
            Q::PickCloser => "pick_closer",
            Q::OrderLeftmost => "order_leftmost",
            Q::OrderRightmost => "order_rightmost",
            Q::OrderClosest => "order_closest",
            Q::OrderFrontmost => "order_frontmost",
            Q::OrderBackmost => "order_backmost",
            Q::DescribeSector => "describe_sector",
            Q::DescribeDistance => "describe_distance",
            Q::DescribeScenario => "describe_scenario",
            Q::EmbodiedDistance => "embodied_distance",
            Q::EmbodiedSideness => "embodied_sideness",
            Q::EmbodiedCollision => "embodied_collision",
            Q::PredictCrashEgoStill => "predict_crash_ego_still",
            Q::PredictCrashEgoDynamic => "predict_crash_ego_dynamic",
            Q::Grounding => "grounding",
        }
    }

    pub fn from_name(name: &str) -> Option<QuestionType> {
        QuestionType::ALL.into_iter().find(|q| q.name() == name)
    }

    pub fn supertype(self) -> Supertype {
        use QuestionType as Q;
        match self {
            Q::EmbodiedDistance
            | Q::EmbodiedSideness
            | Q::EmbodiedCollision
            | Q::PredictCrashEgoStill
            | Q::PredictCrashEgoDynamic => Supertype::Embodied,
            Q::Grounding => Supertype::Grounding,
            _ => Supertype::Spatial,
        }
    }

    /// Emitted only into training splits and never scored.
    pub fn train_only(self) -> bool {
        self == QuestionType::DescribeScenario
    }

    /// Fixed "(A) Yes (B) No" options.
    pub fn is_yes_no(self) -> bool {
        use QuestionType as Q;
        matches!(
            self,
            Q::RelativeHeading
                | Q::RelativePredictCrashStill
                | Q::RelativePredictCrashDynamic
                | Q::EmbodiedCollision
                | Q::PredictCrashEgoStill
                | Q::PredictCrashEgoDynamic
        )
    }

    /// Ordering criterion of identify_*st and order_* questions.
    pub fn extreme(self) -> Option<Extreme> {
        use QuestionType as Q;
        Some(match self {
            Q::IdentifyLeftmost | Q::OrderLeftmost => Extreme::Leftmost,
            Q::IdentifyRightmost | Q::OrderRightmost => Extreme::Rightmost,
            Q::IdentifyClosest | Q::OrderClosest => Extreme::Closest,
            Q::IdentifyFrontmost | Q::OrderFrontmost => Extreme::Frontmost,
            Q::IdentifyBackmost | Q::OrderBackmost => Extreme::Backmost,
            _ => return None,
        })
    }

    pub fn is_order(self) -> bool {
        self.name().starts_with("order_")
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Values of the `<duration>` parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Lookahead {
    #[serde(rename = "0.5s")]
    HalfSecond,
    #[serde(rename = "1.0s")]
    OneSecond,
    #[serde(rename = "2.0s")]
    TwoSeconds,
}

impl Lookahead {
    pub const ALL: [Lookahead; 3] = [Lookahead::HalfSecond, Lookahead::OneSecond, Lookahead::TwoSeconds];

    pub fn seconds(self) -> f64 {
        match self {
            Lookahead::HalfSecond => 0.5,
            Lookahead::OneSecond => 1.0,
            Lookahead::TwoSeconds => 2.0,
        }
    }

    /// Simulation steps at 0.1 s.
    pub fn steps(self) -> usize {
        match self {
            Lookahead::HalfSecond => 5,
            Lookahead::OneSecond => 10,
            Lookahead::TwoSeconds => 20,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Lookahead::HalfSecond => "0.5 seconds",
            Lookahead::OneSecond => "1 second",
            Lookahead::TwoSeconds => "2 seconds",
        }
    }
}

/// Concrete values bound to a template's parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ids: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Lookahead>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistanceBucket>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

impl Binding {
    pub(crate) fn id(&self, qtype: QuestionType, i: usize) -> Result<u32, QaError> {
        self.ids.get(i).copied().ok_or(QaError::MissingParam {
            qtype,
            param: if i == 0 { "id1" } else { "id2" },
        })
    }

    pub(crate) fn action(&self, qtype: QuestionType) -> Result<&str, QaError> {
        self.action
            .as_deref()
            .ok_or(QaError::MissingParam { qtype, param: "action" })
    }

    pub(crate) fn duration(&self, qtype: QuestionType) -> Result<Lookahead, QaError> {
        self.duration
            .ok_or(QaError::MissingParam { qtype, param: "duration" })
    }

    pub(crate) fn dist(&self, qtype: QuestionType) -> Result<DistanceBucket, QaError> {
        self.dist.ok_or(QaError::MissingParam { qtype, param: "dist" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Neither,
}

/// Ground-truth value of a question, before it is turned into option text.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Bucket(DistanceBucket),
    Sector(Sector),
    Heading(Sector),
    Color(Color),
    Kind(ObjectKind),
    Label(u32),
    /// Sorted ascending.
    LabelSet(Vec<u32>),
    Ordering(Vec<u32>),
    Edge(SpatialEdge),
    YesNo(bool),
    Side(Side),
    /// (label, kind), sorted by label.
    Inventory(Vec<(u32, ObjectKind)>),
}

fn join_labels(labels: &[u32]) -> String {
    labels
        .iter()
        .map(|&l| label_text(l))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Truth {
    pub fn text(&self) -> String {
        match self {
            Truth::Bucket(b) => b.word().to_string(),
            Truth::Sector(s) => s.word().to_string(),
            Truth::Heading(s) => match s {
                Sector::Front => "the same direction as us".to_string(),
                Sector::Rear => "the opposite direction".to_string(),
                other => other.word().to_string(),
            },
            Truth::Color(c) => c.name().to_string(),
            Truth::Kind(k) => k.name().to_string(),
            Truth::Label(l) => label_text(*l),
            Truth::LabelSet(ls) if ls.is_empty() => "none of them".to_string(),
            Truth::LabelSet(ls) | Truth::Ordering(ls) => join_labels(ls),
            Truth::Edge(e) => e.phrase().to_string(),
            Truth::YesNo(true) => "Yes".to_string(),
            Truth::YesNo(false) => "No".to_string(),
            Truth::Side(Side::Left) => "left".to_string(),
            Truth::Side(Side::Right) => "right".to_string(),
            Truth::Side(Side::Neither) => "neither, straight ahead".to_string(),
            Truth::Inventory(items) if items.is_empty() => "none".to_string(),
            Truth::Inventory(items) => items
                .iter()
                .map(|(l, k)| format!("{} {}", label_text(*l), k.name()))
                .collect::<Vec<_>>()
                .join(", "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaOption {
    pub letter: char,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub scenario: String,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub qtype: QuestionType,
    pub question: String,
    pub options: Vec<QaOption>,
    pub answer: char,
    pub explanation: String,
    pub image_ref: String,
    pub frame_ref: FrameRef,
    pub domain: SourceTag,
    pub split: Split,
    pub params: Binding,
}

impl QaRecord {
    pub fn option_text(&self, letter: char) -> Option<&str> {
        self.options
            .iter()
            .find(|o| o.letter == letter)
            .map(|o| o.text.as_str())
    }

    /// Letters consecutive from A, texts pairwise distinct, answer present.
    pub fn is_well_formed(&self) -> bool {
        if !(2..=4).contains(&self.options.len()) {
            return false;
        }
        let letters_ok = self
            .options
            .iter()
            .enumerate()
            .all(|(i, o)| o.letter == (b'A' + i as u8) as char);
        let mut texts: Vec<&str> = self.options.iter().map(|o| o.text.as_str()).collect();
        texts.sort_unstable();
        texts.dedup();
        letters_ok && texts.len() == self.options.len() && self.option_text(self.answer).is_some()
    }
}
