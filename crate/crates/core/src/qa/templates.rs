use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::qa::QuestionType;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub question: String,
    pub explanation: String,
}

/// Versioned question wording, one template per question type.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Templates {
    pub version: u32,
    /// Appended after the option list.
    pub suffix: String,
    templates: BTreeMap<QuestionType, Template>,
}

impl Templates {
    pub fn get(&self, qtype: QuestionType) -> &Template {
        &self.templates[&qtype]
    }
}

const RESOURCE: &str = include_str!("templates.json");

pub fn templates() -> &'static Templates {
    static CELL: OnceLock<Templates> = OnceLock::new();
    CELL.get_or_init(|| {
        let t: Templates = serde_json::from_str(RESOURCE).expect("bundled templates parse");
        for q in QuestionType::ALL {
            assert!(t.templates.contains_key(&q), "no template for {q}");
        }
        t
    })
}
