//! Accuracy of model responses against a question file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::qa::parser::parse_response;
use crate::qa::QaRecord;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub correct: usize,
    pub parse_fail: usize,
    pub missing: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }

    pub fn parse_fail_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.parse_fail as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub overall: Tally,
    pub accuracy: f64,
    pub parse_fail_rate: f64,
    pub by_type: BTreeMap<String, Tally>,
    pub by_supertype: BTreeMap<String, Tally>,
    pub by_domain: BTreeMap<String, Tally>,
    /// Question ids without a response; scored as wrong.
    pub missing: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Correct,
    Wrong,
    ParseFail,
    Missing,
}

impl Tally {
    fn add(&mut self, o: Outcome) {
        self.total += 1;
        match o {
            Outcome::Correct => self.correct += 1,
            Outcome::ParseFail => self.parse_fail += 1,
            Outcome::Missing => self.missing += 1,
            Outcome::Wrong => {}
        }
    }
}

/// Scores every scorable record (train-only types are skipped).
pub fn score(records: &[QaRecord], responses: &BTreeMap<String, String>) -> ScoreReport {
    let mut overall = Tally::default();
    let mut by_type: BTreeMap<String, Tally> = BTreeMap::new();
    let mut by_supertype: BTreeMap<String, Tally> = BTreeMap::new();
    let mut by_domain: BTreeMap<String, Tally> = BTreeMap::new();
    let mut missing = Vec::new();
    for r in records.iter().filter(|r| !r.qtype.train_only()) {
        let outcome = match responses.get(&r.id) {
            None => {
                missing.push(r.id.clone());
                Outcome::Missing
            }
            Some(text) => match parse_response(text, &r.options) {
                Ok(l) if l == r.answer => Outcome::Correct,
                Ok(_) => Outcome::Wrong,
                Err(_) => Outcome::ParseFail,
            },
        };
        overall.add(outcome);
        by_type.entry(r.qtype.name().into()).or_default().add(outcome);
        by_supertype
            .entry(r.qtype.supertype().name().into())
            .or_default()
            .add(outcome);
        by_domain.entry(r.domain.name().into()).or_default().add(outcome);
    }
    ScoreReport {
        accuracy: overall.accuracy(),
        parse_fail_rate: overall.parse_fail_rate(),
        overall,
        by_type,
        by_supertype,
        by_domain,
        missing,
    }
}

impl ScoreReport {
    /// Fixed-width text table, one row per group.
    pub fn table(&self) -> String {
        let mut out = format!("{:<32} {:>7} {:>9} {:>10}\n", "group", "n", "accuracy", "parse_fail");
        let mut row = |name: &str, t: &Tally| {
            out.push_str(&format!(
                "{:<32} {:>7} {:>9.4} {:>10.4}\n",
                name,
                t.total,
                t.accuracy(),
                t.parse_fail_rate()
            ));
        };
        row("overall", &self.overall);
        for (k, t) in &self.by_supertype {
            row(&format!("supertype:{k}"), t);
        }
        for (k, t) in &self.by_domain {
            row(&format!("domain:{k}"), t);
        }
        for (k, t) in &self.by_type {
            row(k, t);
        }
        out
    }
}
