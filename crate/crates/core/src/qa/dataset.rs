//! Dataset assembly: per-scenario candidate generation on independent
//! seeded streams, quota filling, skip reporting, post-hoc audit, JSONL and
//! manifest I/O, image rendering and downsampling.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{ActionCatalog, VehicleParams};
use crate::parallel::map_ordered;
use crate::qa::generate::{explain, format_mcq, gen_distractors, instantiate, render_question};
use crate::qa::oracle::{answer_query, CrashAssumptions, FrameContext};
use crate::qa::parser::parse_response;
use crate::qa::{templates, Binding, FrameRef, QaError, QaRecord, QuestionType, Split};
use crate::scenario::{ScenarioError, ScenarioRecord, SourceTag};
use crate::scene_graph::{build_scene_graph, SceneGraph, SpatialVocab, VisibilityPolicy};
use crate::view::{annotate_frame, render_frame, CameraRig, RenderOptions};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("audit failed for {} records; first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    Audit(Vec<String>),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QaConfig {
    /// Quota for types not listed in `quotas`.
    pub default_quota: usize,
    pub quotas: BTreeMap<QuestionType, usize>,
    /// Fraction of scenarios assigned to the train split.
    pub train_fraction: f64,
    /// Instances attempted per keyframe and type.
    pub per_frame: usize,
    pub visibility: VisibilityPolicy,
    pub vocab: SpatialVocab,
    pub crash: CrashAssumptions,
    pub camera: CameraRig,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self {
            default_quota: 100,
            quotas: BTreeMap::new(),
            train_fraction: 0.8,
            per_frame: 1,
            visibility: VisibilityPolicy::default(),
            vocab: SpatialVocab::default(),
            crash: CrashAssumptions::default(),
            camera: CameraRig::generation(),
        }
    }
}

impl QaConfig {
    pub fn quota(&self, q: QuestionType) -> usize {
        self.quotas.get(&q).copied().unwrap_or(self.default_quota)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err("train_fraction must be in [0, 1]".into());
        }
        if self.per_frame == 0 {
            return Err("per_frame must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.visibility.min_visible_fraction) {
            return Err("min_visible_fraction must be in [0, 1]".into());
        }
        if self.crash.max_horizon_s.is_nan() || self.crash.max_horizon_s <= 0.0 {
            return Err("max_horizon_s must be positive".into());
        }
        self.vocab.validate()?;
        self.camera.validate()
    }
}

/// Shared, read-only inputs of generation and audit.
#[derive(Debug, Clone, Copy)]
pub struct Engine<'a> {
    pub config: &'a QaConfig,
    pub vehicle: &'a VehicleParams,
    pub catalog: &'a ActionCatalog,
}

fn digest(master_seed: u64, scenario_id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(scenario_id.as_bytes());
    h.finalize().into()
}

/// Seed of a scenario's private generator, independent of scheduling.
pub fn scenario_seed(master_seed: u64, scenario_id: &str) -> u64 {
    let d = digest(master_seed, scenario_id);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Whole scenarios go to one split so frames never leak across splits.
pub fn scenario_split(master_seed: u64, scenario_id: &str, train_fraction: f64) -> Split {
    let d = digest(master_seed, scenario_id);
    let u = u64::from_le_bytes(d[8..16].try_into().expect("8 bytes")) as f64 / 2f64.powi(64);
    if u < train_fraction {
        Split::Train
    } else {
        Split::Test
    }
}

pub fn image_ref(scenario: &str, step: usize, highlight: Option<u32>) -> String {
    match highlight {
        Some(l) => format!("images/{scenario}/{step:04}_h{l}.png"),
        None => format!("images/{scenario}/{step:04}.png"),
    }
}

/// Labeled scene graph of one keyframe, as the question generator sees it.
pub fn frame_graph(
    scenario: &ScenarioRecord,
    step: usize,
    config: &QaConfig,
) -> Result<SceneGraph, ScenarioError> {
    let ann = annotate_frame(scenario, step, &config.camera, &config.visibility)?;
    Ok(build_scene_graph(
        &ann.frame,
        &config.visibility,
        &ann.labels.track_ids(),
        &config.vocab,
    ))
}

/// One complete question for a frame, or the reason it cannot be asked.
pub fn make_question(
    qtype: QuestionType,
    ctx: &FrameContext,
    rng: &mut ChaCha8Rng,
) -> Result<(Binding, QaRecordDraft), QaError> {
    let binding = instantiate(qtype, ctx, rng)?;
    let ans = answer_query(qtype, &binding, ctx)?;
    let distractors = gen_distractors(qtype, &ans.truth, &binding, ctx, rng)?;
    let body = render_question(qtype, &binding, ctx.catalog);
    let mcq = format_mcq(qtype, &body, &ans.truth, &distractors, rng);
    let explanation = explain(qtype, &binding, ctx.catalog, &ans.truth, &ans.detail, &mcq);
    Ok((
        binding,
        QaRecordDraft {
            question: mcq.question,
            options: mcq.options,
            answer: mcq.answer,
            explanation,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaRecordDraft {
    pub question: String,
    pub options: Vec<crate::qa::QaOption>,
    pub answer: char,
    pub explanation: String,
}

struct ScenarioOutput {
    candidates: BTreeMap<QuestionType, Vec<QaRecord>>,
    skips: BTreeMap<QuestionType, BTreeMap<String, usize>>,
}

fn scenario_candidates(
    scenario: &ScenarioRecord,
    engine: &Engine,
    master_seed: u64,
) -> Result<ScenarioOutput, ScenarioError> {
    let cfg = engine.config;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(master_seed, &scenario.id));
    let split = scenario_split(master_seed, &scenario.id, cfg.train_fraction);
    let mut out = ScenarioOutput {
        candidates: BTreeMap::new(),
        skips: BTreeMap::new(),
    };
    for step in scenario.keyframes() {
        let graph = frame_graph(scenario, step, cfg)?;
        let ctx = FrameContext {
            scenario,
            graph: &graph,
            catalog: engine.catalog,
            vehicle: engine.vehicle,
            crash: &cfg.crash,
        };
        for qtype in QuestionType::ALL {
            let quota = cfg.quota(qtype);
            let have = out.candidates.get(&qtype).map_or(0, Vec::len);
            if have >= quota {
                continue;
            }
            if qtype.train_only() && split != Split::Train {
                *out.skips
                    .entry(qtype)
                    .or_default()
                    .entry("train-only type in test split".into())
                    .or_default() += 1;
                continue;
            }
            let mut bound: Vec<Binding> = Vec::new();
            for _ in 0..cfg.per_frame {
                match make_question(qtype, &ctx, &mut rng) {
                    Ok((binding, draft)) => {
                        // at most one instance per binding and frame
                        if bound.contains(&binding) {
                            continue;
                        }
                        let highlight = (qtype == QuestionType::Grounding).then(|| binding.ids[0]);
                        let list = out.candidates.entry(qtype).or_default();
                        if list.len() >= quota {
                            break;
                        }
                        list.push(QaRecord {
                            id: format!("{}_{step:04}_{}_{}", scenario.id, qtype.name(), bound.len()),
                            qtype,
                            question: draft.question,
                            options: draft.options,
                            answer: draft.answer,
                            explanation: draft.explanation,
                            image_ref: image_ref(&scenario.id, step, highlight),
                            frame_ref: FrameRef {
                                scenario: scenario.id.clone(),
                                step,
                            },
                            domain: scenario.source_tag,
                            split,
                            params: binding.clone(),
                        });
                        bound.push(binding);
                    }
                    Err(e) => {
                        *out.skips.entry(qtype).or_default().entry(e.reason_key()).or_default() += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipEntry {
    #[serde(rename = "type")]
    pub qtype: QuestionType,
    pub requested: usize,
    pub emitted: usize,
    pub reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub template_version: u32,
    pub seed: u64,
    pub scenarios: usize,
    pub total: usize,
    pub by_type: BTreeMap<QuestionType, usize>,
    pub by_split: BTreeMap<Split, usize>,
    pub by_domain: BTreeMap<SourceTag, usize>,
    /// Types that fell short of their quota, with aggregated reasons.
    pub short: Vec<SkipEntry>,
}

impl Manifest {
    pub fn from_records(records: &[QaRecord], seed: u64, scenarios: usize) -> Self {
        let mut by_type = BTreeMap::new();
        let mut by_split = BTreeMap::new();
        let mut by_domain = BTreeMap::new();
        for r in records {
            *by_type.entry(r.qtype).or_insert(0) += 1;
            *by_split.entry(r.split).or_insert(0) += 1;
            *by_domain.entry(r.domain).or_insert(0) += 1;
        }
        Self {
            template_version: templates().version,
            seed,
            scenarios,
            total: records.len(),
            by_type,
            by_split,
            by_domain,
            short: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<QaRecord>,
    pub manifest: Manifest,
}

/// Generates questions for every keyframe of every scenario. Output is a
/// pure function of (scenarios, config, seed); `jobs` only changes speed.
/// Quotas are filled round-robin across scenarios in input order.
pub fn generate_dataset(
    scenarios: &[ScenarioRecord],
    engine: &Engine,
    seed: u64,
    jobs: usize,
) -> Result<Dataset, DatasetError> {
    engine.config.validate().map_err(DatasetError::Config)?;
    engine
        .vehicle
        .validate()
        .map_err(|e| DatasetError::Config(e.to_string()))?;
    engine
        .catalog
        .validate()
        .map_err(|e| DatasetError::Config(e.to_string()))?;
    let outputs = map_ordered(scenarios, jobs, |s| scenario_candidates(s, engine, seed))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut selected: Vec<(usize, QaRecord)> = Vec::new();
    let mut short = Vec::new();
    for qtype in QuestionType::ALL {
        let quota = engine.config.quota(qtype);
        let lists: Vec<&[QaRecord]> = outputs
            .iter()
            .map(|o| o.candidates.get(&qtype).map_or(&[][..], Vec::as_slice))
            .collect();
        let mut taken = 0;
        let mut round = 0;
        while taken < quota && lists.iter().any(|l| round < l.len()) {
            for (si, l) in lists.iter().enumerate() {
                if taken < quota && round < l.len() {
                    selected.push((si, l[round].clone()));
                    taken += 1;
                }
            }
            round += 1;
        }
        if taken < quota {
            let mut reasons = BTreeMap::new();
            for o in &outputs {
                for (k, v) in o.skips.get(&qtype).into_iter().flatten() {
                    *reasons.entry(k.clone()).or_insert(0) += v;
                }
            }
            short.push(SkipEntry {
                qtype,
                requested: quota,
                emitted: taken,
                reasons,
            });
        }
    }
    selected.sort_by(|(sa, a), (sb, b)| {
        (sa, a.frame_ref.step, a.qtype, &a.id).cmp(&(sb, b.frame_ref.step, b.qtype, &b.id))
    });
    let records: Vec<QaRecord> = selected.into_iter().map(|(_, r)| r).collect();

    let issues = audit_records(&records, scenarios, engine, jobs)?;
    if !issues.is_empty() {
        return Err(DatasetError::Audit(issues));
    }
    let mut manifest = Manifest::from_records(&records, seed, scenarios.len());
    manifest.short = short;
    Ok(Dataset { records, manifest })
}

fn unresolved_param() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[A-Za-z_][A-Za-z0-9_*]*>|\{[a-z_]+\}").expect("valid regex"))
}

/// True when the text still contains a template placeholder.
pub fn has_unresolved_param(text: &str) -> bool {
    unresolved_param().is_match(text)
}

/// Problems with a single record, checked against a freshly rebuilt graph.
fn audit_one(r: &QaRecord, ctx: &FrameContext) -> Vec<String> {
    let mut issues = Vec::new();
    if !r.is_well_formed() {
        issues.push(format!("{}: malformed options", r.id));
    }
    if has_unresolved_param(&r.question) || has_unresolved_param(&r.explanation) {
        issues.push(format!("{}: unresolved template parameter", r.id));
    }
    if r.qtype.train_only() && r.split != Split::Train {
        issues.push(format!("{}: train-only type outside train split", r.id));
    }
    if parse_response(&r.answer.to_string(), &r.options) != Ok(r.answer) {
        issues.push(format!("{}: answer letter does not parse to itself", r.id));
    }
    match answer_query(r.qtype, &r.params, ctx) {
        Ok(ans) => {
            let truth = ans.truth.text();
            let correct: Vec<char> = r
                .options
                .iter()
                .filter(|o| o.text == truth)
                .map(|o| o.letter)
                .collect();
            if correct != [r.answer] {
                issues.push(format!(
                    "{}: expected exactly option ({}) to read `{truth}`, matching options {correct:?}",
                    r.id, r.answer
                ));
            }
        }
        Err(e) => issues.push(format!("{}: replay failed: {e}", r.id)),
    }
    issues
}

/// Replays every record's query program on an independently rebuilt frame.
pub fn audit_records(
    records: &[QaRecord],
    scenarios: &[ScenarioRecord],
    engine: &Engine,
    jobs: usize,
) -> Result<Vec<String>, DatasetError> {
    let by_id: BTreeMap<&str, &ScenarioRecord> = scenarios.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut frames: BTreeMap<(&str, usize), Vec<&QaRecord>> = BTreeMap::new();
    for r in records {
        frames
            .entry((r.frame_ref.scenario.as_str(), r.frame_ref.step))
            .or_default()
            .push(r);
    }
    let groups: Vec<((&str, usize), Vec<&QaRecord>)> = frames.into_iter().collect();
    let results = map_ordered(&groups, jobs, |((sid, step), recs)| {
        let Some(scenario) = by_id.get(sid) else {
            return Ok(recs
                .iter()
                .map(|r| format!("{}: unknown scenario `{sid}`", r.id))
                .collect());
        };
        let graph = frame_graph(scenario, *step, engine.config)?;
        let ctx = FrameContext {
            scenario,
            graph: &graph,
            catalog: engine.catalog,
            vehicle: engine.vehicle,
            crash: &engine.config.crash,
        };
        Ok(recs.iter().flat_map(|r| audit_one(r, &ctx)).collect::<Vec<_>>())
    });
    let mut issues = Vec::new();
    for r in results {
        issues.extend(r.map_err(DatasetError::Scenario)?);
    }
    Ok(issues)
}

/// Renders every distinct image referenced by `records` under `root`,
/// with a JSON draw-plan next to each PNG. Returns the number of images.
pub fn render_images(
    records: &[QaRecord],
    scenarios: &[ScenarioRecord],
    config: &QaConfig,
    root: &Path,
    jobs: usize,
) -> Result<usize, DatasetError> {
    let by_id: BTreeMap<&str, &ScenarioRecord> = scenarios.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut wanted: BTreeSet<(String, usize, Option<u32>)> = BTreeSet::new();
    for r in records {
        let highlight = (r.qtype == QuestionType::Grounding).then(|| r.params.ids.first().copied()).flatten();
        wanted.insert((r.frame_ref.scenario.clone(), r.frame_ref.step, highlight));
    }
    let wanted: Vec<_> = wanted.into_iter().collect();
    let results = map_ordered(&wanted, jobs, |(sid, step, highlight)| {
        let scenario = by_id
            .get(sid.as_str())
            .ok_or_else(|| DatasetError::Config(format!("record refers to unknown scenario `{sid}`")))?;
        let ann = annotate_frame(scenario, *step, &config.camera, &config.visibility)?;
        let frame = render_frame(scenario, &ann, &RenderOptions { highlight: *highlight });
        let rel = image_ref(sid, *step, *highlight);
        let path = root.join(&rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&path, &frame.png).map_err(io_err(&path))?;
        let plan_path = path.with_extension("json");
        fs::write(&plan_path, frame.plan.to_json()).map_err(io_err(&plan_path))?;
        Ok::<(), DatasetError>(())
    });
    for r in results {
        r?;
    }
    Ok(wanted.len())
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), DatasetError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DatasetError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Keeps exactly `floor(n / factor)` items chosen by `seed`, in their
/// original order.
pub fn downsample<T: Clone>(items: &[T], factor: usize, seed: u64) -> Vec<T> {
    let factor = factor.max(1);
    let keep = items.len() / factor;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, items.len(), keep).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_keeps_floor_and_order() {
        let items: Vec<u32> = (0..103).collect();
        let d = downsample(&items, 4, 7);
        assert_eq!(d.len(), 25);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(d, downsample(&items, 4, 7));
    }

    #[test]
    fn scenario_seed_depends_on_both_inputs() {
        assert_ne!(scenario_seed(1, "a"), scenario_seed(2, "a"));
        assert_ne!(scenario_seed(1, "a"), scenario_seed(1, "b"));
        assert_eq!(scenario_seed(1, "a"), scenario_seed(1, "a"));
    }

    #[test]
    fn placeholder_detection_ignores_labels() {
        assert!(!has_unresolved_param("Is <0> closer than <12>?"));
        assert!(has_unresolved_param("How far is <id1>?"));
        assert!(has_unresolved_param("at {truth} distance"));
    }
}
