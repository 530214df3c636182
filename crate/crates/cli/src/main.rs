use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use scenebench_core::closed_loop::{metrics, run_suite, AgentSpec, EpisodeResult};
use scenebench_core::config::RunConfig;
use scenebench_core::dynamics::{reconstruct_actions, EgoState};
use scenebench_core::parallel::default_jobs;
use scenebench_core::qa::dataset::{
    downsample, generate_dataset, read_jsonl, render_images, write_jsonl, Engine,
};
use scenebench_core::qa::score::score;
use scenebench_core::qa::QaRecord;
use scenebench_core::scenario::{load_scenario, load_scenario_dir, ScenarioRecord};
use scenebench_core::synth::{synthetic_corpus, synthetic_suite};
use scenebench_core::view::{annotate_frame, render_frame, RenderOptions};

/// Seed of the bundled synthetic evaluation suite.
const SUITE_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "scenebench", version, about = "Driving scenarios to VQA data and closed-loop runs")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write synthetic scenario files (the bundled suite, or a corpus).
    Synth {
        /// Corpus size; without it the 10-scenario suite is written.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Generate a question dataset with images and a manifest.
    Generate {
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Skip image rendering.
        #[arg(long)]
        no_images: bool,
        /// Also write a copy keeping one record in K.
        #[arg(long, value_name = "K")]
        downsample: Option<usize>,
    },
    /// Render the annotated view of one frame.
    Annotate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        step: usize,
        /// Label to enclose with a white box.
        #[arg(long)]
        highlight: Option<u32>,
    },
    /// Score model responses against a question file.
    Score {
        #[arg(long)]
        questions: PathBuf,
        /// JSON object or JSONL of {"id", "text"}.
        #[arg(long)]
        responses: PathBuf,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Run closed-loop episodes.
    Drive {
        /// random, brake, straight, remote:URL, or remote (endpoint from config).
        #[arg(long)]
        agent: String,
        /// Scenario directory; defaults to the bundled synthetic suite.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Recover a per-decision action sequence from a logged ego path.
    Reconstruct {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Recompute metrics of a finished drive run.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Res<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(Failure::Usage(msg.into()))
}

struct Ctx {
    cfg: RunConfig,
    seed: Option<u64>,
    jobs: usize,
    out: Option<PathBuf>,
}

impl Ctx {
    fn seed(&self) -> Res<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => usage("a seed is required: pass --seed or set [seeds] master"),
        }
    }

    fn out(&self) -> Res<PathBuf> {
        let Some(out) = self.out.clone() else {
            return usage("an output directory is required: pass --out or set [paths] out");
        };
        fs::create_dir_all(&out)
            .with_context(|| format!("cannot create {}", out.display()))?;
        Ok(out)
    }

    fn scenario_dir(&self, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.cfg.paths.scenarios.clone())
    }
}

fn load_dir(dir: &Path) -> Res<Vec<ScenarioRecord>> {
    if !dir.is_dir() {
        return usage(format!("scenario directory {} does not exist", dir.display()));
    }
    let scenarios = load_scenario_dir(dir)
        .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    if scenarios.is_empty() {
        return usage(format!("no scenario files in {}", dir.display()));
    }
    Ok(scenarios)
}

fn load_one(path: &Path) -> Res<ScenarioRecord> {
    if !path.is_file() {
        return usage(format!("scenario file {} does not exist", path.display()));
    }
    load_scenario(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn cmd_synth(ctx: &Ctx, count: Option<usize>) -> Res<()> {
    let seed = ctx.seed()?;
    let out = ctx.out()?;
    let scenarios = match count {
        Some(n) => synthetic_corpus(n, seed),
        None => synthetic_suite(seed),
    };
    for s in &scenarios {
        let path = out.join(format!("{}.json", s.id));
        s.save(&path)
            .map_err(|e| anyhow!("cannot write {}: {e}", path.display()))?;
    }
    println!("wrote {} scenarios to {}", scenarios.len(), out.display());
    Ok(())
}

fn cmd_generate(
    ctx: &Ctx,
    scenarios: Option<PathBuf>,
    no_images: bool,
    factor: Option<usize>,
) -> Res<()> {
    let Some(dir) = ctx.scenario_dir(scenarios) else {
        return usage("no scenario directory: pass --scenarios or set [paths] scenarios");
    };
    if factor == Some(0) {
        return usage("--downsample must be at least 1");
    }
    let seed = ctx.seed()?;
    let scenarios = load_dir(&dir)?;
    let out = ctx.out()?;
    let engine = Engine {
        config: &ctx.cfg.qa,
        vehicle: &ctx.cfg.vehicle,
        catalog: &ctx.cfg.actions,
    };
    let data = generate_dataset(&scenarios, &engine, seed, ctx.jobs).map_err(|e| anyhow!(e))?;
    write_jsonl(&out.join("qa.jsonl"), &data.records).map_err(|e| anyhow!(e))?;
    let manifest = data.manifest.to_json();
    write(&out.join("manifest.json"), &manifest)?;
    if let Some(k) = factor {
        let kept = downsample(&data.records, k, seed);
        write_jsonl(&out.join(format!("qa_ds{k}.jsonl")), &kept).map_err(|e| anyhow!(e))?;
    }
    let images = if no_images {
        0
    } else {
        render_images(&data.records, &scenarios, &ctx.cfg.qa, &out, ctx.jobs).map_err(|e| anyhow!(e))?
    };
    println!(
        "{} questions from {} scenarios, {} images; manifest sha256 {}",
        data.records.len(),
        scenarios.len(),
        images,
        hex(&Sha256::digest(manifest.as_bytes()))
    );
    Ok(())
}

fn cmd_annotate(ctx: &Ctx, path: &Path, step: usize, highlight: Option<u32>) -> Res<()> {
    let scenario = load_one(path)?;
    if step >= scenario.horizon {
        return usage(format!("step {step} is beyond the horizon {}", scenario.horizon));
    }
    let out = ctx.out()?;
    let ann = annotate_frame(&scenario, step, &ctx.cfg.qa.camera, &ctx.cfg.qa.visibility)
        .map_err(|e| anyhow!(e))?;
    if let Some(l) = highlight {
        if !ann.labels.entries.contains_key(&l) {
            return usage(format!("label {l} is not visible in this frame"));
        }
    }
    let frame = render_frame(&scenario, &ann, &RenderOptions { highlight });
    let stem = format!("{}_{step:04}", scenario.id);
    let png = out.join(format!("{stem}.png"));
    fs::write(&png, &frame.png).with_context(|| format!("cannot write {}", png.display()))?;
    write(&out.join(format!("{stem}.json")), &frame.plan.to_json())?;
    println!("{:>5} {:<16} {:>9} relocated", "label", "track", "pixels");
    for (label, e) in &ann.labels.entries {
        println!("{label:>5} {:<16} {:>9} {}", e.track_id, e.bbox.area(), e.relocated);
    }
    Ok(())
}

#[derive(Deserialize)]
struct ResponseLine {
    id: String,
    text: String,
}

fn read_responses(path: &Path) -> Res<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(map) = serde_json::from_str::<BTreeMap<String, String>>(&text) {
        return Ok(map);
    }
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: ResponseLine = serde_json::from_str(line).map_err(|e| {
            Failure::Usage(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        map.insert(r.id, r.text);
    }
    Ok(map)
}

fn cmd_score(ctx: &Ctx, questions: &Path, responses: &Path, json: bool) -> Res<()> {
    if !questions.is_file() {
        return usage(format!("question file {} does not exist", questions.display()));
    }
    let records: Vec<QaRecord> =
        read_jsonl(questions).map_err(|e| Failure::Usage(e.to_string()))?;
    let responses = read_responses(responses)?;
    let report = score(&records, &responses);
    if ctx.out.is_some() {
        write(&ctx.out()?.join("score.json"), &to_json(&report))?;
    }
    if json {
        print!("{}", to_json(&report));
    } else {
        print!("{}", report.table());
        if !report.missing.is_empty() {
            println!("missing responses: {}", report.missing.len());
        }
    }
    Ok(())
}

fn cmd_drive(ctx: &Ctx, agent: &str, scenarios: Option<PathBuf>, json: bool) -> Res<()> {
    let spec = if agent == "remote" {
        match &ctx.cfg.agent.endpoint {
            Some(url) => AgentSpec::Remote(url.clone()),
            None => return usage("`--agent remote` needs [agent] endpoint in the config"),
        }
    } else {
        agent.parse::<AgentSpec>().map_err(Failure::Usage)?
    };
    let seed = ctx.seed()?;
    let scenarios = match ctx.scenario_dir(scenarios) {
        Some(dir) => load_dir(&dir)?,
        None => synthetic_suite(SUITE_SEED),
    };
    let out = ctx.out()?;
    let drive = ctx.cfg.drive_config(Some(out.join("observations")));
    let outcomes = run_suite(&scenarios, &spec, &ctx.cfg.agent.remote(), &drive, seed, ctx.jobs);
    let mut done = Vec::new();
    let mut aborted = Vec::new();
    for (s, o) in scenarios.iter().zip(outcomes) {
        match o {
            Ok(r) => done.push(r),
            Err(e) => {
                eprintln!("episode {} aborted: {e}", s.id);
                aborted.push(serde_json::json!({"scenario": s.id, "error": e.to_string()}));
            }
        }
    }
    write_jsonl(&out.join("episodes.jsonl"), &done).map_err(|e| anyhow!(e))?;
    write_jsonl(&out.join("aborted.jsonl"), &aborted).map_err(|e| anyhow!(e))?;
    if let Ok(report) = metrics(&done) {
        write(&out.join("metrics.json"), &to_json(&report))?;
        if json {
            print!("{}", to_json(&report));
        } else {
            println!("agent {}", spec.name());
            print!("{}", report.table());
        }
    }
    if aborted.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!("{} of {} episodes aborted", aborted.len(), scenarios.len())))
    }
}

fn cmd_reconstruct(ctx: &Ctx, path: &Path, json: bool) -> Res<()> {
    let scenario = load_one(path)?;
    let ego = &scenario.ego_track().states[0];
    let initial = EgoState {
        pose: ego.pose,
        speed: ego.speed,
    };
    let rec = reconstruct_actions(
        &initial,
        &scenario.ego_positions(),
        &ctx.cfg.actions,
        &ctx.cfg.vehicle,
    )
    .map_err(|e| anyhow!("{}: {e}", scenario.id))?;
    if ctx.out.is_some() {
        write(&ctx.out()?.join(format!("{}_actions.json", scenario.id)), &to_json(&rec))?;
    }
    if json {
        print!("{}", to_json(&rec));
    } else {
        println!("{:>5} {:<14} {:>10}", "step", "action", "deviation");
        for d in &rec.decisions {
            println!("{:>5} {:<14} {:>10.4}", d.step, d.action, d.deviation);
        }
        println!("mean deviation {:.6} m, max {:.6} m", rec.mean_deviation, rec.max_deviation);
    }
    Ok(())
}

fn cmd_report(run: &Path, json: bool) -> Res<()> {
    let path = run.join("episodes.jsonl");
    if !path.is_file() {
        return usage(format!("{} has no episodes.jsonl", run.display()));
    }
    let episodes: Vec<EpisodeResult> = read_jsonl(&path).map_err(|e| anyhow!(e))?;
    let report = metrics(&episodes).map_err(|e| anyhow!(e))?;
    if json {
        print!("{}", to_json(&report));
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

fn run(cli: Cli) -> Res<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if cli.jobs == Some(0) {
        return usage("--jobs must be at least 1");
    }
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seeds.master),
        jobs: cli.jobs.unwrap_or_else(default_jobs),
        out: cli.out.or_else(|| cfg.paths.out.clone()),
        cfg,
    };
    match cli.cmd {
        Cmd::Synth { count } => cmd_synth(&ctx, count),
        Cmd::Generate {
            scenarios,
            no_images,
            downsample,
        } => cmd_generate(&ctx, scenarios, no_images, downsample),
        Cmd::Annotate {
            scenario,
            step,
            highlight,
        } => cmd_annotate(&ctx, &scenario, step, highlight),
        Cmd::Score {
            questions,
            responses,
            json,
        } => cmd_score(&ctx, &questions, &responses, json),
        Cmd::Drive {
            agent,
            scenarios,
            json,
        } => cmd_drive(&ctx, &agent, scenarios, json),
        Cmd::Reconstruct { scenario, json } => cmd_reconstruct(&ctx, &scenario, json),
        Cmd::Report { run, json } => cmd_report(&run, json),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
