//! Sequential (`jobs = 1`) against parallel (`jobs = cores`) question
//! generation and closed-loop driving. Build with `--no-default-features`
//! to measure the fallback without rayon at all.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use scenebench_core::closed_loop::{run_suite, AgentSpec, DriveConfig, RemoteSettings};
use scenebench_core::dynamics::{ActionCatalog, VehicleParams};
use scenebench_core::parallel::default_jobs;
use scenebench_core::qa::dataset::{generate_dataset, Engine, QaConfig};
use scenebench_core::synth::{synthetic_corpus, synthetic_suite};

fn job_counts() -> Vec<usize> {
    let mut v = vec![1, default_jobs()];
    v.dedup();
    v
}

fn bench_generate(c: &mut Criterion) {
    let scenarios = synthetic_corpus(8, 1);
    let config = QaConfig {
        default_quota: 20,
        ..QaConfig::default()
    };
    let vehicle = VehicleParams::default();
    let catalog = ActionCatalog::default();
    let engine = Engine {
        config: &config,
        vehicle: &vehicle,
        catalog: &catalog,
    };
    let mut group = c.benchmark_group("generate");
    group.sample_size(10);
    for jobs in job_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(jobs), &jobs, |b, &jobs| {
            b.iter(|| generate_dataset(&scenarios, &engine, 3, jobs).unwrap())
        });
    }
    group.finish();
}

fn bench_drive(c: &mut Criterion) {
    let suite = synthetic_suite(0);
    let cfg = DriveConfig::default();
    let remote = RemoteSettings::default();
    let mut group = c.benchmark_group("drive");
    group.sample_size(10);
    for jobs in job_counts() {
        group.bench_with_input(BenchmarkId::from_parameter(jobs), &jobs, |b, &jobs| {
            b.iter(|| run_suite(&suite, &AgentSpec::Random, &remote, &cfg, 3, jobs))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_generate, bench_drive);
criterion_main!(benches);
