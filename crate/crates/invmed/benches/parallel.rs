//! Compares the rayon build against the sequential fallback on the two hot
//! paths: the forward far-field map (one scattering solve per incident
//! direction) and the full linearization (solves for every observation and
//! incident direction plus the derivative blocks).
//!
//! The fan-out mode is fixed at compile time by the `parallel` feature, so
//! each benchmark id carries the active mode and the comparison is made
//! across two runs:
//!
//! ```text
//! cargo bench -p invmed                          # rayon (default)
//! cargo bench -p invmed --no-default-features    # sequential fallback
//! ```

use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use invmed::harness::{build_model, ExperimentConfig};

fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}

/// A mid-weight problem: 16x16 contrast cells, 64x64 solver grid, eight
/// directions each way. Large enough for the fan-out to matter, small enough
/// for a bench iteration to stay well under a second.
fn bench_config() -> ExperimentConfig {
    ExperimentConfig { m: 8, j: 8, n: 8, fine_grid: 64, ..ExperimentConfig::default() }
}

fn forward_map_bench(c: &mut Criterion) {
    let config = bench_config();
    config.validate().unwrap();
    let model = build_model(&config).unwrap();
    let truth = config.truth().unwrap();

    let mut group = c.benchmark_group("forward_map");
    group.sample_size(10).measurement_time(Duration::from_secs(8));
    group.bench_function(mode(), |b| {
        b.iter(|| black_box(model.forward_medium(black_box(&truth)).unwrap()))
    });
    group.finish();
}

fn assemble_bench(c: &mut Criterion) {
    let config = bench_config();
    config.validate().unwrap();
    let model = build_model(&config).unwrap();
    let truth = config.truth().unwrap();

    let mut group = c.benchmark_group("assemble");
    group.sample_size(10).measurement_time(Duration::from_secs(8));
    group.bench_function(mode(), |b| {
        b.iter(|| black_box(model.assemble(black_box(&truth)).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, forward_map_bench, assemble_bench);
criterion_main!(benches);
