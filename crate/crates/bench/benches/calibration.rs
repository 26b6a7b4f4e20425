use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use tomocal_core::dcc::{parallel_moment_consistency, AngleView};
use tomocal_core::fanbeam::{calibrate_fanbeam, classify_groups, simulate_fanbeam, ClassifyOptions};
use tomocal_core::harness::{run_experiment, sample_scenario, stream_rng, ExperimentConfig, Scenario};
use tomocal_core::parallel::{calibrate_parallel, simulate_parallel};
use tomocal_core::{FanBeamRig, ParallelRig};

fn scenario(config: &ExperimentConfig) -> Scenario {
    sample_scenario(config, &mut stream_rng(config.seed, 0))
}

fn parallel(c: &mut Criterion) {
    let config = ExperimentConfig::parallel(ParallelRig::reference(), 80);
    let Scenario::Parallel { rig, views } = scenario(&config) else { unreachable!() };
    let obs = simulate_parallel(&rig, &views);
    c.bench_function("calibrate_parallel/80 views", |b| {
        b.iter(|| calibrate_parallel(black_box(&obs), Default::default()).unwrap())
    });

    let dcc: Vec<AngleView> = obs
        .iter()
        .zip(&views)
        .map(|(o, v)| AngleView {
            alpha: v.alpha,
            positions: o.all_positions().map(|x| x - v.shift).collect(),
        })
        .collect();
    c.bench_function("parallel_moment_consistency/80 views, k<=3", |b| {
        b.iter(|| parallel_moment_consistency(black_box(&dcc), 3).unwrap())
    });
}

fn fanbeam(c: &mut Criterion) {
    let config = ExperimentConfig::fanbeam(FanBeamRig::reference(), 30);
    let Scenario::Fanbeam { rig, views } = scenario(&config) else { unreachable!() };
    let obs = simulate_fanbeam(&rig, &views).unwrap();
    let pattern = rig.pattern();
    c.bench_function("calibrate_fanbeam/30 views", |b| {
        b.iter(|| calibrate_fanbeam(black_box(&obs), &pattern, rig.d, &Default::default()).unwrap())
    });

    let pooled = obs[3].concat();
    let opts = ClassifyOptions::default();
    c.bench_function("classify_groups/8 markers", |b| {
        b.iter(|| classify_groups(black_box(&pooled), &pattern, &opts).unwrap())
    });
}

fn experiments(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    for (name, mut config) in [
        ("table1", ExperimentConfig::parallel(ParallelRig::reference(), 80)),
        ("table2", ExperimentConfig::fanbeam(FanBeamRig::reference(), 30)),
    ] {
        config.n_realizations = 20;
        group.bench_function(name, |b| b.iter(|| run_experiment(black_box(&config)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, parallel, fanbeam, experiments);
criterion_main!(benches);
