//! Sequential against thread-pool execution of the two data-parallel hot
//! paths: dataset labelling and gradient accumulation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evjrs::data;
use evjrs::mipcore::HighsBackend;
use evjrs::par::{self, Parallelism};
use evjrs::pipeline::{generate_labelled_dataset, DatasetConfig};
use evjrs::scenariogen::{InstanceGenerator, InstanceGeneratorConfig};
use evjrs::surrogate::{train, ArchConfig, TrainConfig};

fn threads() -> usize {
    std::thread::available_parallelism().map_or(2, |n| n.get().max(2))
}

fn generator() -> InstanceGenerator {
    let cfg = InstanceGeneratorConfig { timesteps: 12, history_days: 60, ..Default::default() };
    InstanceGenerator::new(data::micro3(), data::micro_grid(), cfg, None, 1).unwrap()
}

fn labelling(c: &mut Criterion) {
    let g = generator();
    let cfg = DatasetConfig { ev_counts: vec![1, 2], samples_per_count: 8, e_max: 2, ..DatasetConfig::default() };
    let mut group = c.benchmark_group("label");
    group.sample_size(10);
    for mode in [Parallelism::Sequential, Parallelism::Threads] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &mode| {
            b.iter(|| par::with_workers(threads(), || generate_labelled_dataset(&g, &cfg, &HighsBackend::default(), mode)))
        });
    }
    group.finish();
}

fn training(c: &mut Criterion) {
    let g = generator();
    let cfg = DatasetConfig { ev_counts: vec![1, 2], samples_per_count: 8, e_max: 2, ..DatasetConfig::default() };
    let ds = generate_labelled_dataset(&g, &cfg, &HighsBackend::default(), Parallelism::Sequential).unwrap();
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for workers in [1, threads()] {
        let tcfg = TrainConfig {
            arch: ArchConfig { conv_channels: vec![16, 16], ..ArchConfig::default() },
            epochs: 2,
            workers,
            ..TrainConfig::default()
        };
        let name = if workers == 1 { "Sequential".to_string() } else { format!("Threads({workers})") };
        group.bench_function(name, |b| b.iter(|| train(&ds.samples, &tcfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, labelling, training);
criterion_main!(benches);
