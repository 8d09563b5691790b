use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use liqlab_bench::{fixture_csv, fixture_tape};
use liqlab_core::dataset::{drop_masked, split};
use liqlab_core::models::{train_forest, ForestConfig};
use liqlab_core::sampler::bucketize;
use liqlab_core::tickdata::parse_tape;
use liqlab_core::{build_features, Tz, Metric, Part, SessionWindow, SplitFractions, SplitMode};

fn ingest(c: &mut Criterion) {
    let tape = fixture_tape(2, 2);
    let csv = fixture_csv(&tape);
    let mut group = c.benchmark_group("ingest");
    group.throughput(Throughput::Elements(tape.len() as u64));
    group.bench_function("parse_tape", |b| b.iter(|| parse_tape(csv.as_slice()).unwrap()));
    group.bench_function("bucketize", |b| b.iter(|| bucketize(&tape)));
    group.bench_function("build_features", |b| {
        b.iter_batched(
            || tape.clone(),
            |t| build_features(t, &SessionWindow::default(), ny()).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn forest(c: &mut Criterion) {
    let tape = fixture_tape(5, 1);
    let table = build_features(tape, &SessionWindow::default(), ny()).unwrap();
    let features = Metric::ALL.to_vec();
    let (rows, _) = drop_masked(table.labeled_rows().unwrap(), &features);
    let data = split(rows, &features, SplitFractions([70, 15, 15]), SplitMode::Chronological).unwrap();
    let train = data.samples(Part::Train);
    let config = ForestConfig { n_trees: 50, ..ForestConfig::default() };
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("train_50_trees", |b| b.iter(|| train_forest(&train, &config).unwrap()));
    group.finish();
}

criterion_group!(benches, ingest, forest);
criterion_main!(benches);

fn ny() -> Tz {
    "America/New_York".parse().unwrap()
}
