//! Data-parallel hot paths, measured under the default rayon pool and a
//! single-thread pool. With `--no-default-features` the same entry points
//! run the plain sequential code; the one-thread pool here approximates that
//! baseline without rebuilding.
//!
//! Run with `cargo bench -p graphtrack-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graphtrack_core::{
    eval, explain,
    explain::{ActivationStack, AttributionMap, LinearScore, MaskMode},
    gnn,
    gnn::LossWeights,
    io::TrackedFrame,
    synth, tracker, Rng,
};

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    [
        (
            "single-thread",
            rayon::ThreadPoolBuilder::new()
                .num_threads(1)
                .build()
                .expect("pool"),
        ),
        (
            "default-pool",
            rayon::ThreadPoolBuilder::new().build().expect("pool"),
        ),
    ]
}

/// mAP over the ten thresholds on a tracked throughput run.
fn bench_eval_map(c: &mut Criterion) {
    let preset = synth::throughput(7);
    let gt = synth::generate(&preset.scenario).unwrap();
    let stream = synth::degrade(&gt, &preset.degradation);
    let (results, _) = tracker::track_stream(&stream, preset.config.clone(), None).unwrap();
    let tracked: Vec<TrackedFrame> = results.iter().map(|r| r.to_tracked_frame()).collect();
    let thresholds = eval::standard_thresholds();

    let mut group = c.benchmark_group("eval_map");
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| eval::map_over_thresholds(&tracked, &gt.frames, &thresholds))
            })
        });
    }
    group.finish();
}

/// Leave-one-out faithfulness sweep over a wide activation stack.
fn bench_faithfulness(c: &mut Criterion) {
    let mut rng = Rng::new(42);
    let (channels, units) = (16usize, 512usize);
    let maps: Vec<Vec<f64>> = (0..channels)
        .map(|_| (0..units).map(|_| rng.uniform(0.1, 1.0)).collect())
        .collect();
    let weights: Vec<Vec<f64>> = (0..channels)
        .map(|_| (0..units).map(|_| rng.uniform(0.1, 1.0)).collect())
        .collect();
    let acts = ActivationStack::new(maps, vec![units], "bench").unwrap();
    let score = LinearScore { weights };
    let attribution = AttributionMap {
        method: "bench".into(),
        values: (0..units).map(|_| rng.next_f64()).collect(),
        shape: vec![units],
    };

    let mut group = c.benchmark_group("faithfulness");
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| {
                    explain::faithfulness(&score, &acts, &attribution, MaskMode::Zero).unwrap()
                })
            })
        });
    }
    group.finish();
}

/// Batch gradient step over many training instances.
fn bench_train_step(c: &mut Criterion) {
    let preset = synth::crossing_suite(1);
    let gt = synth::generate(&preset.scenario).unwrap();
    let stream = synth::degrade(&gt, &preset.degradation);
    let instances = gnn::build_training_set(&stream, &gt.frames, &preset.config);
    let mut rng = Rng::new(9);
    let dims = vec![instances[0].pair.h0_t.cols, 32, 32];
    let params = gnn::GnnParams::init(&dims, &mut rng);
    let weights = LossWeights::default();

    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &pool, |b, pool| {
            b.iter(|| {
                pool.install(|| {
                    let mut velocity = None;
                    gnn::train_step(&params, &instances, 1e-3, 0.0, &mut velocity, &weights)
                        .unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_eval_map, bench_faithfulness, bench_train_step);
criterion_main!(benches);
