use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structfilt::clustering::{weighted_kmeans, weighted_kmeans_best, DEFAULT_MAX_ITERS, DEFAULT_RESTARTS};
use structfilt::harness::{run_trial, TrialConfig};
use structfilt::{
    Context, Experiment, ExperimentModel, GlobalConfig, LiuWest, ParticleCloud, Resampler, RgeModel, StructureTree,
};

fn bimodal_cloud(n: usize, rng: &mut ChaCha8Rng) -> ParticleCloud {
    let mut xs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let c = if i % 2 == 0 { 0.25 } else { 0.75 };
        xs.push(c + rng.random_range(-0.05..0.05));
        xs.push(1.0 - c + rng.random_range(-0.05..0.05));
    }
    let ws = (0..n).map(|_| rng.random::<f64>() + 0.01).collect();
    ParticleCloud::new(2, xs, ws).unwrap()
}

fn liu_west(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("liu_west");
    for n in [1000, 8000] {
        let cloud = bimodal_cloud(n, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &cloud, |b, cloud| {
            b.iter(|| LiuWest { a: 0.98 }.resample(cloud, cloud.len(), &mut rng).unwrap())
        });
    }
    group.finish();
}

fn kmeans(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cloud = bimodal_cloud(2000, &mut rng);
    let pts = cloud.raw_particles().to_vec();
    let ws = cloud.weights().to_vec();
    c.bench_function("kmeans/single/2000", |b| {
        b.iter(|| weighted_kmeans(black_box(&pts), 2, &ws, 2, DEFAULT_MAX_ITERS, &mut rng).unwrap())
    });
    c.bench_function("kmeans/restarts/2000", |b| {
        b.iter(|| {
            weighted_kmeans_best(
                black_box(&pts),
                2,
                &ws,
                2,
                DEFAULT_MAX_ITERS,
                DEFAULT_RESTARTS,
                &mut rng,
            )
            .unwrap()
        })
    });
}

/// Grows a tree by running RGE updates with structured resampling.
fn grown_tree(steps: usize) -> (StructureTree, RgeModel) {
    let model = RgeModel::new(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let root = Context {
        decision_floor: Some(0.1),
        champion_threshold: Some(2000.0),
        ..Context::root_defaults()
    };
    let mut tree = StructureTree::new(
        |r: &mut dyn rand::RngCore| model.sample_prior(r),
        GlobalConfig::default(),
        root,
        &mut rng,
    )
    .unwrap();
    let truth = [0.75, 0.15];
    for k in 0..steps {
        let e = Experiment::at_time(1.0 + k as f64 * 0.2);
        let d = model.simulate(&truth, &e, &mut rng);
        if tree.update(&model, d, &e).is_ok() {
            tree.prune().unwrap();
            tree.structured_resample(&LiuWest { a: 0.98 }, &mut rng).unwrap();
        }
    }
    (tree, model)
}

fn tree_update(c: &mut Criterion) {
    let (tree, model) = grown_tree(60);
    let e = Experiment::at_time(5.0);
    c.bench_function(&format!("tree/update/{}_leaves", tree.n_leaves()), |b| {
        b.iter_batched_ref(
            || tree.clone(),
            |t| t.update(&model, 2, &e).unwrap(),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("tree/flatten", |b| b.iter(|| black_box(&tree).flatten()));
}

fn trial(c: &mut Criterion) {
    let mut cfg = TrialConfig::rge_desk();
    cfg.n_experiments = 50;
    let mut group = c.benchmark_group("trial");
    group.sample_size(10);
    group.bench_function("rge/50", |b| b.iter(|| run_trial(&cfg, 0).unwrap()));
    group.finish();
}

criterion_group!(benches, liu_west, kmeans, tree_update, trial);
criterion_main!(benches);
