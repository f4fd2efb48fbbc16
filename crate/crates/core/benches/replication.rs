//! Data-parallel replication loops against their sequential fallbacks.
//!
//! Every estimator splits replications over deterministic substreams, so
//! the parallel and sequential paths produce bit-identical results; these
//! benchmarks measure what the extra threads actually buy on the three
//! replication-heavy workloads (objective estimation, bootstrap order
//! testing, tail-shape screening).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mco_core::exec;
use mco_core::{
    convex_order_test, default_t_grid, khat_per_observation, mco_uniform, JointSampler,
    LatentModel, LinearGaussianLvm, ProposalBuilder, RandomStream, ScalarModel,
};
use nalgebra::{DMatrix, DVector};

fn with_mode<T>(sequential: bool, f: impl FnOnce() -> T) -> T {
    exec::force_sequential(sequential);
    let out = f();
    exec::force_sequential(false);
    out
}

fn bench_objective(c: &mut Criterion) {
    let marginal = ScalarModel::log_normal(0.0, 1.0).unwrap();
    let sampler = JointSampler::iid(marginal, 16).unwrap();
    let stream = RandomStream::from_seed(1);
    let mut group = c.benchmark_group("objective_16x20000");
    for (label, sequential) in [("parallel", false), ("sequential", true)] {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                with_mode(sequential, || {
                    mco_uniform(&sampler, 16, 20_000, &stream).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_bootstrap(c: &mut Criterion) {
    let model = ScalarModel::log_normal(0.0, 1.0).unwrap();
    let mut s1 = RandomStream::from_seed(2);
    let mut s2 = RandomStream::from_seed(3);
    let low = model.sample(&mut s1, 10_000);
    let high = model.sample(&mut s2, 10_000);
    let grid = default_t_grid(&low, &high).unwrap();
    let boot = RandomStream::from_seed(4);
    let mut group = c.benchmark_group("bootstrap_order_test_1000x10000");
    group.sample_size(10);
    for (label, sequential) in [("parallel", false), ("sequential", true)] {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                with_mode(sequential, || {
                    convex_order_test(&low, &high, &grid, 1_000, 0.99, &boot).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_khat_screening(c: &mut Criterion) {
    let lvm = LinearGaussianLvm::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]),
        DVector::from_row_slice(&[0.0, 0.0]),
        0.5,
    )
    .unwrap();
    let model = LatentModel::LinearGaussian(lvm);
    let dataset = model.synthesize_dataset(32, &RandomStream::from_seed(5));
    let builder = ProposalBuilder::PosteriorGaussian { cov_scale: 0.25 };
    let stream = RandomStream::from_seed(6);
    let mut group = c.benchmark_group("khat_screening_32x2000");
    group.sample_size(10);
    for (label, sequential) in [("parallel", false), ("sequential", true)] {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| {
                with_mode(sequential, || {
                    khat_per_observation(&model, &builder, &dataset, 2_000, &stream).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_objective, bench_bootstrap, bench_khat_screening);
criterion_main!(benches);
