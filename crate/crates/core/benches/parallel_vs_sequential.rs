use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geowarp::inference::distribution_moments;
use geowarp::predict::{predict_oos_with, NewData, PredictOptions};
use geowarp::proximity::build_kernel_proximity_with;
use geowarp::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn sites(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)])
        .collect()
}

fn model() -> FittedModel {
    let n = 200;
    let s = sites(n, 1);
    let basis = extract_basis(
        &build_kernel_proximity(&CoordinateSet::new(s.clone(), None).unwrap()).unwrap(),
        0.0,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| (0.5 + 0.4 * x[i] + (s[i][0] / 20.0).sin() + rng.random_range(-0.3..0.3)).exp())
        .collect();
    let data = ModelData::new(y).with_column("x", x);
    let spec = ModelSpec::new(TransformSpec::new(YType::Continuous, true, 1)).with_const(&["x"]);
    fit_resf(&data, &spec, &basis, &FitOptions::default()).unwrap()
}

fn kernel(c: &mut Criterion) {
    let coords = CoordinateSet::new(sites(1500, 3), None).unwrap();
    let mut g = c.benchmark_group("kernel_build");
    for (name, p) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_kernel_proximity_with(&coords, p).unwrap())
        });
    }
    g.finish();
}

fn moments(c: &mut Criterion) {
    let m = model();
    let mut g = c.benchmark_group("mc_moments");
    g.sample_size(20);
    for (name, p) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| distribution_moments(&m, 7, 200_000, p))
        });
    }
    g.finish();
}

fn prediction(c: &mut Criterion) {
    let m = model();
    let k = 2000;
    let c0 = CoordinateSet::new_prediction(sites(k, 4), None).unwrap();
    let e0 = extend_basis(&m.basis, &c0).unwrap();
    let nd = NewData::new(k).with_column("x", (0..k).map(|i| (i % 20) as f64 / 10.0).collect());
    let mut g = c.benchmark_group("prediction");
    g.sample_size(20);
    for (name, p) in POLICIES {
        let opts = PredictOptions {
            parallelism: p,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| predict_oos_with(&m, &nd, &e0, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, kernel, moments, prediction);
criterion_main!(benches);
