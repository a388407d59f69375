//! Filter update and void probabilities on a single worker versus the
//! default pool. Without the `parallel` feature only the sequential path is
//! measured.

use criterion::{criterion_group, criterion_main, Criterion};
use glmb::filter::{update, FilterConfig, LinearGaussianSensor};
use glmb::oracle::{random_glmb, RandomGlmb};
use glmb::rng::stream;
use glmb::{glmb_void_probability, GlmbDensity, Matrix, Region, Vector};
use rand::Rng;
use std::hint::black_box;

const SHAPE: RandomGlmb =
    RandomGlmb { state_dim: 2, labels: 5, max_components: 200, max_gaussians: 3, spread: 20.0, sd_range: (0.5, 3.0) };

fn workload() -> (GlmbDensity, Vec<Vector>, LinearGaussianSensor) {
    let mut rng = stream(7, &[0]);
    let density = random_glmb(&mut rng, &SHAPE, 0);
    let z = (0..12).map(|_| Vector::from_vec(vec![rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)])).collect();
    let sensor = LinearGaussianSensor {
        observation: Matrix::identity(2, 2),
        noise: Matrix::identity(2, 2),
        detection_probability: 0.9,
        clutter_intensity: 1e-3,
    };
    (density, z, sensor)
}

fn filter_update(density: &GlmbDensity, z: &[Vector], sensor: &LinearGaussianSensor, cfg: &FilterConfig) {
    black_box(update(density, z, sensor, cfg).unwrap());
}

fn void_grid(density: &GlmbDensity) {
    for i in 0..16 {
        let c = -15.0 + 2.0 * i as f64;
        let region = Region::disc([c, -c], 4.0, [0, 1]).unwrap();
        black_box(glmb_void_probability(density, &region).unwrap());
    }
}

fn bench(c: &mut Criterion) {
    let (density, z, sensor) = workload();
    let cfg = FilterConfig { max_components: 500, max_update_hypotheses: 32, ..FilterConfig::default() };
    let mut group = c.benchmark_group("update");
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("single_worker", |b| b.iter(|| single.install(|| filter_update(&density, &z, &sensor, &cfg))));
        group.bench_function("default_pool", |b| b.iter(|| filter_update(&density, &z, &sensor, &cfg)));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(|| filter_update(&density, &z, &sensor, &cfg)));
    group.finish();

    let mut group = c.benchmark_group("void_probability");
    group.sample_size(10);
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("single_worker", |b| b.iter(|| single.install(|| void_grid(&density))));
        group.bench_function("default_pool", |b| b.iter(|| void_grid(&density)));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(|| void_grid(&density)));
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
