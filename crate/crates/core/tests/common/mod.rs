#![allow(dead_code)]

use gendensity::density::{InducedDensity, LatentPrior};
use gendensity::differentiation::FdConfig;
use gendensity::generator::{demo_anchors, demo_centers, GeneratorHandle, DEFAULT_SHARPNESS};
use gendensity::spectrum::RankPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{}", env!("CARGO_MANIFEST_DIR"), name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn anchors(k: usize) -> Vec<Vec<f64>> {
    demo_anchors(k, 2)
}

pub fn memorizer(k: usize) -> GeneratorHandle {
    GeneratorHandle::memorizer(&demo_anchors(k, 2), &demo_centers(k, 64), DEFAULT_SHARPNESS).unwrap()
}

pub fn smooth(k: usize) -> GeneratorHandle {
    GeneratorHandle::smooth_interpolator(&demo_anchors(k, 2), &demo_centers(k, 64)).unwrap()
}

pub fn density(g: &GeneratorHandle) -> InducedDensity<'_> {
    density_with(g, LatentPrior::standard_normal(g.latent_dim()))
}

pub fn density_with(g: &GeneratorHandle, prior: LatentPrior) -> InducedDensity<'_> {
    InducedDensity::new(g, prior, FdConfig::default(), RankPolicy::default()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
