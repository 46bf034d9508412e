#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robustmix::{GaussianMixture, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `B Bᵀ + δI` with uniform entries, well conditioned enough for every test.
pub fn random_spd(r: &mut ChaCha8Rng, d: usize) -> Matrix {
    let b: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let delta = r.random_range(0.2..1.5);
    let rows = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let s: f64 = (0..d).map(|k| b[i][k] * b[j][k]).sum();
                    s + if i == j { delta } else { 0.0 }
                })
                .collect()
        })
        .collect();
    Matrix::from_rows(rows).unwrap()
}

pub fn random_diag(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.random_range(0.3..4.0)).collect()
}

/// Entries with magnitude in `[lo, hi]` and random signs.
pub fn random_mu(r: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let m = r.random_range(lo..=hi);
            if r.random_bool(0.5) { m } else { -m }
        })
        .collect()
}

pub fn random_mixture(r: &mut ChaCha8Rng, balanced: bool) -> GaussianMixture {
    let d = r.random_range(1..=5);
    let mu = random_mu(r, d, 0.1, 3.0);
    let pi = if balanced { 0.5 } else { r.random_range(0.05..0.95) };
    GaussianMixture::new(mu, random_spd(r, d), pi).unwrap()
}

pub fn random_diagonal_mixture(r: &mut ChaCha8Rng, pi: f64) -> GaussianMixture {
    let d = r.random_range(1..=5);
    let mu = random_mu(r, d, 0.1, 3.0);
    let sigma = Matrix::diagonal(&random_diag(r, d));
    GaussianMixture::new(mu, sigma, pi).unwrap()
}

/// Budget uniform on `(0, ‖μ‖∞)`.
pub fn nontrivial_eps(r: &mut ChaCha8Rng, m: &GaussianMixture) -> f64 {
    let max = m.mu().iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    r.random_range(0.02..0.98) * max
}

pub fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
