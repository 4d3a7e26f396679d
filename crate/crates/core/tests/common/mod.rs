#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sanov_dual::{AlphaSpec, Dist, LossFn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dirichlet(1) draw.
pub fn random_dist(rng: &mut ChaCha8Rng, m: usize) -> Dist {
    let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    Dist::from_unnormalized(e).unwrap()
}

/// Dirichlet(1) draw bounded away from the boundary.
pub fn interior_dist(rng: &mut ChaCha8Rng, m: usize) -> Dist {
    let d = random_dist(rng, m);
    Dist::from_unnormalized(d.weights().iter().map(|w| w + 0.05).collect()).unwrap()
}

pub fn random_f(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

pub fn random_cost(rng: &mut ChaCha8Rng, m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { 0.0 } else { 0.2 + 1.5 * rng.random::<f64>() }).collect())
        .collect()
}

/// One spec of each kind on `m` points.
pub fn six_specs(rng: &mut ChaCha8Rng, m: usize) -> Vec<AlphaSpec> {
    let mu = interior_dist(rng, m);
    vec![
        AlphaSpec::RelativeEntropy { mu: mu.clone() },
        AlphaSpec::LpEntropy { mu: mu.clone(), p: 2.0 },
        AlphaSpec::Shortfall { mu: mu.clone(), loss: LossFn::PowerPlus { q: 3.0 } },
        AlphaSpec::Robust { set: vec![interior_dist(rng, m), interior_dist(rng, m)] },
        AlphaSpec::SetIndicator { set: vec![interior_dist(rng, m), interior_dist(rng, m)] },
        AlphaSpec::Transport { mu, cost: random_cost(rng, m) },
    ]
}
