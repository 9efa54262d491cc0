//! Deterministic samples of unit directions.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Golden-angle spiral on `S^2`: near-uniform and fully reproducible.
pub fn fibonacci_sphere(count: usize) -> Vec<DVector<f64>> {
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            DVector::from_vec(vec![rho * phi.cos(), rho * phi.sin(), z])
        })
        .collect()
}

/// Normalized Gaussian vectors from a seeded generator.
pub fn random_unit_vectors(dim: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        if norm > 1e-8 {
            out.push(v / norm);
        }
    }
    out
}

/// Fibonacci spiral in three dimensions; seeded random directions in any
/// other dimension, where no spiral construction applies.
pub fn sample_directions(dim: usize, count: usize) -> Vec<DVector<f64>> {
    if dim == 3 {
        fibonacci_sphere(count)
    } else {
        random_unit_vectors(dim, count, 0x5eed_0000 + dim as u64)
    }
}
