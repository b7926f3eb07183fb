//! Seeded instance generators shared by the benchmarks.

use fpgw_core::MmSpace;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random Euclidean point cloud in the plane with uniform masses summing to `mass`.
pub fn random_space(rng: &mut ChaCha8Rng, n: usize, mass: f64) -> MmSpace {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))).collect();
    let d =
        Array2::from_shape_fn((n, n), |(i, j)| ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt());
    let d = (&d + &d.t()) * 0.5;
    MmSpace::new(d, Array1::from_elem(n, mass / n as f64)).expect("valid random space")
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, m), |_| rng.gen_range(0.0..1.0))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
