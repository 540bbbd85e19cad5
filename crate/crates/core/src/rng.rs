//! Seeded random streams. Every random draw in the crate goes through here so that
//! results depend only on explicit seeds.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

/// Independent generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn fill_normal<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

pub fn normals<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut v = alloc::vec![0.0; n];
    fill_normal(rng, &mut v);
    v
}

pub fn uniform<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
