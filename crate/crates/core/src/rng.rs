//! Seed handling shared by the generators and the learner.
//!
//! Every random stream in the crate is a ChaCha8 generator addressed by a
//! `(seed, stream)` pair, so work split across threads by signal index draws
//! the same numbers no matter how many workers run.

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type ItkmRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ItkmRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for item `stream` of the family rooted at `seed`.
pub fn stream(seed: u64, stream: u64) -> ItkmRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed, e.g. one per trial.
pub fn derive(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform draw from the unit sphere in `dim` dimensions.
pub fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = gaussian_vector(dim, rng);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

pub fn next_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}
