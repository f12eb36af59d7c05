//! Deterministic random stream derivation.
//!
//! Every random draw in the crate comes from a stream derived statelessly
//! from `(root seed, domain tag, indices)`. Nothing keeps rng state between
//! operations, so corpus generation, training, and sampling are exactly
//! reproducible from their configs -- including after a resume.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive an independent rng stream from a root seed, a domain tag and a
/// list of indices (split, example index, step, ...).
pub fn stream(seed: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0xff]);
    hasher.update(tag.as_bytes());
    for ix in indices {
        hasher.update([0xfe]);
        hasher.update(ix.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Standard normal draw via Box-Muller. Kept in-crate so the bit pattern of
/// every sampled value is pinned by this code, not an external crate version.
pub fn next_standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fill a slice with standard normal draws.
pub fn fill_standard_normal<R: Rng>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = next_standard_normal(rng);
    }
}
