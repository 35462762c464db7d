//! Seeded randomness. Every stochastic choice in the crate flows from a
//! single u64 seed through [`derive`], so runs are reproducible bit for
//! bit and independent subsystems (init, crops, shuffling) never share
//! a stream.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::tensor::{Shape, Tensor};

/// Deterministic stream cipher RNG for the given seed.
pub fn seeded(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Derives an independent sub-seed from a base seed and a label.
/// FNV-1a over the label, mixed with the seed, then a splitmix64
/// finalizer so related labels land far apart.
pub fn derive(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in label.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Tensor of i.i.d. uniform values in [lo, hi).
pub fn uniform_tensor(shape: Shape, lo: f64, hi: f64, rng: &mut ChaCha12Rng) -> Tensor {
    let data: Vec<f64> = (0..shape.len()).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape, data).expect("length matches shape")
}
