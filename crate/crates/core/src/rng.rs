//! Portable, seedable randomness.
//!
//! Every random draw in the crate goes through [`StreamRng`], a thin wrapper
//! over the ChaCha8 keystream (`rand_chacha::ChaCha8Rng`). The transforms from
//! raw 64-bit words to floats, indices and normal deviates are defined here
//! rather than delegated to a distribution crate, and the transcendental
//! functions come from `libm`, so a given seed reproduces the same stream on
//! every platform.
//!
//! Seed derivation: a stream is keyed by `(master_seed, label)`. The 32-byte
//! ChaCha key is `SHA-256("liqlab" || master_seed as u64 LE || label as UTF-8)`.
//! [`derive_seed`] returns the first 8 bytes of the same digest as a
//! little-endian `u64`, for configs that store a plain integer seed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"liqlab";

fn stream_key(master: u64, label: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN);
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.finalize().into()
}

/// Derives a child seed from a master seed and a stage label.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let key = stream_key(master, label);
    u64::from_le_bytes(key[..8].try_into().expect("8-byte prefix"))
}

/// Deterministic random stream with documented sampling transforms.
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(master: u64, label: &str) -> Self {
        Self {
            inner: ChaCha8Rng::from_seed(stream_key(master, label)),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`: the top 53 bits of one word scaled by 2^-53.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Bernoulli draw: `uniform() < p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Unbiased index in `0..n` by rejection of the short final zone.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Standard normal deviate by Box-Muller, one uniform pair per deviate.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(std::f64::consts::TAU * u2)
    }

    /// Exponential deviate with the given rate, by inversion.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.uniform_open0()) / rate
    }

    /// In-place Fisher-Yates shuffle, drawing indices from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
