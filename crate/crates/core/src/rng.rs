//! Seeded random streams for the simulator.
//!
//! Algorithm (frozen, part of the output format):
//!
//! * generator: ChaCha with 8 rounds (`rand_chacha::ChaCha8Rng`),
//! * key: `ChaCha8Rng::seed_from_u64(seed)` (rand_core's PCG32 key expansion),
//! * stream: `set_stream(i)` where `i` is the subject's position in the
//!   sorted roster, so each subject draws from its own substream,
//! * integers in `[0, n)`: Lemire's multiply-shift with rejection on `next_u64`,
//! * unit floats: the top 53 bits of `next_u64` scaled by `2^-53`.
//!
//! ChaCha output is defined on 32-bit little-endian words, so the streams are
//! identical on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct SubjectStream {
    rng: ChaCha8Rng,
}

impl SubjectStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Uniform float in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `true` with probability `p`; exact for `p = 0` and `p = 1`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}
