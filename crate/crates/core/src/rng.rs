//! Counter-based Gaussian streams.
//!
//! A draw is addressed by `(seed, stream, position)`: the ChaCha8 keystream for
//! `seed` and nonce `stream` is read at word offset `2·position`, the 64-bit
//! word is mapped to an open uniform in (0, 1) and pushed through the inverse
//! normal CDF. One normal always consumes exactly one 64-bit word, so random
//! access and sequential reads agree and nothing depends on call order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::erf::erfc_inv;

/// Stream ids at or above this value are reserved for auxiliary sampling
/// (random test states, random matrices) so they never collide with
/// trajectory noise, which uses the trajectory id as stream id.
pub const AUX_STREAM_BASE: u64 = 1 << 63;

/// Keyed source of independent Gaussian streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream `id` positioned at draw 0.
    pub fn stream(&self, id: u64) -> NormalStream {
        let mut core = ChaCha8Rng::seed_from_u64(self.seed);
        core.set_stream(id);
        NormalStream { core, cursor: 0 }
    }

    /// Auxiliary stream `id`; see [`AUX_STREAM_BASE`].
    pub fn aux_stream(&self, id: u64) -> NormalStream {
        self.stream(AUX_STREAM_BASE | id)
    }
}

/// A positioned view onto one counter-based stream.
#[derive(Clone, Debug)]
pub struct NormalStream {
    core: ChaCha8Rng,
    cursor: u64,
}

impl NormalStream {
    /// Moves to draw index `position`. A no-op when already there.
    pub fn seek(&mut self, position: u64) {
        if position != self.cursor {
            self.core.set_word_pos(2 * u128::from(position));
            self.cursor = position;
        }
    }

    pub fn position(&self) -> u64 {
        self.cursor
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        self.cursor += 1;
        let bits = self.core.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via the inverse CDF of [`Self::next_uniform`].
    pub fn next_normal(&mut self) -> f64 {
        let u = self.next_uniform();
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
    }

    pub fn normal_at(&mut self, position: u64) -> f64 {
        self.seek(position);
        self.next_normal()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_normal();
        }
    }
}
