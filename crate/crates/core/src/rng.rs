//! Seeded, per-subsystem random streams.
//!
//! Each subsystem draws from its own ChaCha8 stream derived from the run
//! seed, so adding a draw in one subsystem never shifts another's trace.

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::rational::Rational;

/// Named random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    /// Uniform tie-breaking in seller selection.
    Selection = 1,
    /// Per-round rating discount draws.
    DeltaM = 2,
    /// Alias sampling and monitor assignment.
    Monitor = 3,
    /// Key shares and ciphertext nonces.
    Crypto = 4,
    /// Scenario generation in tests and sweeps.
    Scenario = 5,
}

/// Denominator of every sampled rating discount.
pub const DELTA_M_SCALE_BITS: u32 = 32;

#[derive(Debug, Clone)]
pub struct SimRng {
    seed: u64,
    selection: ChaCha8Rng,
    delta_m: ChaCha8Rng,
    monitor: ChaCha8Rng,
    crypto: ChaCha8Rng,
    scenario: ChaCha8Rng,
}

fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            selection: stream_rng(seed, Stream::Selection),
            delta_m: stream_rng(seed, Stream::DeltaM),
            monitor: stream_rng(seed, Stream::Monitor),
            crypto: stream_rng(seed, Stream::Crypto),
            scenario: stream_rng(seed, Stream::Scenario),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&mut self, stream: Stream) -> &mut ChaCha8Rng {
        match stream {
            Stream::Selection => &mut self.selection,
            Stream::DeltaM => &mut self.delta_m,
            Stream::Monitor => &mut self.monitor,
            Stream::Crypto => &mut self.crypto,
            Stream::Scenario => &mut self.scenario,
        }
    }

    /// Uniform index in `0..len`. `len` must be positive.
    pub fn pick(&mut self, stream: Stream, len: usize) -> usize {
        self.stream(stream).gen_range(0..len)
    }

    /// Draws `k / 2^32` uniformly among such values strictly inside `(lower, 1)`.
    ///
    /// `lower` must lie in `[0, 1)`.
    pub fn draw_delta_m(&mut self, lower: &Rational) -> Rational {
        let scale = 1u64 << DELTA_M_SCALE_BITS;
        let scaled = lower * Rational::from_integer(BigInt::from(scale));
        let floor = scaled.floor().to_integer();
        let k_min: u64 = u64::try_from(floor).unwrap_or(0) + 1;
        let k_max = scale - 1;
        let k = if k_min >= k_max {
            k_max
        } else {
            self.delta_m.gen_range(k_min..=k_max)
        };
        Rational::new(BigInt::from(k), BigInt::from(scale))
    }
}
