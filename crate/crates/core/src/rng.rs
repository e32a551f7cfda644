//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`ChaCha8Rng`], a counter-based
//! generator (ChaCha with 8 rounds). A `u64` seed is expanded to the 32-byte
//! ChaCha key with `SeedableRng::seed_from_u64` (a PCG32 expansion defined by
//! `rand_core`). Independent purposes draw from distinct ChaCha streams of the
//! same key, so adding draws to one purpose never shifts another.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Stream ids for the independent random purposes.
pub mod stream {
    pub const SPLIT: u64 = 0;
    pub const SYNTHETIC: u64 = 1;
    pub const MODEL_INIT: u64 = 2;
    pub const TRAINING: u64 = 3;
    pub const GRAD_CHECK: u64 = 4;
}

/// Creates the generator for `seed` positioned at the start of `stream`.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Serializable position of a [`ChaCha8Rng`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RngState {
    pub key: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            key: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
