//! Seedable, splittable random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`), a
//! counter-based cipher generator whose output depends only on its 256-bit
//! key, so sequences are identical across runs and platforms. A stream built
//! from a `u64` seed expands the seed to a key with `SeedableRng::seed_from_u64`.
//!
//! Child streams are derived from the parent *key*, not from its consumed
//! state: the key of child `id` is the 32-byte block at word offset `8 * id`
//! of the parent key's keystream on ChaCha stream 1. Samples are always drawn
//! from ChaCha stream 0, so deriving children never perturbs the parent's
//! sequence and two distinct ids never share state.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLE_STREAM: u64 = 0;
const DERIVE_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
        Self::from_key(seed, key)
    }

    fn from_key(seed: u64, key: [u8; 32]) -> Self {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(SAMPLE_STREAM);
        Self { seed, key, rng }
    }

    /// The root seed this stream descends from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream identified by `id`.
    pub fn derive(&self, id: u64) -> RngStream {
        let mut gen = ChaCha8Rng::from_seed(self.key);
        gen.set_stream(DERIVE_STREAM);
        gen.set_word_pos(u128::from(id) * 8);
        let mut key = [0u8; 32];
        gen.fill_bytes(&mut key);
        Self::from_key(self.seed, key)
    }

    /// Child stream reached by deriving along each id of `path` in turn.
    pub fn derive_path(&self, path: &[u64]) -> RngStream {
        path.iter().fold(self.clone(), |s, &id| s.derive(id))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
