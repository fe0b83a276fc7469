//! Deterministic random substreams.
//!
//! Every random draw in the simulator is made from a stream derived from
//! `(master seed, trial index, stage label, stage index)`. Streams for
//! different stages are statistically independent, so adding a draw to one
//! stage never perturbs another, and results are reproducible for a given
//! master seed regardless of thread count or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a hash of a stage label.
fn label_hash(label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in label.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// One step of the splitmix64 sequence; mixes the state and returns a word.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Factory for the independent random streams of one Monte Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStreams {
    master_seed: u64,
    trial: u64,
}

impl TrialStreams {
    /// Binds a master seed to one trial index.
    pub fn new(master_seed: u64, trial: u64) -> Self {
        Self { master_seed, trial }
    }

    /// Master seed these streams derive from.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Trial index these streams derive from.
    pub fn trial(&self) -> u64 {
        self.trial
    }

    /// Stream for a named stage of this trial.
    pub fn stream(&self, label: &str) -> ChaCha8Rng {
        self.indexed_stream(label, 0)
    }

    /// Stream for a named, indexed stage (e.g. one stream per OFDM symbol).
    pub fn indexed_stream(&self, label: &str, index: u64) -> ChaCha8Rng {
        // Chain the four identifiers through splitmix64 so that any change in
        // any identifier reseeds the whole 256-bit ChaCha key.
        let mut state = self.master_seed;
        let mut mixed = splitmix64(&mut state);
        state ^= self.trial.wrapping_mul(0xd6e8_feb8_6659_fd93);
        mixed ^= splitmix64(&mut state);
        state ^= label_hash(label);
        mixed ^= splitmix64(&mut state);
        state ^= index.wrapping_mul(0xa24b_aed4_963e_e407);
        mixed ^= splitmix64(&mut state);
        state ^= mixed;

        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
