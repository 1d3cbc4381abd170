//! Counter-based random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha`). The
//! 256-bit key is expanded from the user seed with SplitMix64, the 64-bit
//! ChaCha stream id selects an independent substream (one per pixel, or per
//! pixel/channel), and the word position selects the sample within it.
//! Nothing depends on scheduling order, so parallel loops reproduce the
//! sequential result bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Words (32-bit) reserved per sample inside a substream. Enough for 32
/// `f64` draws, i.e. paths up to depth 16.
pub const WORDS_PER_SAMPLE: u128 = 64;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key_from_seed(seed: u64, domain: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut state = seed ^ splitmix64(domain);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    key
}

/// Separates the key space of different consumers sharing one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Tracer = 1,
    Counting = 2,
    Trials = 3,
}

/// Rng positioned at the start of `sample` in substream `stream`.
pub fn stream_rng(seed: u64, domain: Domain, stream: u64, sample: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(key_from_seed(seed, domain as u64));
    rng.set_stream(stream);
    if sample != 0 {
        rng.set_word_pos(sample as u128 * WORDS_PER_SAMPLE);
    }
    rng
}
