//! Counter-based random streams.
//!
//! Every stream is keyed by `(master_seed, path_index, purpose)` and is
//! derived without any shared state, so paths can be generated in any
//! order — or in parallel on any number of workers — with bit-identical
//! results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 step; the standard finalizer used to decorrelate seed words.
#[inline]
pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a handful of words into a single 64-bit value.
pub(crate) fn mix(words: &[u64]) -> u64 {
    let mut state = 0x6C62_272E_07BB_0142;
    let mut acc = 0u64;
    for &w in words {
        state ^= w;
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// Stream purposes. Distinct purposes on the same `(seed, path)` yield
/// independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Driver increment noise; the payload distinguishes driver instances
    /// living on one probability space.
    Driver(u64),
    /// Indicator events of the non-integrable example field.
    Pathology,
    /// Ad-hoc ensembles built directly from the space (tests, trials).
    Adhoc(u64),
}

impl Purpose {
    fn words(self) -> [u64; 2] {
        match self {
            Purpose::Driver(k) => [1, k],
            Purpose::Pathology => [2, 0],
            Purpose::Adhoc(k) => [3, k],
        }
    }
}

/// Deterministic per-`(seed, path, purpose)` generator.
pub(crate) fn stream(master_seed: u64, path: u64, purpose: Purpose) -> ChaCha8Rng {
    let [p0, p1] = purpose.words();
    let mut seed = [0u8; 32];
    let mut state = mix(&[master_seed, path, p0, p1]);
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// A small deterministic generator for partition metadata (random tag
/// points). Not tied to any probability space: tags are shared by all
/// paths of an ensemble.
pub(crate) fn tag_stream(seed: u64, cell: u64) -> ChaCha8Rng {
    let mut state = mix(&[0x7A65, seed, cell]);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
