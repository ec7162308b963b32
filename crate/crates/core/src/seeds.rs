//! Deterministic seed derivation for trials and their sub-streams.
//!
//! Every random draw in a campaign descends from one `base_seed` through
//! splitmix64 mixing, so results are reproducible regardless of worker count
//! or scheduling order. Distinct roles (truth simulation, each candidate
//! filter) get distinct ChaCha streams of the same per-trial seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, stable across platforms.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Mix a sequence of words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    let mut acc = 0x243f6a8885a308d3; // pi digits, arbitrary non-zero start
    for &w in words {
        acc = splitmix64(acc ^ w);
    }
    acc
}

/// Seed for one trial: (base_seed, grid point, truth model, trial index).
pub fn trial_seed(base_seed: u64, grid_index: usize, truth_tag: &str, trial_index: usize) -> u64 {
    let tag_word = truth_tag
        .bytes()
        .fold(0u64, |acc, b| splitmix64(acc ^ u64::from(b)));
    mix(&[base_seed, grid_index as u64, tag_word, trial_index as u64])
}

/// Role of an RNG stream within one trial.
///
/// Candidate streams are keyed by a hash of the candidate's content rather
/// than its position, so two *identical* candidate models consume identical
/// noise and stay exactly tied, while distinct models get independent
/// streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    /// Wiener increments of the truth simulator.
    TruthSim,
    /// Process and resampling noise of a candidate filter, keyed by content.
    Candidate(u64),
}

impl StreamRole {
    fn stream_id(self) -> u64 {
        match self {
            StreamRole::TruthSim => 0,
            StreamRole::Candidate(key) => key.max(1),
        }
    }
}

/// Deterministic RNG for one role within a trial.
pub fn stream_rng(trial_seed: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(role.stream_id());
    rng
}

/// FNV-1a over a canonical byte string; used for config provenance hashes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
