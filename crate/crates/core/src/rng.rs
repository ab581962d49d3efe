//! Hierarchical random streams for reproducible replication.
//!
//! Every stream is a ChaCha8 generator keyed by the base seed, with a 64-bit
//! stream id derived from `(run, role, label)`. ChaCha is counter based, so
//! distinct ids give independent streams and adding a policy to an
//! experiment never shifts the draws seen by another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// What a stream is used for inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Instance generation (arm means, features, hidden parameter).
    Instance,
    /// Realized rewards of the optimal arm, shared by all policies.
    Optimal,
    /// Internal randomness of a policy (Z draws, posterior samples).
    Policy,
    /// Rewards of arms pulled by a policy.
    Reward,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Instance => 0x696e_7374,
            Role::Optimal => 0x6f70_7469,
            Role::Policy => 0x706f_6c69,
            Role::Reward => 0x7265_7761,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a, stable across platforms and toolchains.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Builds the stream for `(base_seed, run, role, label)`.
pub fn stream(base_seed: u64, run: u64, role: Role, label: &str) -> Stream {
    let mut seed = [0u8; 32];
    let mut state = base_seed;
    for chunk in seed.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    let id = mix64(mix64(run ^ role.tag()) ^ hash_label(label));
    rng.set_stream(id);
    rng
}

/// Convenience stream for standalone use (tests, examples).
pub fn seeded(seed: u64) -> Stream {
    stream(seed, 0, Role::Policy, "")
}
