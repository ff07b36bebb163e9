//! Counter-based per-path random streams.
//!
//! A ChaCha key is derived from `(master_seed, scenario)`; path `i` reads
//! stream `i` of that key. Every path's randomness is therefore a pure
//! function of its index, independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed provenance carried by simulated ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub scenario: u64,
}

impl SeedInfo {
    pub fn new(master_seed: u64, scenario: u64) -> Self {
        Self { master_seed, scenario }
    }

    /// Scenario identifier derived from a name (FNV-1a).
    pub fn named(master_seed: u64, name: &str) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        Self::new(master_seed, h)
    }

    pub fn path_rng(&self, path: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed ^ self.scenario.rotate_left(17);
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(path);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
