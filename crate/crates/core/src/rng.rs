//! Seed derivation. Every random consumer draws from its own ChaCha stream
//! keyed by `(seed, domain, index)` so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const DOMAIN_SPLIT: u64 = 0x5350_4c49_5400_0001;
pub(crate) const DOMAIN_TREES: u64 = 0x5452_4545_5300_0002;
pub(crate) const DOMAIN_CALIBRATION: u64 = 0x4341_4c49_4200_0003;
pub(crate) const DOMAIN_FOLD: u64 = 0x464f_4c44_0000_0004;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// Fisher-Yates over `u64` draws, which are portable across platforms.
pub fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}
