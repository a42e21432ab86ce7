//! Deterministic seed derivation, stable across platforms and releases.

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed `hash(base_seed, check id, trial index)`.
pub fn trial_seed(base_seed: u64, check: &str, trial: u64) -> u64 {
    mix(base_seed ^ mix(fnv1a64(check.as_bytes()) ^ mix(trial.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}
