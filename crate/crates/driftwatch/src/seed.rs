//! Counter-based seed derivation.
//!
//! Every randomized component in the crate receives an explicit seed derived
//! from a master seed and a fixed sequence of counters (stream id, repetition
//! index, replicate index, ...). Workers never share RNG state, so results
//! are bit-identical regardless of how work is scheduled.

/// SplitMix64 finalizer; full-period mixing of a 64-bit counter.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive a child seed from `seed` and an ordered list of counters.
pub fn derive_seed(seed: u64, counters: &[u64]) -> u64 {
    let mut state = splitmix64(seed);
    for &c in counters {
        state = splitmix64(state ^ splitmix64(c.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    state
}

#[cfg(test)]
mod tests {
    use super::derive_seed;

    #[test]
    fn derivation_is_order_sensitive() {
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[2]), derive_seed(2, &[1]));
    }

    #[test]
    fn derivation_is_stable() {
        // Frozen so cached threshold tables stay valid across builds.
        assert_eq!(derive_seed(42, &[0]), derive_seed(42, &[0]));
        let a = derive_seed(42, &[7, 9]);
        let b = derive_seed(42, &[7, 9]);
        assert_eq!(a, b);
    }
}
