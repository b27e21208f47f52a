//! Small shared helpers: deterministic seed derivation and content hashing.

/// FNV-1a over a byte stream; used for catalog and parameter fingerprints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Hash a stream of f64 values by their bit patterns.
pub fn hash_f64s(seed: u64, values: &[f64]) -> u64 {
    let mut h = seed ^ 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from a base seed, a purpose tag, and an
/// index. Every randomized stage of the pipeline (init, shuffling, synth,
/// per-fold training) draws its seed through this so runs are reproducible
/// and stages never share a stream.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let t = fnv1a64(tag.as_bytes());
    splitmix64(base ^ t.rotate_left(17) ^ splitmix64(index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_deterministic_and_tag_sensitive() {
        assert_eq!(derive_seed(7, "synth", 3), derive_seed(7, "synth", 3));
        assert_ne!(derive_seed(7, "synth", 3), derive_seed(7, "train", 3));
        assert_ne!(derive_seed(7, "synth", 3), derive_seed(7, "synth", 4));
        assert_ne!(derive_seed(7, "synth", 3), derive_seed(8, "synth", 3));
    }

    #[test]
    fn fnv_matches_known_vector() {
        // FNV-1a("a") reference value
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
