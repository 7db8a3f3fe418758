//! Named random sub-streams derived from a single run seed.

/// Seed for the stream `name` of run `seed` (SplitMix64 over seed ⊕ FNV-1a(name)).
pub fn substream(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = (seed ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_by_name_and_seed() {
        assert_ne!(substream(1, "split"), substream(1, "init"));
        assert_ne!(substream(1, "split"), substream(2, "split"));
        assert_eq!(substream(7, "rl"), substream(7, "rl"));
    }
}
