//! Seed splitting shared by restarts and simulation replications.

/// Child seed `index` of `master`: one SplitMix64 step on
/// `master + (index + 1)·0x9E3779B97F4A7C15`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|k| split_seed(7, k)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(split_seed(7, 0), split_seed(8, 0));
    }
}
