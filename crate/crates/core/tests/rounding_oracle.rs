//! Greedy rounding under the product-of-counts criterion against enumeration.

use optdesign::rounding::{approx_to_exact_constrained, det_unif, BoxBounds, PolytopeGrowth};
use optdesign::{ConstraintRow, Direction, LinearConstraintSet};
use proptest::prelude::*;

fn compositions(n: u64, m: usize) -> Vec<Vec<u64>> {
    if m == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, m - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

proptest! {
    #[test]
    fn product_greedy_matches_enumeration(caps in prop::collection::vec(1u64..8, 2..=4), n in 2u64..=12) {
        let m = caps.len();
        // the uniform seed puts one unit on every point
        prop_assume!(n >= m as u64 && caps.iter().sum::<u64>() >= n);
        let best = compositions(n, m)
            .into_iter()
            // greedy grows from one unit per point, so compare over full support;
            // a product of positive counts can otherwise prefer (0, 0, 3) to (1, 1, 1)
            .filter(|c| c.iter().zip(&caps).all(|(&a, &b)| (1..=b).contains(&a)))
            .map(|c| det_unif(&c))
            .fold(0.0, f64::max);
        let seed = vec![1.0 / n as f64; m];
        let (_, got) = approx_to_exact_constrained(n, &seed, |c| Ok(det_unif(c)), &BoxBounds { caps: caps.clone() }).unwrap();
        prop_assert_eq!(got, best);

        // the same caps written as a polytope
        let rows = caps
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut a = vec![0.0; m];
                a[i] = 1.0;
                ConstraintRow::new(a, Direction::Le, c as f64 / n as f64)
            })
            .collect();
        let cs = LinearConstraintSet::new(m, rows).unwrap();
        let (_, got) = approx_to_exact_constrained(n, &seed, |c| Ok(det_unif(c)), &PolytopeGrowth { constraints: &cs }).unwrap();
        prop_assert_eq!(got, best);
    }
}
