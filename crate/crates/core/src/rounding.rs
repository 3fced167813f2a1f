//! Approximate-to-exact conversion and constrained uniform allocations.
//!
//! Rounding starts from `n_i = ⌊n w_i⌋` and adds one unit at a time to the
//! eligible index whose increment gives the largest criterion value.

use crate::allocation::ExactAllocation;
use crate::error::{Error, Result};
use crate::feasible::{ConstraintRow, Direction, LinearConstraintSet};

/// Guard so that `n·w_i` computed as `49.999999999…` still floors to 50.
const FLOOR_GUARD: f64 = 1e-9;

/// Decides which indices may receive one more unit.
pub trait GrowthSet {
    /// Indices `i` for which `alloc + e_i` can still be completed to a
    /// feasible allocation of total `n`.
    fn eligible(&self, alloc: &[u64], n: u64) -> Vec<usize>;

    /// Whether `alloc` itself can be completed to total `n`.
    fn admits(&self, alloc: &[u64], n: u64) -> bool;
}

/// No constraints beyond the total.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnyIndex;

impl GrowthSet for AnyIndex {
    fn eligible(&self, alloc: &[u64], n: u64) -> Vec<usize> {
        if alloc.iter().sum::<u64>() < n {
            (0..alloc.len()).collect()
        } else {
            Vec::new()
        }
    }

    fn admits(&self, alloc: &[u64], n: u64) -> bool {
        alloc.iter().sum::<u64>() <= n
    }
}

/// Per-stratum caps `n_i ≤ N_i`.
#[derive(Clone, Debug)]
pub struct BoxBounds {
    pub caps: Vec<u64>,
}

impl GrowthSet for BoxBounds {
    fn eligible(&self, alloc: &[u64], n: u64) -> Vec<usize> {
        if alloc.iter().sum::<u64>() >= n {
            return Vec::new();
        }
        (0..alloc.len()).filter(|&i| alloc[i] < self.caps[i]).collect()
    }

    fn admits(&self, alloc: &[u64], n: u64) -> bool {
        alloc.iter().zip(&self.caps).all(|(a, c)| a <= c)
            && alloc.iter().sum::<u64>() <= n
            && self.caps.iter().sum::<u64>() >= n
    }
}

/// Growth set of a polytope in weight space: `alloc` is admissible when some
/// `w` in the region has `n·w ≥ alloc` componentwise.
#[derive(Clone, Debug)]
pub struct PolytopeGrowth<'a> {
    pub constraints: &'a LinearConstraintSet,
}

impl PolytopeGrowth<'_> {
    fn completes(&self, alloc: &[u64], n: u64) -> bool {
        let m = self.constraints.m();
        let mut cs = self.constraints.clone();
        for (i, &a) in alloc.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let mut row = vec![0.0; m];
            row[i] = 1.0;
            if cs.push(ConstraintRow::new(row, Direction::Ge, a as f64 / n as f64)).is_err() {
                return false;
            }
        }
        cs.check_feasible().is_ok()
    }
}

impl GrowthSet for PolytopeGrowth<'_> {
    fn eligible(&self, alloc: &[u64], n: u64) -> Vec<usize> {
        if alloc.iter().sum::<u64>() >= n {
            return Vec::new();
        }
        let mut next = alloc.to_vec();
        (0..alloc.len())
            .filter(|&i| {
                next[i] += 1;
                let ok = self.completes(&next, n);
                next[i] -= 1;
                ok
            })
            .collect()
    }

    fn admits(&self, alloc: &[u64], n: u64) -> bool {
        alloc.iter().sum::<u64>() <= n && self.completes(alloc, n)
    }
}

/// `⌊n·w_i⌋` with a small guard against representation error.
pub fn floor_allocation(n: u64, w: &[f64]) -> Result<Vec<u64>> {
    if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x >= -FLOOR_GUARD)) {
        return Err(Error::InvalidAllocation(format!("weight {i} is {}", w[i])));
    }
    let floors: Vec<u64> = w
        .iter()
        .map(|&x| (n as f64 * x.max(0.0) + FLOOR_GUARD).floor() as u64)
        .collect();
    if floors.iter().sum::<u64>() > n {
        return Err(Error::InvalidAllocation(format!(
            "floors of n·w sum to {} > {n}",
            floors.iter().sum::<u64>()
        )));
    }
    Ok(floors)
}

/// Greedy rounding of `w` to `n` units under a growth set.
pub fn approx_to_exact_constrained<F, G>(
    n: u64,
    w: &[f64],
    det_fn: F,
    growth: &G,
) -> Result<(ExactAllocation, f64)>
where
    F: Fn(&[u64]) -> Result<f64>,
    G: GrowthSet + ?Sized,
{
    let mut alloc = floor_allocation(n, w)?;
    if !growth.admits(&alloc, n) {
        return Err(Error::FloorInfeasible(alloc));
    }
    let mut assigned: u64 = alloc.iter().sum();
    while assigned < n {
        let mut best: Option<(usize, f64)> = None;
        for i in growth.eligible(&alloc, n) {
            alloc[i] += 1;
            let v = det_fn(&alloc)?;
            alloc[i] -= 1;
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        let Some((i, _)) = best else {
            return Err(Error::Stuck { assigned, target: n });
        };
        alloc[i] += 1;
        assigned += 1;
    }
    let value = det_fn(&alloc)?;
    Ok((ExactAllocation::new(alloc), value))
}

/// Unconstrained greedy rounding.
pub fn approx_to_exact<F>(n: u64, w: &[f64], det_fn: F) -> Result<(ExactAllocation, f64)>
where
    F: Fn(&[u64]) -> Result<f64>,
{
    approx_to_exact_constrained(n, w, det_fn, &AnyIndex)
}

/// Product of the positive counts; greedy maximisation yields the most even
/// feasible allocation.
pub fn det_unif(counts: &[u64]) -> f64 {
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64).product()
}

/// Most even allocation of `n` units under caps `N_i`: `n_i = min(k, N_i)`
/// with the largest such `k`, then one more unit for the lowest-indexed
/// strata that still have room until the total is reached.
pub fn bounded_uniform(caps: &[u64], n: u64) -> Result<ExactAllocation> {
    let total: u64 = caps.iter().sum();
    if total < n {
        return Err(Error::Infeasible { residual: (n - total) as f64 });
    }
    let filled = |k: u64| caps.iter().map(|&c| c.min(k)).sum::<u64>();
    let (mut lo, mut hi) = (0u64, caps.iter().copied().max().unwrap_or(0));
    // largest k with filled(k) ≤ n
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if filled(mid) <= n {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let k = lo;
    let mut alloc: Vec<u64> = caps.iter().map(|&c| c.min(k)).collect();
    let mut rest = n - filled(k);
    for (a, &c) in alloc.iter_mut().zip(caps) {
        if rest == 0 {
            break;
        }
        if c > k {
            *a += 1;
            rest -= 1;
        }
    }
    Ok(ExactAllocation::new(alloc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::Link;
    use crate::information::InformationSet;
    use crate::numkernel::Matrix;
    use proptest::prelude::*;

    fn trial_info() -> InformationSet {
        let x = Matrix::from_rows(&[
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
            [1.0, 1.0, 0.0, 0.0],
            [1.0, 1.0, 1.0, 0.0],
            [1.0, 1.0, 0.0, 1.0],
        ])
        .unwrap();
        InformationSet::glm(Link::Logit, &x, &[0.0, 3.0, 3.0, 3.0]).unwrap()
    }

    const TRIAL_CAPS: [u64; 6] = [50, 40, 10, 200, 150, 50];

    #[test]
    fn trial_local_rounding() {
        let info = trial_info();
        let (a, det) = approx_to_exact_constrained(
            200,
            &[0.25, 0.2, 0.05, 0.5, 0.0, 0.0],
            |c| info.det_counts(c),
            &BoxBounds { caps: TRIAL_CAPS.to_vec() },
        )
        .unwrap();
        assert_eq!(a.counts(), &[50, 40, 10, 100, 0, 0]);
        assert!((det - 46.1012).abs() / 46.1012 < 1e-3);
    }

    #[test]
    fn exact_floors_need_no_greedy_steps() {
        let (a, _) = approx_to_exact(6, &[1.0 / 3.0; 3], |c| Ok(det_unif(c))).unwrap();
        assert_eq!(a.counts(), &[2, 2, 2]);
        let (a, _) = approx_to_exact(10, &[0.3, 0.3, 0.4], |_| Ok(0.0)).unwrap();
        assert_eq!(a.counts(), &[3, 3, 4]);
    }

    #[test]
    fn pure_ties_go_to_smallest_index() {
        let (a, _) = approx_to_exact(3, &[0.5, 0.5], |_| Ok(1.0)).unwrap();
        assert_eq!(a.counts(), &[2, 1]);
    }

    #[test]
    fn uniform_product_values() {
        assert_eq!(det_unif(&[75; 8]), 1001129150390625.0);
        assert_eq!(75f64.powi(8), 1001129150390625.0);
        assert_eq!(det_unif(&[38, 38, 10, 38, 38, 38]), 792351680.0);
        assert_eq!(det_unif(&[0, 3, 0, 2]), 6.0);
    }

    #[test]
    fn bounded_uniform_examples() {
        assert_eq!(bounded_uniform(&TRIAL_CAPS, 200).unwrap().counts(), &[38, 38, 10, 38, 38, 38]);
        assert_eq!(bounded_uniform(&[100, 100, 100], 60).unwrap().counts(), &[20, 20, 20]);
        assert_eq!(bounded_uniform(&[5, 5, 100], 20).unwrap().counts(), &[5, 5, 10]);
        assert_eq!(bounded_uniform(&[3, 9, 9, 9], 20).unwrap().counts(), &[3, 6, 6, 5]);
        assert!(matches!(bounded_uniform(&[1, 2], 4), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn greedy_product_reproduces_bounded_uniform() {
        let (a, det) = approx_to_exact_constrained(
            200,
            &[1.0 / 200.0; 6],
            |c| Ok(det_unif(c)),
            &BoxBounds { caps: TRIAL_CAPS.to_vec() },
        )
        .unwrap();
        assert_eq!(a.counts(), &[38, 38, 10, 38, 38, 38]);
        assert_eq!(det, 792351680.0);
    }

    #[test]
    fn polytope_growth_matches_box_bounds() {
        let cs = LinearConstraintSet::upper_bounds(&TRIAL_CAPS.map(|c| c as f64 / 200.0)).unwrap();
        let poly = PolytopeGrowth { constraints: &cs };
        let boxed = BoxBounds { caps: TRIAL_CAPS.to_vec() };
        for alloc in [[50, 40, 9, 100, 0, 0], [38, 38, 10, 38, 38, 37], [0, 0, 0, 0, 0, 0]] {
            assert_eq!(poly.eligible(&alloc, 200), boxed.eligible(&alloc, 200));
        }
    }

    #[test]
    fn stuck_and_floor_infeasible() {
        let r = approx_to_exact_constrained(10, &[0.5, 0.5], |_| Ok(1.0), &BoxBounds { caps: vec![5, 4] });
        assert!(matches!(r, Err(Error::FloorInfeasible(_))));
        let r = approx_to_exact_constrained(10, &[0.2, 0.2], |_| Ok(1.0), &BoxBounds { caps: vec![3, 3] });
        assert!(matches!(r, Err(Error::FloorInfeasible(_))));
    }

    #[test]
    fn rounding_optimal_weights_stays_within_one() {
        use crate::optimizer::{optimize, OptimOptions};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let m = rng.random_range(3..6);
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|_| vec![1.0, rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
                .collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let beta = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.5];
            let info = InformationSet::glm(Link::Logit, &x, &beta).unwrap();
            let cs = LinearConstraintSet::unconstrained(m);
            let w = optimize(&info, &cs, &OptimOptions::default()).unwrap().w;
            let n = rng.random_range(10..200);
            let (a, _) = approx_to_exact(n, &w, |c| info.det_counts(c)).unwrap();
            for (c, x) in a.counts().iter().zip(&w) {
                assert!((*c as f64 - n as f64 * x).abs() <= 1.0 + 1e-9, "{a:?} vs {w:?} n={n}");
            }
        }
    }

    proptest! {
        #[test]
        fn bounded_uniform_is_greedy_product(
            caps in proptest::collection::vec(1u64..30, 2..6),
            frac in 0.0f64..1.0,
        ) {
            let total: u64 = caps.iter().sum();
            let m = caps.len() as u64;
            let n = m + ((total - m) as f64 * frac) as u64;
            let seed = vec![1.0 / n as f64; caps.len()];
            let (g, _) = approx_to_exact_constrained(
                n, &seed, |c| Ok(det_unif(c)), &BoxBounds { caps: caps.clone() },
            ).unwrap();
            let b = bounded_uniform(&caps, n).unwrap();
            prop_assert_eq!(g.counts(), b.counts());
            prop_assert_eq!(b.total(), n);
        }

        #[test]
        fn rounding_never_goes_below_floors(raw in proptest::collection::vec(0.01f64..1.0, 2..6), n in 1u64..300) {
            let s: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let floors = floor_allocation(n, &w).unwrap();
            let (a, _) = approx_to_exact(n, &w, |c| Ok(det_unif(c))).unwrap();
            prop_assert_eq!(a.total(), n);
            for (c, f) in a.counts().iter().zip(&floors) {
                prop_assert!(c >= f);
            }
        }
    }
}
