//! Lift-one and constrained lift-one with optimality certificates.
//!
//! Along the path `w_i(z)` the information matrix is affine in `z`, so
//! `f_i(z) = |F(w_i(z))|` is a polynomial of degree at most `p`. Each move
//! interpolates it at `p + 1` Chebyshev nodes of the admissible interval and
//! jumps to its exact maximiser.
//!
//! A run is certified when every `f_i'(w_i) ≤ tol`, or when the linear
//! function `g(v) = Σ v_i (1 − w_i) f_i'(w_i)` has `max_S g ≤ tol`; here
//! `tol = ε·max(1, |f(w)|)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{lift_one_path, DesignProblem};
use crate::error::{Error, Result};
use crate::feasible::{LinearConstraintSet, FEAS_EPS};
use crate::information::InformationSet;
use crate::numkernel::{chebyshev_nodes, fit_polynomial, maximize_on_interval, Matrix, Polynomial};
use crate::seed::split_seed;

pub const REASON_DERIVATIVES: &str = "all derivatives <= 0";
pub const REASON_GMAX: &str = "gmax <= 0";
pub const REASON_NOT_CONVERGED: &str = "not converged";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimOptions {
    pub reltol: f64,
    pub maxit: usize,
    /// Start every restart from a random feasible point.
    pub random: bool,
    pub nram: usize,
    pub seed: u64,
    pub epsilon: f64,
    /// Explicit starting allocation for the first run.
    pub w00: Option<Vec<f64>>,
    /// Record every accepted move in [`OptimResult::trace`].
    pub trace: bool,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            reltol: 1e-10,
            maxit: 100,
            random: false,
            nram: 3,
            seed: 0,
            epsilon: 1e-8,
            w00: None,
            trace: false,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.reltol > 0.0) {
            return Err(Error::InvalidParameter(format!("reltol must be positive, got {}", self.reltol)));
        }
        if self.maxit == 0 {
            return Err(Error::InvalidParameter("maxit must be at least 1".into()));
        }
        if self.nram == 0 {
            return Err(Error::InvalidParameter("nram must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub w: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub w: Vec<f64>,
    pub w0: Vec<f64>,
    pub maximum: f64,
    pub itmax: usize,
    pub convergence: bool,
    pub deriv: Vec<f64>,
    pub gmax: Option<f64>,
    pub reason: String,
    /// Index of the restart that produced this result.
    pub restart: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<TraceStep>,
}

impl OptimResult {
    pub fn certified(&self) -> bool {
        self.reason != REASON_NOT_CONVERGED
    }
}

/// `f_i` on `[lo, hi]` as a polynomial in `t ∈ [−1, 1]`, `z = mid + half·t`.
fn path_polynomial(
    info: &InformationSet,
    f: &Matrix,
    w: &[f64],
    i: usize,
    lo: f64,
    hi: f64,
) -> Result<Polynomial> {
    let wi = w[i];
    let a = info.point(i);
    let mut b = f.clone();
    b.add_scaled(a, -wi)?;
    let b = b.scaled(1.0 / (1.0 - wi));
    let mut diff = a.clone();
    diff.add_scaled(&b, -1.0)?;
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let points = chebyshev_nodes(info.p() + 1, -1.0, 1.0)
        .into_iter()
        .map(|t| {
            let mut m = b.clone();
            m.add_scaled(&diff, mid + half * t)?;
            Ok((t, m.determinant()?))
        })
        .collect::<Result<Vec<_>>>()?;
    fit_polynomial(&points)
}

/// `d/dz |F(w_i(z))|` at `z = w_i`.
pub fn directional_derivative_info(info: &InformationSet, w: &[f64], i: usize) -> Result<f64> {
    if w.len() != info.m() {
        return Err(Error::Dimension(format!(
            "{} weights for {} design points",
            w.len(),
            info.m()
        )));
    }
    if i >= w.len() {
        return Err(Error::Dimension(format!("index {i} out of range")));
    }
    if w[i] >= 1.0 {
        return Err(Error::DegeneratePath { index: i });
    }
    let f = info.fisher(w)?;
    let poly = path_polynomial(info, &f, w, i, 0.0, 1.0)?;
    // z = (1 + t)/2
    Ok(2.0 * poly.derivative().eval(2.0 * w[i] - 1.0))
}

pub fn directional_derivative(problem: &DesignProblem, w: &[f64], i: usize) -> Result<f64> {
    directional_derivative_info(&problem.information()?, w, i)
}

/// `(1 − w_i) f_i'(w_i)`, which also equals `∂_i f − p f` and stays defined at `w_i = 1`.
fn g_coefficient(info: &InformationSet, f: &Matrix, fval: f64, w: &[f64], i: usize) -> Result<(f64, f64)> {
    if w[i] < 1.0 {
        let poly = path_polynomial(info, f, w, i, 0.0, 1.0)?;
        let d = 2.0 * poly.derivative().eval(2.0 * w[i] - 1.0);
        return Ok((d, (1.0 - w[i]) * d));
    }
    let fi = info.point(i);
    let points = chebyshev_nodes(info.p() + 1, -1.0, 1.0)
        .into_iter()
        .map(|t| {
            let mut m = f.clone();
            m.add_scaled(fi, t)?;
            Ok((t, m.determinant()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let partial = fit_polynomial(&points)?.derivative().eval(0.0);
    let c = partial - info.p() as f64 * fval;
    Ok((c, c))
}

struct Certificate {
    deriv: Vec<f64>,
    gmax: Option<f64>,
    /// LP maximiser of `g`, present when the derivative test fails.
    vertex: Option<Vec<f64>>,
    reason: &'static str,
}

fn certify(info: &InformationSet, cs: &LinearConstraintSet, w: &[f64], fval: f64, eps: f64) -> Result<Certificate> {
    let f = info.fisher(w)?;
    let mut deriv = Vec::with_capacity(w.len());
    let mut coef = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let (d, c) = g_coefficient(info, &f, fval, w, i)?;
        deriv.push(d);
        coef.push(c);
    }
    let tol = eps * fval.abs().max(1.0);
    if deriv.iter().all(|&d| d <= tol) {
        return Ok(Certificate { deriv, gmax: None, vertex: None, reason: REASON_DERIVATIVES });
    }
    let (v, gmax) = cs.lp_maximize(&coef)?;
    let reason = if gmax <= tol { REASON_GMAX } else { REASON_NOT_CONVERGED };
    Ok(Certificate { deriv, gmax: Some(gmax), vertex: Some(v), reason })
}

/// Exact maximisation of `|F(w + t d)|` over the admissible `t`; `F` is
/// affine in `t`. Returns the candidate when it strictly improves on `fval`.
fn line_search(
    info: &InformationSet,
    cs: &LinearConstraintSet,
    w: &[f64],
    d: &[f64],
    fval: f64,
) -> Result<Option<(Vec<f64>, f64)>> {
    let iv = cs.direction_interval(w, d);
    if iv.is_empty() || iv.hi - iv.lo <= 1e-14 {
        return Ok(None);
    }
    let f0 = info.fisher(w)?;
    let slope = info.fisher(d)?;
    let (mid, half) = (0.5 * (iv.lo + iv.hi), 0.5 * (iv.hi - iv.lo));
    let points = chebyshev_nodes(info.p() + 1, -1.0, 1.0)
        .into_iter()
        .map(|s| {
            let mut m = f0.clone();
            m.add_scaled(&slope, mid + half * s)?;
            Ok((s, m.determinant()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (s, _) = maximize_on_interval(&fit_polynomial(&points)?, -1.0, 1.0)?;
    let t = (mid + half * s).clamp(iv.lo, iv.hi);
    let mut cand: Vec<f64> = w.iter().zip(d).map(|(x, y)| (x + t * y).max(0.0)).collect();
    let total: f64 = cand.iter().sum();
    cand.iter_mut().for_each(|x| *x /= total);
    if !cs.is_feasible(&cand, FEAS_EPS) {
        return Ok(None);
    }
    let val = info.det(&cand)?;
    Ok((val > fval).then_some((cand, val)))
}

/// Recovery moves for an uncertified point: a step towards the LP maximiser
/// of `g`, which ascends whenever `gmax > 0`, then exchanges of weight
/// between every pair of points.
fn recover(
    info: &InformationSet,
    cs: &LinearConstraintSet,
    w: &mut Vec<f64>,
    fval: &mut f64,
    vertex: Option<&[f64]>,
    trace: Option<&mut Vec<TraceStep>>,
) -> Result<bool> {
    let mut steps = Vec::new();
    if let Some(v) = vertex {
        let d: Vec<f64> = v.iter().zip(w.iter()).map(|(a, b)| a - b).collect();
        if let Some((cand, val)) = line_search(info, cs, w, &d, *fval)? {
            *w = cand;
            *fval = val;
            steps.push(TraceStep { w: w.clone(), value: val });
        }
    }
    let m = w.len();
    for i in 0..m {
        for j in i + 1..m {
            let mut d = vec![0.0; m];
            d[i] = 1.0;
            d[j] = -1.0;
            if let Some((cand, val)) = line_search(info, cs, w, &d, *fval)? {
                *w = cand;
                *fval = val;
                steps.push(TraceStep { w: w.clone(), value: val });
            }
        }
    }
    let moved = !steps.is_empty();
    if let Some(t) = trace {
        t.extend(steps);
    }
    Ok(moved)
}

/// One run of constrained lift-one from `w0`.
fn run(
    info: &InformationSet,
    cs: &LinearConstraintSet,
    opts: &OptimOptions,
    w0: Vec<f64>,
    seed: u64,
    restart: usize,
) -> Result<OptimResult> {
    let m = info.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = w0.clone();
    let mut fval = info.det(&w)?;
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..m).collect();
    let mut sweeps = 0;
    let mut converged = false;
    let mut cert = None;

    while sweeps < opts.maxit {
        sweeps += 1;
        let start = fval;
        let mut moved = false;
        order.shuffle(&mut rng);
        for &i in &order {
            if w[i] >= 1.0 {
                continue;
            }
            let iv = cs.liftone_interval(i, &w);
            if iv.is_empty() || iv.hi - iv.lo <= 1e-14 {
                continue;
            }
            let f = info.fisher(&w)?;
            let poly = path_polynomial(info, &f, &w, i, iv.lo, iv.hi)?;
            let (t, _) = maximize_on_interval(&poly, -1.0, 1.0)?;
            let z = (0.5 * (iv.lo + iv.hi) + 0.5 * (iv.hi - iv.lo) * t).clamp(iv.lo, iv.hi);
            let mut cand = lift_one_path(&w, i, z)?;
            let s: f64 = cand.iter().sum();
            cand.iter_mut().for_each(|v| *v /= s);
            if !cs.is_feasible(&cand, FEAS_EPS) {
                continue;
            }
            let cval = info.det(&cand)?;
            if cval > fval {
                w = cand;
                fval = cval;
                moved = true;
                if opts.trace {
                    trace.push(TraceStep { w: w.clone(), value: fval });
                }
            }
        }
        if fval == 0.0 {
            // Identically singular from here: no direction is informative.
            break;
        }
        let gain = (fval - start) / start.abs().max(f64::MIN_POSITIVE);
        if gain >= opts.reltol {
            continue;
        }
        converged = true;
        let c = certify(info, cs, &w, fval, opts.epsilon)?;
        if c.reason != REASON_NOT_CONVERGED {
            cert = Some(c);
            break;
        }
        // Not certified: try recovery moves, then resume sweeping.
        let recovered = recover(
            info,
            cs,
            &mut w,
            &mut fval,
            c.vertex.as_deref(),
            opts.trace.then_some(&mut trace),
        )?;
        if recovered {
            cert = None;
        } else {
            cert = Some(c);
            if !moved {
                break;
            }
        }
    }
    let cert = match cert {
        Some(c) => c,
        None => certify(info, cs, &w, fval, opts.epsilon)?,
    };
    let certified = fval > 0.0 && cert.reason != REASON_NOT_CONVERGED;
    Ok(OptimResult {
        w,
        w0,
        maximum: fval,
        itmax: sweeps,
        convergence: converged && fval > 0.0,
        deriv: cert.deriv,
        gmax: cert.gmax,
        reason: if certified { cert.reason } else { REASON_NOT_CONVERGED }.to_string(),
        restart,
        trace,
    })
}

fn better(a: &OptimResult, b: &OptimResult) -> bool {
    a.maximum > b.maximum || (a.maximum == b.maximum && a.restart < b.restart)
}

fn pick(results: Vec<OptimResult>) -> OptimResult {
    let certified = results
        .iter()
        .filter(|r| r.certified())
        .fold(None::<&OptimResult>, |best, r| match best {
            Some(b) if !better(r, b) => Some(b),
            _ => Some(r),
        });
    if let Some(r) = certified {
        return r.clone();
    }
    let mut best = results
        .into_iter()
        .reduce(|b, r| if better(&r, &b) { r } else { b })
        .expect("at least one restart");
    best.reason = REASON_NOT_CONVERGED.to_string();
    best
}

/// Lift-one over the region `cs` for precomputed information matrices.
pub fn optimize(info: &InformationSet, cs: &LinearConstraintSet, opts: &OptimOptions) -> Result<OptimResult> {
    opts.validate()?;
    if cs.m() != info.m() {
        return Err(Error::Dimension(format!(
            "constraints cover {} points, problem has {}",
            cs.m(),
            info.m()
        )));
    }
    cs.check_feasible()?;
    if let Some(w00) = &opts.w00 {
        if w00.len() != info.m() || !cs.is_feasible(w00, FEAS_EPS) {
            return Err(Error::InvalidAllocation("w00 is not a feasible allocation".into()));
        }
    }
    let start = |k: usize| -> Result<Vec<f64>> {
        if k == 0 {
            if let Some(w00) = &opts.w00 {
                return Ok(w00.clone());
            }
            if !opts.random {
                let u = vec![1.0 / info.m() as f64; info.m()];
                if cs.is_feasible(&u, FEAS_EPS) {
                    return Ok(u);
                }
            }
        }
        cs.random_feasible(split_seed(opts.seed, 2 * k as u64))
    };
    let one = |k: usize| -> Result<OptimResult> {
        run(info, cs, opts, start(k)?, split_seed(opts.seed, 2 * k as u64 + 1), k)
    };

    if opts.random {
        let results = (0..opts.nram).into_par_iter().map(one).collect::<Result<Vec<_>>>()?;
        return Ok(pick(results));
    }
    let mut results = Vec::new();
    for k in 0..opts.nram {
        let r = one(k)?;
        let ok = r.certified();
        results.push(r);
        if ok {
            break;
        }
    }
    Ok(pick(results))
}

/// Unconstrained lift-one over the simplex.
pub fn liftone(problem: &DesignProblem, opts: &OptimOptions) -> Result<OptimResult> {
    optimize(
        &problem.information()?,
        &LinearConstraintSet::unconstrained(problem.m()),
        opts,
    )
}

pub fn liftone_constrained(
    problem: &DesignProblem,
    cs: &LinearConstraintSet,
    opts: &OptimOptions,
) -> Result<OptimResult> {
    optimize(&problem.information()?, cs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasible::{ConstraintRow, Direction};
    use crate::glm::Link;
    use proptest::prelude::*;

    fn s1_problem() -> DesignProblem {
        let x = Matrix::from_rows(&[[1.0, -1.0, -1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]]).unwrap();
        DesignProblem::glm(Link::Logit, x, vec![0.5, 0.5, 0.5]).unwrap()
    }

    fn s2_set() -> LinearConstraintSet {
        LinearConstraintSet::new(
            3,
            vec![
                ConstraintRow::new(vec![1.0, 0.0, 0.0], Direction::Le, 1.0 / 6.0),
                ConstraintRow::new(vec![0.0, 0.0, 1.0], Direction::Ge, 8.0 / 15.0),
                ConstraintRow::new(vec![4.0, 0.0, -1.0], Direction::Ge, 0.0),
            ],
        )
        .unwrap()
    }

    fn w00() -> Vec<f64> {
        vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]
    }

    #[test]
    fn unconstrained_small_logistic() {
        let opts = OptimOptions { w00: Some(w00()), ..Default::default() };
        let r = liftone(&s1_problem(), &opts).unwrap();
        for v in &r.w {
            assert!((v - 1.0 / 3.0).abs() < 1e-6, "{:?}", r.w);
        }
        assert!((r.maximum - 0.0077).abs() < 5e-4);
        // sweep count depends on the seeded coordinate order
        assert!(r.itmax <= 10, "{r:?}");
        assert!(r.certified());
    }

    #[test]
    fn constrained_small_logistic() {
        let opts = OptimOptions { w00: Some(w00()), ..Default::default() };
        let r = liftone_constrained(&s1_problem(), &s2_set(), &opts).unwrap();
        let want = [1.0 / 6.0, 0.3, 8.0 / 15.0];
        for (a, b) in r.w.iter().zip(want) {
            assert!((a - b).abs() < 1e-4, "{:?}", r.w);
        }
        assert!((r.maximum - 0.0055).abs() < 5e-4);
        for (a, b) in r.deriv.iter().zip([0.0199, 0.0026, -0.0133]) {
            assert!((a - b).abs() < 2e-3, "{:?}", r.deriv);
        }
        assert!(r.gmax.unwrap() <= 1e-8);
        assert_eq!(r.reason, REASON_GMAX);
    }

    #[test]
    fn symmetric_two_point_problem() {
        let x = Matrix::from_rows(&[[1.0, -1.0], [1.0, 1.0]]).unwrap();
        let p = DesignProblem::glm(Link::Logit, x, vec![0.0, 1.0]).unwrap();
        let r = liftone(&p, &OptimOptions::default()).unwrap();
        assert!((r.w[0] - 0.5).abs() < 1e-9 && (r.w[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn singleton_region() {
        let cs = LinearConstraintSet::new(
            3,
            vec![
                ConstraintRow::new(vec![1.0, 0.0, 0.0], Direction::Eq, 0.2),
                ConstraintRow::new(vec![0.0, 1.0, 0.0], Direction::Eq, 0.3),
            ],
        )
        .unwrap();
        let r = liftone_constrained(&s1_problem(), &cs, &OptimOptions::default()).unwrap();
        for (a, b) in r.w.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(r.certified());
    }

    #[test]
    fn infeasible_region_is_rejected() {
        let cs = LinearConstraintSet::upper_bounds(&[0.1, 0.1, 0.1]).unwrap();
        assert!(matches!(
            liftone_constrained(&s1_problem(), &cs, &OptimOptions::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = s1_problem();
        let info = p.information().unwrap();
        let w = [0.2, 0.5, 0.3];
        for i in 0..3 {
            let d = directional_derivative(&p, &w, i).unwrap();
            let h = 1e-6;
            let up = info.det(&lift_one_path(&w, i, w[i] + h).unwrap()).unwrap();
            let dn = info.det(&lift_one_path(&w, i, w[i] - h).unwrap()).unwrap();
            let fd = (up - dn) / (2.0 * h);
            assert!((d - fd).abs() <= 1e-4 * fd.abs().max(1e-6), "{d} vs {fd}");
        }
        assert!(matches!(
            directional_derivative(&p, &[1.0, 0.0, 0.0], 0),
            Err(Error::DegeneratePath { index: 0 })
        ));
    }

    #[test]
    fn restarts_are_deterministic_and_parallel_safe() {
        let opts = OptimOptions { random: true, nram: 4, seed: 42, ..Default::default() };
        let a = liftone_constrained(&s1_problem(), &s2_set(), &opts).unwrap();
        let b = liftone_constrained(&s1_problem(), &s2_set(), &opts).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn moves_are_monotone_and_feasible(seed in any::<u64>()) {
            let opts = OptimOptions { random: true, nram: 1, seed, trace: true, ..Default::default() };
            let cs = s2_set();
            let r = liftone_constrained(&s1_problem(), &cs, &opts).unwrap();
            let info = s1_problem().information().unwrap();
            let mut last = info.det(&r.w0).unwrap();
            for step in &r.trace {
                prop_assert!(step.value >= last - 1e-12);
                prop_assert!(cs.is_feasible(&step.w, 1e-8));
                last = step.value;
            }
            prop_assert!((r.maximum - info.det(&r.w).unwrap()).abs() <= 1e-9);
        }

        #[test]
        fn gmax_certificate_is_sound(seed in any::<u64>()) {
            let opts = OptimOptions { w00: Some(w00()), ..Default::default() };
            let cs = s2_set();
            let p = s1_problem();
            let r = liftone_constrained(&p, &cs, &opts).unwrap();
            prop_assume!(r.reason == REASON_GMAX);
            let coef: Vec<f64> = r.deriv.iter().zip(&r.w).map(|(d, w)| d * (1.0 - w)).collect();
            let v = cs.random_feasible(seed).unwrap();
            let g: f64 = coef.iter().zip(&v).map(|(c, x)| c * x).sum();
            prop_assert!(g <= opts.epsilon);
        }
    }
}
