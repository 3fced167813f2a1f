//! End-to-end recipes on a [`Scenario`]: optimise, round, and build the
//! constrained uniform allocation.

use crate::allocation::{ExactAllocation, Model};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::ew::expected_W;
use crate::feasible::LinearConstraintSet;
use crate::information::InformationSet;
use crate::optimizer::{optimize, OptimResult};
use crate::rounding::{
    approx_to_exact_constrained, bounded_uniform, det_unif, AnyIndex, BoxBounds, GrowthSet,
    PolytopeGrowth,
};

/// Which information weights drive the optimisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// Weights at the scenario's own parameter values.
    Local,
    /// Weights averaged over the scenario's prior.
    ExpectedWeights,
}

/// Information matrices at the scenario's parameters.
pub fn local_information(scenario: &Scenario) -> Result<InformationSet> {
    scenario.problem.information()
}

/// Information matrices with `ν` replaced by its prior expectation.
pub fn ew_information(scenario: &Scenario) -> Result<InformationSet> {
    let Model::Glm { link, design, .. } = scenario.problem.model() else {
        return Err(Error::Unsupported("expected-weight designs need a glm model".into()));
    };
    let prior = scenario
        .prior
        .as_ref()
        .ok_or_else(|| Error::Config("--ew needs a prior section".into()))?;
    let nu = expected_W(design, prior, *link)?;
    InformationSet::glm_weighted(design, &nu)
}

pub fn information(scenario: &Scenario, criterion: Criterion) -> Result<InformationSet> {
    match criterion {
        Criterion::Local => local_information(scenario),
        Criterion::ExpectedWeights => ew_information(scenario),
    }
}

/// The region searched: the scenario's constraints, or the whole simplex.
pub fn region(scenario: &Scenario, constrained: bool) -> Result<LinearConstraintSet> {
    if constrained {
        scenario.constraint_set()
    } else {
        Ok(LinearConstraintSet::unconstrained(scenario.m()))
    }
}

pub fn optimal_weights(scenario: &Scenario, criterion: Criterion, constrained: bool) -> Result<OptimResult> {
    let info = information(scenario, criterion)?;
    optimize(&info, &region(scenario, constrained)?, &scenario.solver)
}

/// Greedy rounding of `w` to `n` units. The determinant is always evaluated
/// at the scenario's own parameters.
pub fn round(scenario: &Scenario, w: &[f64], constrained: bool) -> Result<(ExactAllocation, f64)> {
    let info = local_information(scenario)?;
    let det = |c: &[u64]| info.det_counts(c);
    let cs;
    let growth: Box<dyn GrowthSet + '_> = match (constrained, &scenario.bounds) {
        (false, _) => Box::new(AnyIndex),
        (true, Some(caps)) if scenario.constraints.is_empty() => Box::new(BoxBounds { caps: caps.clone() }),
        (true, _) => {
            cs = scenario.constraint_set()?;
            Box::new(PolytopeGrowth { constraints: &cs })
        }
    };
    approx_to_exact_constrained(scenario.n, w, det, growth.as_ref())
}

/// The most even feasible allocation and its product of counts.
///
/// Caps alone use the closed form; general constraints grow greedily from
/// one unit per point under the product criterion.
pub fn uniform_allocation(scenario: &Scenario) -> Result<(ExactAllocation, f64)> {
    let m = scenario.m();
    let n = scenario.n;
    let alloc = if scenario.constraints.is_empty() {
        let caps = scenario.bounds.clone().unwrap_or_else(|| vec![n; m]);
        bounded_uniform(&caps, n)?
    } else {
        let cs = scenario.constraint_set()?;
        let seed = vec![1.0 / n as f64; m];
        approx_to_exact_constrained(n, &seed, |c| Ok(det_unif(c)), &PolytopeGrowth { constraints: &cs })?.0
    };
    let value = det_unif(alloc.counts());
    Ok((alloc, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ProblemConfig;

    const TRIAL: &str = include_str!("../../../configs/trial.json");
    const TRAUMA: &str = include_str!("../../../configs/trauma.json");

    fn scenario(text: &str) -> Scenario {
        Scenario::from_config(&ProblemConfig::from_json(text).unwrap()).unwrap()
    }

    #[test]
    fn trial_uniform_and_local() {
        let s = scenario(TRIAL);
        let (u, _) = uniform_allocation(&s).unwrap();
        assert_eq!(u.counts(), &[38, 38, 10, 38, 38, 38]);
        let r = optimal_weights(&s, Criterion::Local, true).unwrap();
        assert!(r.certified());
        let (e, det) = round(&s, &r.w, true).unwrap();
        assert_eq!(e.counts(), &[50, 40, 10, 100, 0, 0]);
        assert!((det - 46.1012).abs() < 1e-3);
    }

    #[test]
    fn trauma_uniform_uses_the_polytope() {
        let s = scenario(TRAUMA);
        let (u, v) = uniform_allocation(&s).unwrap();
        assert_eq!(u.counts(), &[75; 8]);
        assert_eq!(v, 1001129150390625.0);
    }

    #[test]
    fn ew_needs_a_prior() {
        let mut s = scenario(TRIAL);
        s.prior = None;
        assert!(matches!(ew_information(&s), Err(Error::Config(_))));
        assert!(matches!(ew_information(&scenario(TRAUMA)), Err(Error::Unsupported(_))));
    }
}
