//! Design problems and the two kinds of allocation over their design points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::Link;
use crate::information::InformationSet;
use crate::mlm::MlmKind;
use crate::numkernel::Matrix;

/// Tolerance on `Σ w_i = 1` for approximate allocations.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// The statistical model whose information matrix is being maximised.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// Generalised linear model: one design row per point, coefficients `beta`.
    Glm {
        link: Link,
        design: Matrix,
        beta: Vec<f64>,
    },
    /// Multinomial logit model: one `J × p` model matrix per point.
    Mlm {
        kind: MlmKind,
        point_matrices: Vec<Matrix>,
        theta: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignProblem {
    model: Model,
    labels: Option<Vec<String>>,
}

impl DesignProblem {
    pub fn glm(link: Link, design: Matrix, beta: Vec<f64>) -> Result<Self> {
        link.validate()?;
        let (m, p) = (design.rows(), design.cols());
        check_sizes(m, p)?;
        if beta.len() != p {
            return Err(Error::Dimension(format!(
                "design has {p} columns but beta has {} entries",
                beta.len()
            )));
        }
        check_finite("beta", &beta)?;
        Ok(DesignProblem {
            model: Model::Glm { link, design, beta },
            labels: None,
        })
    }

    pub fn mlm(kind: MlmKind, point_matrices: Vec<Matrix>, theta: Vec<f64>) -> Result<Self> {
        let m = point_matrices.len();
        let first = point_matrices
            .first()
            .ok_or_else(|| Error::Dimension("no design points".into()))?;
        let (j, p) = (first.rows(), first.cols());
        check_sizes(m, p)?;
        if j < 2 {
            return Err(Error::Dimension(format!(
                "model matrices need J >= 2 rows, got {j}"
            )));
        }
        for (i, x) in point_matrices.iter().enumerate() {
            if x.rows() != j || x.cols() != p {
                return Err(Error::Dimension(format!(
                    "model matrix {i} is {}x{}, expected {j}x{p}",
                    x.rows(),
                    x.cols()
                )));
            }
        }
        if theta.len() != p {
            return Err(Error::Dimension(format!(
                "model matrices have {p} columns but theta has {} entries",
                theta.len()
            )));
        }
        check_finite("theta", &theta)?;
        Ok(DesignProblem {
            model: Model::Mlm {
                kind,
                point_matrices,
                theta,
            },
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m() {
            return Err(Error::Dimension(format!(
                "{} labels for {} design points",
                labels.len(),
                self.m()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Number of design points.
    pub fn m(&self) -> usize {
        match &self.model {
            Model::Glm { design, .. } => design.rows(),
            Model::Mlm { point_matrices, .. } => point_matrices.len(),
        }
    }

    /// Number of model parameters.
    pub fn p(&self) -> usize {
        match &self.model {
            Model::Glm { design, .. } => design.cols(),
            Model::Mlm { theta, .. } => theta.len(),
        }
    }

    /// Per-point information matrices `F_i` at the problem's parameters.
    pub fn information(&self) -> Result<InformationSet> {
        match &self.model {
            Model::Glm { link, design, beta } => InformationSet::glm(*link, design, beta),
            Model::Mlm {
                kind,
                point_matrices,
                theta,
            } => InformationSet::mlm(*kind, point_matrices, theta),
        }
    }
}

fn check_sizes(m: usize, p: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Dimension(format!("need at least 2 design points, got {m}")));
    }
    if p < 2 {
        return Err(Error::Dimension(format!("need at least 2 parameters, got {p}")));
    }
    Ok(())
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::InvalidParameter(format!("{name}[{i}] is not finite"))),
        None => Ok(()),
    }
}

/// Weights on the probability simplex, one per design point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ApproximateAllocation {
    w: Vec<f64>,
}

impl ApproximateAllocation {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidAllocation(format!(
                "weight {i} is {} (must be finite and nonnegative)",
                w[i]
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidAllocation(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(ApproximateAllocation { w })
    }

    pub fn uniform(m: usize) -> Self {
        ApproximateAllocation {
            w: vec![1.0 / m as f64; m],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    /// The allocation `w_i(z)`: see [`lift_one_path`].
    pub fn lift_one(&self, i: usize, z: f64) -> Result<ApproximateAllocation> {
        lift_one_path(&self.w, i, z).map(|w| ApproximateAllocation { w })
    }
}

impl TryFrom<Vec<f64>> for ApproximateAllocation {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        ApproximateAllocation::new(w)
    }
}

impl From<ApproximateAllocation> for Vec<f64> {
    fn from(a: ApproximateAllocation) -> Vec<f64> {
        a.w
    }
}

/// Integer sample sizes per design point.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<u64>", into = "Vec<u64>")]
pub struct ExactAllocation {
    counts: Vec<u64>,
}

impl ExactAllocation {
    pub fn new(counts: Vec<u64>) -> Self {
        ExactAllocation { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total sample size `n = Σ n_i`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Counts as real weights, unnormalised (the `n_i` themselves).
    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// `n_i / n`. Fails for the empty allocation.
    pub fn to_approximate(&self) -> Result<ApproximateAllocation> {
        let n = self.total();
        if n == 0 {
            return Err(Error::InvalidAllocation("total sample size is zero".into()));
        }
        ApproximateAllocation::new(self.counts.iter().map(|&c| c as f64 / n as f64).collect())
    }
}

impl From<Vec<u64>> for ExactAllocation {
    fn from(counts: Vec<u64>) -> Self {
        ExactAllocation { counts }
    }
}

impl From<ExactAllocation> for Vec<u64> {
    fn from(a: ExactAllocation) -> Vec<u64> {
        a.counts
    }
}

/// Moves coordinate `i` to `z` and rescales every other coordinate by
/// `(1 - z) / (1 - w_i)`, keeping the allocation on the simplex.
pub fn lift_one_path(w: &[f64], i: usize, z: f64) -> Result<Vec<f64>> {
    if i >= w.len() {
        return Err(Error::Dimension(format!(
            "coordinate {i} out of range for {} weights",
            w.len()
        )));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidParameter(format!("lift-one target {z} outside [0, 1]")));
    }
    let wi = w[i];
    if wi >= 1.0 {
        if z == 1.0 {
            return Ok(w.to_vec());
        }
        return Err(Error::DegeneratePath { index: i });
    }
    let scale = (1.0 - z) / (1.0 - wi);
    Ok(w.iter()
        .enumerate()
        .map(|(j, &wj)| if j == i { z } else { wj * scale })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lift_one_identity_when_z_is_current_weight() {
        let w = vec![1.0 / 3.0; 3];
        assert_eq!(lift_one_path(&w, 0, 1.0 / 3.0).unwrap(), w);
    }

    #[test]
    fn lift_one_redistributes_proportionally() {
        let w = vec![1.0 / 3.0; 3];
        let out = lift_one_path(&w, 0, 0.0).unwrap();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 0.5).abs() < 1e-15 && (out[2] - 0.5).abs() < 1e-15);

        let w = vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];
        let out = lift_one_path(&w, 2, 8.0 / 15.0).unwrap();
        let want = [7.0 / 30.0, 7.0 / 30.0, 8.0 / 15.0];
        for (a, b) in out.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lift_one_degenerate_vertex() {
        let w = vec![1.0, 0.0, 0.0];
        assert_eq!(
            lift_one_path(&w, 0, 0.5),
            Err(Error::DegeneratePath { index: 0 })
        );
        assert_eq!(lift_one_path(&w, 0, 1.0).unwrap(), w);
        // moving another coordinate off the vertex is fine
        assert_eq!(lift_one_path(&w, 1, 0.25).unwrap(), vec![0.75, 0.25, 0.0]);
    }

    #[test]
    fn approximate_allocation_validation() {
        assert!(ApproximateAllocation::new(vec![0.5, 0.5]).is_ok());
        assert!(ApproximateAllocation::new(vec![0.5, 0.4]).is_err());
        assert!(ApproximateAllocation::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn problem_shape_checks() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(DesignProblem::glm(Link::Logit, x.clone(), vec![0.0, 1.0]).is_ok());
        assert!(DesignProblem::glm(Link::Logit, x.clone(), vec![0.0]).is_err());
        let one_point = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        assert!(DesignProblem::glm(Link::Logit, one_point, vec![0.0, 1.0]).is_err());
        let p = DesignProblem::glm(Link::Logit, x, vec![0.0, 1.0]).unwrap();
        assert!(p.clone().with_labels(vec!["a".into()]).is_err());
        assert_eq!(p.with_labels(vec!["a".into(), "b".into()]).unwrap().m(), 2);
    }

    proptest! {
        #[test]
        fn lift_one_stays_on_simplex(
            raw in prop::collection::vec(0.0f64..1.0, 2..10),
            pick in 0usize..10,
            z in 0.0f64..=1.0,
        ) {
            let s: f64 = raw.iter().sum();
            prop_assume!(s > 1e-6);
            let w: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let i = pick % w.len();
            prop_assume!(w[i] < 1.0);
            let out = lift_one_path(&w, i, z).unwrap();
            prop_assert!(out.iter().all(|&x| x >= 0.0));
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert_eq!(lift_one_path(&w, i, w[i]).unwrap(), w);
        }
    }
}
