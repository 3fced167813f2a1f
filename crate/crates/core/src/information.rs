//! Precomputed per-point information matrices.
//!
//! Every model in the crate has `F(c) = Σ c_i F_i`, so once the `F_i` are
//! known the optimiser and the rounding step only ever need weighted sums.

use crate::error::{Error, Result};
use crate::glm::{information_weights, Link};
use crate::mlm::{fisher_point_mlm, MlmKind};
use crate::numkernel::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct InformationSet {
    points: Vec<Matrix>,
    p: usize,
}

impl InformationSet {
    pub fn from_matrices(points: Vec<Matrix>) -> Result<Self> {
        let p = points
            .first()
            .ok_or_else(|| Error::Dimension("no design points".into()))?
            .rows();
        for (i, f) in points.iter().enumerate() {
            if f.rows() != p || f.cols() != p {
                return Err(Error::Dimension(format!(
                    "information matrix {i} is {}x{}, expected {p}x{p}",
                    f.rows(),
                    f.cols()
                )));
            }
        }
        Ok(InformationSet { points, p })
    }

    /// `F_i = ν_i x_i x_iᵀ` with the given information weights.
    pub fn glm_weighted(design: &Matrix, nu: &[f64]) -> Result<Self> {
        if nu.len() != design.rows() {
            return Err(Error::Dimension(format!(
                "{} information weights for {} design rows",
                nu.len(),
                design.rows()
            )));
        }
        if let Some(i) = nu.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "information weight {i} is {}",
                nu[i]
            )));
        }
        let points = (0..design.rows())
            .map(|i| Matrix::outer(design.row(i)).scaled(nu[i]))
            .collect();
        InformationSet::from_matrices(points)
    }

    pub fn glm(link: Link, design: &Matrix, beta: &[f64]) -> Result<Self> {
        let nu = information_weights(link, design, beta)?;
        InformationSet::glm_weighted(design, &nu)
    }

    pub fn mlm(kind: MlmKind, point_matrices: &[Matrix], theta: &[f64]) -> Result<Self> {
        let points = point_matrices
            .iter()
            .map(|x| fisher_point_mlm(x, theta, kind))
            .collect::<Result<Vec<_>>>()?;
        InformationSet::from_matrices(points)
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn point(&self, i: usize) -> &Matrix {
        &self.points[i]
    }

    /// `Σ c_i F_i`; zero entries of `c` contribute nothing.
    pub fn fisher(&self, c: &[f64]) -> Result<Matrix> {
        if c.len() != self.m() {
            return Err(Error::Dimension(format!(
                "{} allocation entries for {} design points",
                c.len(),
                self.m()
            )));
        }
        let mut f = Matrix::zeros(self.p, self.p);
        for (fi, &ci) in self.points.iter().zip(c) {
            if ci != 0.0 {
                f.add_scaled(fi, ci)?;
            }
        }
        Ok(f)
    }

    /// `|Σ c_i F_i|`.
    pub fn det(&self, c: &[f64]) -> Result<f64> {
        self.fisher(c)?.determinant()
    }

    /// Determinant of an integer allocation.
    pub fn det_counts(&self, counts: &[u64]) -> Result<f64> {
        let c: Vec<f64> = counts.iter().map(|&n| n as f64).collect();
        self.det(&c)
    }
}
