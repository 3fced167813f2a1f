//! Expected information weights `E[ν(xᵀβ)]` under a coefficient prior.
//!
//! Independent uniform priors are integrated with a tensor Gauss–Legendre
//! rule; an explicit sample of coefficient vectors is averaged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{nu, Link};
use crate::numkernel::Matrix;

pub const DEFAULT_ORDER: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PriorSpec {
    /// Independent `β_j ~ U(lower_j, upper_j)`.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    /// Equally weighted coefficient vectors.
    Sample { draws: Vec<Vec<f64>> },
}

impl PriorSpec {
    pub fn uniform(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let p = PriorSpec::Uniform { lower, upper };
        p.validate()?;
        Ok(p)
    }

    pub fn point(beta: &[f64]) -> Self {
        PriorSpec::Uniform { lower: beta.to_vec(), upper: beta.to_vec() }
    }

    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::Uniform { lower, .. } => lower.len(),
            PriorSpec::Sample { draws } => draws.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSpec::Uniform { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::Dimension(format!(
                        "prior has {} lower and {} upper bounds",
                        lower.len(),
                        upper.len()
                    )));
                }
                for (j, (lo, hi)) in lower.iter().zip(upper).enumerate() {
                    if lo.is_nan() || hi.is_nan() || lo > hi {
                        return Err(Error::InvalidParameter(format!(
                            "prior bounds for coefficient {j} are [{lo}, {hi}]"
                        )));
                    }
                    if !lo.is_finite() || !hi.is_finite() {
                        return Err(Error::Unsupported(format!(
                            "unbounded prior for coefficient {j}; supply a sample instead"
                        )));
                    }
                }
                Ok(())
            }
            PriorSpec::Sample { draws } => {
                let p = self.dim();
                if draws.is_empty() {
                    return Err(Error::InvalidParameter("prior sample is empty".into()));
                }
                if draws.iter().any(|d| d.len() != p || d.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidParameter(
                        "prior sample rows must be finite and of equal length".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(z) and P_n'(z) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[ν(link, xᵀβ)]` with a Gauss–Legendre rule of the given order per axis.
pub fn expected_nu_with_order(x: &[f64], prior: &PriorSpec, link: Link, order: usize) -> Result<f64> {
    prior.validate()?;
    if x.len() != prior.dim() {
        return Err(Error::Dimension(format!(
            "design row has {} entries, prior has {} coefficients",
            x.len(),
            prior.dim()
        )));
    }
    match prior {
        PriorSpec::Sample { draws } => {
            let s: f64 = draws
                .iter()
                .map(|b| nu(link, x.iter().zip(b).map(|(a, c)| a * c).sum()))
                .sum();
            Ok(s / draws.len() as f64)
        }
        PriorSpec::Uniform { lower, upper } => {
            if order == 0 {
                return Err(Error::InvalidParameter("quadrature order must be positive".into()));
            }
            let (nodes, weights) = gauss_legendre(order);
            // Axes with x_j = 0 integrate to 1; degenerate axes are constants.
            let mut shift = 0.0;
            let mut axes: Vec<(f64, f64)> = Vec::new();
            for ((&xj, &lo), &hi) in x.iter().zip(lower).zip(upper) {
                if xj == 0.0 {
                    continue;
                }
                let mid = 0.5 * (lo + hi);
                shift += xj * mid;
                if hi > lo {
                    axes.push((xj, 0.5 * (hi - lo)));
                }
            }
            if axes.is_empty() {
                return Ok(nu(link, shift));
            }
            let d = axes.len();
            let mut idx = vec![0usize; d];
            let mut total = 0.0;
            loop {
                let mut eta = shift;
                let mut wt = 1.0;
                for (k, &(xj, half)) in axes.iter().enumerate() {
                    eta += xj * half * nodes[idx[k]];
                    wt *= 0.5 * weights[idx[k]];
                }
                total += wt * nu(link, eta);
                let mut k = 0;
                while k < d {
                    idx[k] += 1;
                    if idx[k] < order {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == d {
                    break;
                }
            }
            Ok(total)
        }
    }
}

pub fn expected_nu(x: &[f64], prior: &PriorSpec, link: Link) -> Result<f64> {
    expected_nu_with_order(x, prior, link, DEFAULT_ORDER)
}

/// Row-wise `E[ν]` for a design matrix.
pub fn expected_weights_with_order(design: &Matrix, prior: &PriorSpec, link: Link, order: usize) -> Result<Vec<f64>> {
    (0..design.rows())
        .map(|i| expected_nu_with_order(design.row(i), prior, link, order))
        .collect()
}

#[allow(non_snake_case)]
pub fn expected_W(design: &Matrix, prior: &PriorSpec, link: Link) -> Result<Vec<f64>> {
    expected_weights_with_order(design, prior, link, DEFAULT_ORDER)
}
