//! Multinomial logit models in the unified form `Cᵀ log(L π_i) = X_i θ`.
//!
//! Each of the `J − 1` logits is the log of a ratio of two sums of category
//! probabilities. `L` stacks the numerator rows, then the denominator rows,
//! then a row of ones; `Cᵀ = [I, −I, 0; 0, 0, 1]` takes the differences. The
//! last row of every `X_i` is zero, which pins `Σ π_j = 1`.
//!
//! po, npo and ppo variants are not separate code paths: they differ only in
//! how columns of the `X_i` blocks are shared between logits.
//!
//! The per-point information is `F_i = Uᵀ diag(π)⁻¹ U` with the Jacobian
//! `U = ∂π/∂θᵀ = (Cᵀ D⁻¹ L)⁻¹ X_i` and `D = diag(L π)`.

use std::fmt;
use std::str::FromStr;

use crate::allocation::{DesignProblem, Model};
use crate::error::{Error, Result};
use crate::glm::expit;
use crate::numkernel::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MlmKind {
    Baseline,
    Cumulative,
    Adjacent,
    Continuation,
}

impl MlmKind {
    pub const ALL: [MlmKind; 4] = [
        MlmKind::Baseline,
        MlmKind::Cumulative,
        MlmKind::Adjacent,
        MlmKind::Continuation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MlmKind::Baseline => "baseline",
            MlmKind::Cumulative => "cumulative",
            MlmKind::Adjacent => "adjacent",
            MlmKind::Continuation => "continuation",
        }
    }
}

impl fmt::Display for MlmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MlmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "baseline-category" => Ok(MlmKind::Baseline),
            "cumulative" => Ok(MlmKind::Cumulative),
            "adjacent" | "adjacent-categories" => Ok(MlmKind::Adjacent),
            "continuation" | "continuation-ratio" => Ok(MlmKind::Continuation),
            other => Err(Error::Config(format!("unknown multinomial model kind '{other}'"))),
        }
    }
}

/// The constant matrices `(Cᵀ, L)` of shapes `J × (2J−1)` and `(2J−1) × J`.
pub fn build_cl(j: usize, kind: MlmKind) -> Result<(Matrix, Matrix)> {
    if j < 2 {
        return Err(Error::Dimension(format!("need J >= 2 categories, got {j}")));
    }
    let k = 2 * j - 1;
    let mut ct = Matrix::zeros(j, k);
    for r in 0..j - 1 {
        ct[(r, r)] = 1.0;
        ct[(r, j - 1 + r)] = -1.0;
    }
    ct[(j - 1, k - 1)] = 1.0;

    let mut l = Matrix::zeros(k, j);
    for r in 0..j - 1 {
        let den = j - 1 + r;
        match kind {
            MlmKind::Baseline => {
                l[(r, r)] = 1.0;
                l[(den, j - 1)] = 1.0;
            }
            MlmKind::Cumulative => {
                for c in 0..=r {
                    l[(r, c)] = 1.0;
                }
                for c in r + 1..j {
                    l[(den, c)] = 1.0;
                }
            }
            MlmKind::Adjacent => {
                l[(r, r)] = 1.0;
                l[(den, r + 1)] = 1.0;
            }
            MlmKind::Continuation => {
                l[(r, r)] = 1.0;
                for c in r + 1..j {
                    l[(den, c)] = 1.0;
                }
            }
        }
    }
    for c in 0..j {
        l[(k - 1, c)] = 1.0;
    }
    Ok((ct, l))
}

fn softmax_with_zero(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(0.0f64, |a, &b| a.max(b));
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).chain([(-max).exp()]).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Category probabilities `π` solving `Cᵀ log(L π) = X_i θ` for one point.
pub fn category_probs(x: &Matrix, theta: &[f64], kind: MlmKind) -> Result<Vec<f64>> {
    let j = x.rows();
    if j < 2 {
        return Err(Error::Dimension(format!("need J >= 2 categories, got {j}")));
    }
    if x.row(j - 1).iter().any(|v| *v != 0.0) {
        return Err(Error::InvalidParameter(
            "last row of a multinomial model matrix must be zero".into(),
        ));
    }
    let eta_full = x.mul_vec(theta)?;
    let eta = &eta_full[..j - 1];
    let pi = match kind {
        MlmKind::Baseline => softmax_with_zero(eta),
        MlmKind::Adjacent => {
            // π_j ∝ exp(η_j + … + η_{J−1})
            let mut tails = vec![0.0; j - 1];
            let mut acc = 0.0;
            for r in (0..j - 1).rev() {
                acc += eta[r];
                tails[r] = acc;
            }
            softmax_with_zero(&tails)
        }
        MlmKind::Cumulative => {
            for r in 1..j - 1 {
                if eta[r] <= eta[r - 1] {
                    return Err(Error::InvalidParameter(format!(
                        "cumulative logits must increase: logit {} = {} but logit {} = {}",
                        r,
                        eta[r - 1],
                        r + 1,
                        eta[r]
                    )));
                }
            }
            let mut prev = 0.0;
            let mut pi = Vec::with_capacity(j);
            for &e in eta {
                let g = expit(e);
                pi.push(g - prev);
                prev = g;
            }
            pi.push(expit(-eta[j - 2]));
            pi
        }
        MlmKind::Continuation => {
            let mut survive = 1.0;
            let mut pi = Vec::with_capacity(j);
            for &e in eta {
                pi.push(survive * expit(e));
                survive *= expit(-e);
            }
            pi.push(survive);
            pi
        }
    };
    if let Some(c) = pi.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "category {} has probability {} (underflow from extreme parameters)",
            c + 1,
            pi[c]
        )));
    }
    Ok(pi)
}

/// Jacobian `∂π/∂θᵀ` (J × p) at one design point.
pub fn probability_jacobian(x: &Matrix, theta: &[f64], kind: MlmKind) -> Result<Matrix> {
    let pi = category_probs(x, theta, kind)?;
    jacobian_at(x, &pi, kind)
}

fn jacobian_at(x: &Matrix, pi: &[f64], kind: MlmKind) -> Result<Matrix> {
    let (ct, l) = build_cl(x.rows(), kind)?;
    let lp = l.mul_vec(pi)?;
    let d_inv: Vec<f64> = lp.iter().map(|v| 1.0 / v).collect();
    let m = ct.matmul(&Matrix::diagonal(&d_inv))?.matmul(&l)?;
    m.solve(x)
}

/// Per-point Fisher information `F_i` (p × p).
pub fn fisher_point_mlm(x: &Matrix, theta: &[f64], kind: MlmKind) -> Result<Matrix> {
    let pi = category_probs(x, theta, kind)?;
    let u = jacobian_at(x, &pi, kind)?;
    let p = u.cols();
    let mut f = Matrix::zeros(p, p);
    for (r, &pr) in pi.iter().enumerate() {
        let row = u.row(r);
        for a in 0..p {
            let s = row[a] / pr;
            if s == 0.0 {
                continue;
            }
            for b in 0..p {
                f[(a, b)] += s * row[b];
            }
        }
    }
    Ok(f)
}

/// `Σ c_i F_i` for an MLM problem; `c` holds weights or counts.
pub fn fisher_mlm(problem: &DesignProblem, c: &[f64]) -> Result<Matrix> {
    match problem.model() {
        Model::Mlm {
            kind,
            point_matrices,
            theta,
        } => {
            if c.len() != point_matrices.len() {
                return Err(Error::Dimension(format!(
                    "{} allocation entries for {} design points",
                    c.len(),
                    point_matrices.len()
                )));
            }
            let p = theta.len();
            let mut f = Matrix::zeros(p, p);
            for (x, &ci) in point_matrices.iter().zip(c) {
                if ci == 0.0 {
                    continue;
                }
                f.add_scaled(&fisher_point_mlm(x, theta, *kind)?, ci)?;
            }
            Ok(f)
        }
        Model::Glm { .. } => Err(Error::Unsupported("fisher_mlm on a GLM".into())),
    }
}

pub fn fisher_det_mlm(problem: &DesignProblem, c: &[f64]) -> Result<f64> {
    fisher_mlm(problem, c)?.determinant()
}

/// `max |Cᵀ log(L π) − X_i θ|`: how well `π` solves the model equations.
pub fn probability_residual(x: &Matrix, theta: &[f64], pi: &[f64], kind: MlmKind) -> Result<f64> {
    let (ct, l) = build_cl(x.rows(), kind)?;
    let log_lp: Vec<f64> = l.mul_vec(pi)?.into_iter().map(f64::ln).collect();
    let lhs = ct.mul_vec(&log_lp)?;
    let rhs = x.mul_vec(theta)?;
    Ok(lhs.iter().zip(&rhs).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}
