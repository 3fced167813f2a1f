//! Information weights and Fisher information for generalised linear models.
//!
//! For a design point with linear predictor `η = xᵀβ` the information weight
//! is `ν = (∂μ/∂η)² / Var(Y)`, and the information of an allocation is
//! `F = Σ c_i ν_i x_i x_iᵀ` with `c_i` the weight (or count) of point `i`.
//!
//! | link | response | `ν(η)` |
//! |------|----------|--------|
//! | logit | binomial | `e^η / (1 + e^η)²` |
//! | probit | binomial | `φ(η)² / (Φ(η)(1 − Φ(η)))` |
//! | cloglog | binomial | `e^{2η} e^{−e^η} / (1 − e^{−e^η})` |
//! | loglog | binomial | `e^{−2η} e^{−e^{−η}} / (1 − e^{−e^{−η}})` |
//! | log | Poisson | `e^η` |
//! | identity | Gaussian(σ) | `1 / σ²` |
//!
//! The loglog row follows from `μ = exp(−e^{−η})`, which makes it the cloglog
//! weight reflected through `η = 0`.

use std::fmt;
use std::str::FromStr;

use crate::allocation::{DesignProblem, Model};
use crate::error::{Error, Result};
use crate::numkernel::Matrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Link {
    Logit,
    Probit,
    Cloglog,
    Loglog,
    /// Gaussian response with the identity link and standard deviation `sigma`.
    Identity { sigma: f64 },
    /// Poisson response with the log link.
    Log,
}

impl Link {
    pub fn validate(&self) -> Result<()> {
        match self {
            Link::Identity { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => Err(
                Error::InvalidParameter(format!("gaussian sigma must be positive, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Cloglog => "cloglog",
            Link::Loglog => "loglog",
            Link::Identity { .. } => "identity",
            Link::Log => "log",
        }
    }

    /// Inverse link `μ(η)`.
    pub fn mean(&self, eta: f64) -> f64 {
        match self {
            Link::Logit => expit(eta),
            Link::Probit => normal_cdf(eta),
            Link::Cloglog => -(-eta.exp()).exp_m1(),
            Link::Loglog => (-(-eta).exp()).exp(),
            Link::Identity { .. } => eta,
            Link::Log => eta.exp(),
        }
    }

    /// Response variance as a function of the mean.
    pub fn variance(&self, mu: f64) -> f64 {
        match self {
            Link::Logit | Link::Probit | Link::Cloglog | Link::Loglog => mu * (1.0 - mu),
            Link::Identity { sigma } => sigma * sigma,
            Link::Log => mu,
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    /// Parses a link name; `identity` gets the default `sigma = 1`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logit" => Ok(Link::Logit),
            "probit" => Ok(Link::Probit),
            "cloglog" => Ok(Link::Cloglog),
            "loglog" => Ok(Link::Loglog),
            "identity" | "gaussian" => Ok(Link::Identity { sigma: 1.0 }),
            "log" | "poisson" => Ok(Link::Log),
            other => Err(Error::Config(format!("unknown link function '{other}'"))),
        }
    }
}

pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn cloglog_nu(eta: f64) -> f64 {
    // u²/(e^u − 1) with u = e^η, evaluated in log space for large η.
    let u = eta.exp();
    if u < 1e-8 {
        // u/(e^u − 1) = 1 − u/2 + …
        u * (1.0 - 0.5 * u)
    } else if eta < 3.0 {
        u * u / u.exp_m1()
    } else {
        (2.0 * eta - u - (-(-u).exp_m1()).ln()).exp()
    }
}

/// Information weight `ν(η)` for `link`. Tails underflow to exactly 0.
pub fn nu(link: Link, eta: f64) -> f64 {
    match link {
        Link::Logit => {
            let t = (-eta.abs()).exp();
            t / ((1.0 + t) * (1.0 + t))
        }
        Link::Probit => {
            if eta.abs() > 37.0 {
                return 0.0;
            }
            let ln_phi_sq = -eta * eta - (2.0 * std::f64::consts::PI).ln();
            let lo = (0.5 * libm::erfc(-eta / std::f64::consts::SQRT_2)).ln();
            let hi = (0.5 * libm::erfc(eta / std::f64::consts::SQRT_2)).ln();
            (ln_phi_sq - lo - hi).exp()
        }
        Link::Cloglog => cloglog_nu(eta),
        Link::Loglog => cloglog_nu(-eta),
        Link::Identity { sigma } => 1.0 / (sigma * sigma),
        Link::Log => eta.exp(),
    }
}

/// `ν_i` for every design row.
pub fn information_weights(link: Link, design: &Matrix, beta: &[f64]) -> Result<Vec<f64>> {
    Ok(design.mul_vec(beta)?.into_iter().map(|eta| nu(link, eta)).collect())
}

/// `Σ c_i ν_i x_i x_iᵀ`; points with `c_i = 0` are skipped.
pub fn fisher_from_weights(design: &Matrix, nu: &[f64], c: &[f64]) -> Result<Matrix> {
    let (m, p) = (design.rows(), design.cols());
    if nu.len() != m || c.len() != m {
        return Err(Error::Dimension(format!(
            "{m} design rows, {} information weights, {} allocation entries",
            nu.len(),
            c.len()
        )));
    }
    let mut f = Matrix::zeros(p, p);
    for i in 0..m {
        let s = c[i] * nu[i];
        if s == 0.0 {
            continue;
        }
        let x = design.row(i);
        for a in 0..p {
            for b in 0..p {
                f[(a, b)] += s * x[a] * x[b];
            }
        }
    }
    Ok(f)
}

/// Fisher information of a GLM problem under allocation `c`, which may hold
/// approximate weights or exact counts.
pub fn fisher_glm(problem: &DesignProblem, c: &[f64]) -> Result<Matrix> {
    match problem.model() {
        Model::Glm { link, design, beta } => {
            let nu = information_weights(*link, design, beta)?;
            fisher_from_weights(design, &nu, c)
        }
        Model::Mlm { .. } => Err(Error::Unsupported("fisher_glm on a multinomial model".into())),
    }
}

pub fn fisher_det_glm(problem: &DesignProblem, c: &[f64]) -> Result<f64> {
    fisher_glm(problem, c)?.determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL_LINKS: [Link; 6] = [
        Link::Logit,
        Link::Probit,
        Link::Cloglog,
        Link::Loglog,
        Link::Identity { sigma: 1.7 },
        Link::Log,
    ];

    #[test]
    fn nu_reference_values() {
        assert_eq!(nu(Link::Logit, 0.0), 0.25);
        assert!((nu(Link::Logit, -0.5) - 0.23500371).abs() < 5e-9);
        assert_eq!(nu(Link::Identity { sigma: 1.0 }, 12.3), 1.0);
        assert_eq!(nu(Link::Log, 0.0), 1.0);
    }

    #[test]
    fn nu_matches_numeric_differentiation() {
        // (dμ/dη)² / Var(μ) with a central difference on the inverse link.
        let h = 1e-5;
        for link in ALL_LINKS {
            for k in 0..=40 {
                let eta = -4.0 + 0.2 * k as f64;
                let dmu = (link.mean(eta + h) - link.mean(eta - h)) / (2.0 * h);
                let var = link.variance(link.mean(eta));
                if var < 1e-6 {
                    // the difference quotient has no accurate digits left here
                    continue;
                }
                let oracle = dmu * dmu / var;
                let got = nu(link, eta);
                assert!(
                    (got - oracle).abs() <= 1e-6 * oracle.abs().max(1e-3),
                    "{link} at {eta}: {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn nu_tails_are_finite_and_vanish() {
        for link in [Link::Logit, Link::Probit, Link::Cloglog, Link::Loglog] {
            for eta in [-1e4, -800.0, -40.0, 40.0, 800.0, 1e4] {
                let v = nu(link, eta);
                assert!(v.is_finite() && v >= 0.0 && v < 1e-15, "{link} {eta} {v}");
            }
        }
    }

    #[test]
    fn logit_nu_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let eta: f64 = rng.random_range(-50.0..50.0);
            assert_eq!(nu(Link::Logit, eta), nu(Link::Logit, -eta));
        }
    }

    #[test]
    fn loglog_reflects_cloglog() {
        for k in -20..=20 {
            let eta = k as f64 * 0.37;
            assert_eq!(nu(Link::Loglog, eta), nu(Link::Cloglog, -eta));
        }
    }

    fn s1_problem() -> DesignProblem {
        let x = Matrix::from_rows(&[[1.0, -1.0, -1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]]).unwrap();
        DesignProblem::glm(Link::Logit, x, vec![0.5, 0.5, 0.5]).unwrap()
    }

    #[test]
    fn fisher_small_logistic_example() {
        let f = fisher_glm(&s1_problem(), &[1.0 / 3.0; 3]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { 0.23500371 } else { -0.07833457 };
                assert!((f[(a, b)] - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn single_point_information_is_singular() {
        let f = fisher_glm(&s1_problem(), &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(f.determinant().unwrap(), 0.0);
    }

    #[test]
    fn fisher_matches_termwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for link in ALL_LINKS {
            let rows: Vec<Vec<f64>> = (0..5)
                .map(|_| {
                    let mut r = vec![1.0];
                    r.extend((0..2).map(|_| rng.random_range(-1.0..1.0)));
                    r
                })
                .collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let beta = vec![0.3, -0.8, 0.5];
            let w: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let problem = DesignProblem::glm(link, x.clone(), beta.clone()).unwrap();
            let f = fisher_glm(&problem, &w).unwrap();
            let mut oracle = Matrix::zeros(3, 3);
            for i in 0..5 {
                let eta: f64 = rows[i].iter().zip(&beta).map(|(a, b)| a * b).sum();
                oracle
                    .add_scaled(&Matrix::outer(&rows[i]), w[i] * nu(link, eta))
                    .unwrap();
            }
            assert!(f.max_abs_diff(&oracle) < 1e-12);
            assert!(f.max_abs_diff(&f.transpose()) < 1e-12);
        }
    }

    #[test]
    fn fisher_rejects_mismatched_allocation() {
        assert!(matches!(
            fisher_glm(&s1_problem(), &[0.5, 0.5]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn link_names_round_trip() {
        for link in ALL_LINKS {
            let parsed: Link = link.name().parse().unwrap();
            assert_eq!(parsed.name(), link.name());
        }
        assert!("softmax".parse::<Link>().is_err());
    }
}
