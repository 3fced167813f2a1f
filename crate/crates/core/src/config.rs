//! JSON problem configurations.
//!
//! Arrays are stored row-major with explicit dimensions:
//!
//! ```json
//! { "dims": [3, 2], "data": [1, 0, 1, 1, 1, 2] }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocation::{DesignProblem, Model};
use crate::error::{Error, Result};
use crate::ew::PriorSpec;
use crate::feasible::{ConstraintRow, Direction, LinearConstraintSet};
use crate::glm::Link;
use crate::mlm::MlmKind;
use crate::numkernel::Matrix;
use crate::optimizer::OptimOptions;
use crate::sim::SeparationPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Array {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Array {
    fn check(&self, name: &str, rank: usize) -> Result<()> {
        if self.dims.len() != rank {
            return Err(Error::Config(format!(
                "{name} must have {rank} dims, got {:?}",
                self.dims
            )));
        }
        let n: usize = self.dims.iter().product();
        if n != self.data.len() {
            return Err(Error::Config(format!(
                "{name} has dims {:?} ({n} entries) but {} data values",
                self.dims,
                self.data.len()
            )));
        }
        Ok(())
    }

    fn from_matrix(m: &Matrix) -> Self {
        Array { dims: vec![m.rows(), m.cols()], data: m.as_slice().to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Glm {
        link: String,
        #[serde(rename = "X")]
        x: Array,
        beta: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<f64>,
    },
    Mlm {
        kind: String,
        #[serde(rename = "J")]
        j: usize,
        /// `m × J × p`
        #[serde(rename = "Xi")]
        xi: Array,
        theta: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintScale {
    /// `a·w dir b` on the weights.
    #[default]
    Weights,
    /// `a·(n w) dir b` on the counts.
    Counts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub coeffs: Vec<f64>,
    pub dir: Direction,
    pub rhs: f64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub on: ConstraintScale,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    /// Population count per design point; defaults to `bounds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata_sizes: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub on_separation: SeparationPolicy,
}

pub fn default_strategies() -> Vec<String> {
    ["full", "srswor", "uniform", "local_d", "ew"].map(String::from).to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelConfig,
    pub n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Per-point caps `n_i ≤ N_i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<ConstraintConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub solver: OptimOptions,
    /// Allocation for `fisher`: weights or counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationConfig>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        ProblemConfig::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub problem: DesignProblem,
    pub n: u64,
    pub bounds: Option<Vec<u64>>,
    pub constraints: Vec<ConstraintConfig>,
    pub prior: Option<PriorSpec>,
    pub solver: OptimOptions,
    pub allocation: Option<Vec<f64>>,
    pub simulation: Option<SimulationConfig>,
}

impl Scenario {
    pub fn from_config(cfg: &ProblemConfig) -> Result<Self> {
        let mut problem = match &cfg.model {
            ModelConfig::Glm { link, x, beta, sigma } => {
                x.check("model.X", 2)?;
                let mut link: Link = link.parse()?;
                if let (Link::Identity { .. }, Some(s)) = (link, sigma) {
                    link = Link::Identity { sigma: *s };
                } else if sigma.is_some() {
                    return Err(Error::Config("model.sigma applies only to the identity link".into()));
                }
                let design = Matrix::new(x.dims[0], x.dims[1], x.data.clone())?;
                DesignProblem::glm(link, design, beta.clone())?
            }
            ModelConfig::Mlm { kind, j, xi, theta } => {
                xi.check("model.Xi", 3)?;
                let kind: MlmKind = kind.parse()?;
                let (m, jj, p) = (xi.dims[0], xi.dims[1], xi.dims[2]);
                if jj != *j {
                    return Err(Error::Config(format!("model.Xi has {jj} rows per point but J = {j}")));
                }
                let blocks = (0..m)
                    .map(|i| Matrix::new(jj, p, xi.data[i * jj * p..(i + 1) * jj * p].to_vec()))
                    .collect::<Result<Vec<_>>>()?;
                DesignProblem::mlm(kind, blocks, theta.clone())?
            }
        };
        if let Some(labels) = &cfg.labels {
            problem = problem.with_labels(labels.clone())?;
        }
        let m = problem.m();
        if cfg.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if let Some(b) = &cfg.bounds {
            if b.len() != m {
                return Err(Error::Config(format!("bounds has {} entries for {m} design points", b.len())));
            }
        }
        for (k, c) in cfg.constraints.iter().enumerate() {
            if c.coeffs.len() != m {
                return Err(Error::Config(format!(
                    "constraints[{k}] has {} coefficients for {m} design points",
                    c.coeffs.len()
                )));
            }
        }
        if let Some(prior) = &cfg.prior {
            prior.validate()?;
            if !matches!(problem.model(), Model::Glm { .. }) {
                return Err(Error::Config("a prior is supported only for glm models".into()));
            }
            if prior.dim() != problem.p() {
                return Err(Error::Config(format!(
                    "prior has {} coefficients, model has {}",
                    prior.dim(),
                    problem.p()
                )));
            }
        }
        cfg.solver.validate()?;
        if let Some(a) = &cfg.allocation {
            if a.len() != m {
                return Err(Error::Config(format!("allocation has {} entries for {m} design points", a.len())));
            }
        }
        if let Some(sim) = &cfg.simulation {
            let sizes = sim.strata_sizes.as_ref().or(cfg.bounds.as_ref());
            match sizes {
                Some(s) if s.len() == m => {}
                Some(s) => {
                    return Err(Error::Config(format!(
                        "simulation.strata_sizes has {} entries for {m} design points",
                        s.len()
                    )))
                }
                None => {
                    return Err(Error::Config(
                        "simulation needs strata_sizes or bounds to build the population".into(),
                    ))
                }
            }
        }
        let scenario = Scenario {
            name: cfg.name.clone(),
            problem,
            n: cfg.n,
            bounds: cfg.bounds.clone(),
            constraints: cfg.constraints.clone(),
            prior: cfg.prior.clone(),
            solver: cfg.solver.clone(),
            allocation: cfg.allocation.clone(),
            simulation: cfg.simulation.clone(),
        };
        scenario.constraint_set()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Scenario::from_config(&ProblemConfig::from_path(path)?)
    }

    pub fn to_config(&self) -> ProblemConfig {
        let model = match self.problem.model() {
            Model::Glm { link, design, beta } => ModelConfig::Glm {
                link: link.name().to_string(),
                x: Array::from_matrix(design),
                beta: beta.clone(),
                sigma: match link {
                    Link::Identity { sigma } => Some(*sigma),
                    _ => None,
                },
            },
            Model::Mlm { kind, point_matrices, theta } => {
                let (j, p) = (point_matrices[0].rows(), point_matrices[0].cols());
                ModelConfig::Mlm {
                    kind: kind.name().to_string(),
                    j,
                    xi: Array {
                        dims: vec![point_matrices.len(), j, p],
                        data: point_matrices.iter().flat_map(|x| x.as_slice().to_vec()).collect(),
                    },
                    theta: theta.clone(),
                }
            }
        };
        ProblemConfig {
            name: self.name.clone(),
            model,
            n: self.n,
            labels: self.problem.labels().map(<[String]>::to_vec),
            bounds: self.bounds.clone(),
            constraints: self.constraints.clone(),
            prior: self.prior.clone(),
            solver: self.solver.clone(),
            allocation: self.allocation.clone(),
            simulation: self.simulation.clone(),
        }
    }

    pub fn m(&self) -> usize {
        self.problem.m()
    }

    pub fn labels(&self) -> Vec<String> {
        match self.problem.labels() {
            Some(l) => l.to_vec(),
            None => (1..=self.m()).map(|i| i.to_string()).collect(),
        }
    }

    /// Bounds and general rows, all expressed on the weights.
    pub fn constraint_set(&self) -> Result<LinearConstraintSet> {
        let m = self.m();
        let n = self.n as f64;
        let mut rows = Vec::new();
        if let Some(b) = &self.bounds {
            for (i, &cap) in b.iter().enumerate() {
                let mut a = vec![0.0; m];
                a[i] = 1.0;
                rows.push(ConstraintRow::new(a, Direction::Le, cap as f64 / n));
            }
        }
        for c in &self.constraints {
            let rhs = match c.on {
                ConstraintScale::Weights => c.rhs,
                ConstraintScale::Counts => c.rhs / n,
            };
            rows.push(ConstraintRow::new(c.coeffs.clone(), c.dir, rhs));
        }
        LinearConstraintSet::new(m, rows)
    }

    pub fn has_constraints(&self) -> bool {
        self.bounds.is_some() || !self.constraints.is_empty()
    }

    /// Population counts per design point for simulation.
    pub fn strata_sizes(&self) -> Option<Vec<u64>> {
        self.simulation
            .as_ref()
            .and_then(|s| s.strata_sizes.clone())
            .or_else(|| self.bounds.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "model": {"family": "glm", "link": "logit",
                  "X": {"dims": [3, 3], "data": [1,-1,-1, 1,-1,1, 1,1,-1]},
                  "beta": [0.5, 0.5, 0.5]},
        "n": 30,
        "constraints": [{"coeffs": [1,0,0], "dir": "<=", "rhs": 5, "on": "counts"}]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ProblemConfig::from_json(SMALL).unwrap();
        let s = Scenario::from_config(&cfg).unwrap();
        assert_eq!(s.m(), 3);
        let again = Scenario::from_config(&ProblemConfig::from_json(&s.to_config().to_json()).unwrap()).unwrap();
        assert_eq!(s, again);
        let cs = s.constraint_set().unwrap();
        assert!((cs.rows()[0].rhs - 5.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_point_at_lines() {
        let err = ProblemConfig::from_json("{\n  \"n\": 3,\n  \"model\": [\n}").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn shape_errors_name_the_field() {
        let bad = SMALL.replace("[3, 3]", "[3, 2]");
        let err = Scenario::from_config(&ProblemConfig::from_json(&bad).unwrap()).unwrap_err();
        assert!(err.to_string().contains("model.X"), "{err}");
        assert!(err.is_user_error());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = SMALL.replace("\"n\": 30", "\"n\": 30, \"nn\": 1");
        assert!(ProblemConfig::from_json(&bad).is_err());
    }
}
