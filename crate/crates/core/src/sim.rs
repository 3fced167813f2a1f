//! Simulation harness comparing sampling strategies by the RMSE of logistic
//! regression estimates.
//!
//! A population repeats design row `i` `N_i` times. Each replication draws
//! fresh responses, samples `n` units under every strategy, refits the model
//! and records coefficient errors. Replication `r` uses the stream
//! `split_seed(master, r)`; inside it, responses use sub-stream 0 and each
//! strategy its own fixed sub-stream, so results do not depend on which
//! other strategies run.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{ExactAllocation, Model};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::feasible::{Direction, LinearProgram};
use crate::glm::{expit, Link};
use crate::numkernel::Matrix;
use crate::seed::split_seed;
use crate::workflow::{optimal_weights, round, uniform_allocation, Criterion};

/// Score tolerance of the logistic fit.
pub const FIT_TOL: f64 = 1e-8;
pub const FIT_MAXIT: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    design: Matrix,
    labels: Vec<usize>,
    sizes: Vec<u64>,
}

impl Population {
    /// Rows of stratum 0 first, then stratum 1, and so on.
    pub fn from_strata(design: &Matrix, sizes: &[u64]) -> Result<Self> {
        if sizes.len() != design.rows() {
            return Err(Error::Dimension(format!(
                "{} strata sizes for {} design points",
                sizes.len(),
                design.rows()
            )));
        }
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| std::iter::repeat_n(i, s as usize))
            .collect();
        Ok(Population { design: design.clone(), labels, sizes: sizes.to_vec() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Zero-based stratum of each unit.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.design.row(self.labels[k])
    }

    /// Covariate matrix of the selected units.
    pub fn rows_of(&self, idx: &[usize]) -> Matrix {
        let p = self.design.cols();
        let data = idx.iter().flat_map(|&k| self.row(k).to_vec()).collect();
        Matrix::new(idx.len(), p, data).expect("shape")
    }
}

/// Independent `Bernoulli(μ(xᵀβ))` draws.
pub fn generate_binary_responses(pop: &Population, beta: &[f64], link: Link, seed: u64) -> Result<Vec<bool>> {
    if beta.len() != pop.design.cols() {
        return Err(Error::Dimension(format!(
            "beta has {} entries for {} covariates",
            beta.len(),
            pop.design.cols()
        )));
    }
    if matches!(link, Link::Identity { .. }) {
        return Err(Error::Unsupported("binary responses need a binary link".into()));
    }
    let probs: Vec<f64> = (0..pop.design.rows())
        .map(|i| link.mean(pop.design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pop.labels.iter().map(|&i| rng.random::<f64>() < probs[i]).collect())
}

/// Stratified simple random sample: one pass over the units, taking unit `k`
/// of stratum `i` with probability `(s_i − taken_i)/(N_i − seen_i)`.
pub fn stratified_sample(labels: &[usize], s: &[u64], seed: u64) -> Result<Vec<usize>> {
    let m = s.len();
    let mut sizes = vec![0u64; m];
    for &l in labels {
        if l >= m {
            return Err(Error::Dimension(format!("label {l} for {m} strata")));
        }
        sizes[l] += 1;
    }
    if let Some(i) = (0..m).find(|&i| s[i] > sizes[i]) {
        return Err(Error::Infeasible { residual: (s[i] - sizes[i]) as f64 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = vec![0u64; m];
    let mut taken = vec![0u64; m];
    let mut out = Vec::with_capacity(s.iter().sum::<u64>() as usize);
    for (k, &i) in labels.iter().enumerate() {
        if taken[i] < s[i] {
            let p = (s[i] - taken[i]) as f64 / (sizes[i] - seen[i]) as f64;
            if rng.random::<f64>() < p {
                taken[i] += 1;
                out.push(k);
            }
        }
        seen[i] += 1;
    }
    Ok(out)
}

/// Uniform `n`-subset of `0..big_n`, ascending.
pub fn srswor(big_n: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > big_n {
        return Err(Error::InvalidParameter(format!("sample of {n} from {big_n} units")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, big_n, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFailure {
    /// `XᵀWX` is singular.
    Singular,
    /// Estimates left the representable range.
    Diverged,
}

impl fmt::Display for FitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitFailure::Singular => "singular information",
            FitFailure::Diverged => "diverged",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// The score test was met before the iteration cap.
    pub converged: bool,
    /// Complete or quasi-complete separation: no finite MLE exists and
    /// `beta` is wherever the iterations stopped.
    pub separated: bool,
}

/// What a replication records when the sample is separated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationPolicy {
    /// Keep the estimate where the iterations stopped, as a stock fitter does.
    #[default]
    Estimate,
    /// Record a missing value.
    Missing,
}

/// Whether some `b` with `Xb ≠ 0` has `(2y−1)·xᵀb ≥ 0` for every unit.
pub fn is_separated(x: &Matrix, y: &[bool]) -> bool {
    let p = x.cols();
    let mut signed: Vec<Vec<f64>> = Vec::new();
    for (k, &yk) in y.iter().enumerate() {
        let s = if yk { 1.0 } else { -1.0 };
        let r: Vec<f64> = x.row(k).iter().map(|v| s * v).collect();
        if !signed.contains(&r) {
            signed.push(r);
        }
    }
    // b = b⁺ − b⁻ with both parts in [0, 1]
    let split = |r: &[f64]| r.iter().copied().chain(r.iter().map(|v| -v)).collect::<Vec<f64>>();
    let mut rows: Vec<(Vec<f64>, Direction, f64)> =
        signed.iter().map(|r| (split(r), Direction::Ge, 0.0)).collect();
    for j in 0..2 * p {
        let mut e = vec![0.0; 2 * p];
        e[j] = 1.0;
        rows.push((e, Direction::Le, 1.0));
    }
    let total: Vec<f64> = (0..p).map(|j| signed.iter().map(|r| r[j]).sum()).collect();
    let lp = LinearProgram { objective: split(&total), rows };
    let scale = signed.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    match lp.maximize() {
        Ok(sol) => sol.value > 1e-9 * scale * signed.len() as f64,
        Err(_) => false,
    }
}

/// Logistic maximum likelihood by Newton–Raphson (IRLS) from zero, stopping
/// when the largest score component is below [`FIT_TOL`] or after
/// [`FIT_MAXIT`] iterations.
pub fn fit_logistic(x: &Matrix, y: &[bool]) -> std::result::Result<LogisticFit, FitFailure> {
    assert_eq!(x.rows(), y.len(), "rows and responses differ in length");
    let separated = is_separated(x, y);
    let p = x.cols();
    let mut beta = vec![0.0; p];
    for it in 0..FIT_MAXIT {
        let mut score = vec![0.0; p];
        let mut info = Matrix::zeros(p, p);
        for (k, &yk) in y.iter().enumerate() {
            let row = x.row(k);
            let mu = expit(row.iter().zip(&beta).map(|(a, b)| a * b).sum());
            let resid = if yk { 1.0 - mu } else { -mu };
            for (s, a) in score.iter_mut().zip(row) {
                *s += a * resid;
            }
            info.add_scaled(&Matrix::outer(row), mu * (1.0 - mu)).expect("shape");
        }
        if score.iter().all(|s| s.abs() < FIT_TOL) {
            return Ok(LogisticFit { beta, iterations: it, converged: true, separated });
        }
        let step = info
            .solve(&Matrix::new(p, 1, score).expect("shape"))
            .map_err(|_| FitFailure::Singular)?;
        for (b, d) in beta.iter_mut().zip(step.as_slice()) {
            *b += d;
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(FitFailure::Diverged);
        }
    }
    Ok(LogisticFit { beta, iterations: FIT_MAXIT, converged: false, separated })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The whole population.
    Full,
    Srswor,
    /// Constrained uniform allocation.
    Uniform,
    /// Locally D-optimal allocation.
    LocalD,
    /// Expected-weight D-optimal allocation.
    Ew,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Full, Strategy::Srswor, Strategy::Uniform, Strategy::LocalD, Strategy::Ew];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Full => "full",
            Strategy::Srswor => "srswor",
            Strategy::Uniform => "uniform",
            Strategy::LocalD => "local_d",
            Strategy::Ew => "ew",
        }
    }

    fn stream(self) -> u64 {
        1 + self as u64
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy '{s}' (expected one of {})",
                    Strategy::ALL.map(Strategy::name).join(", ")
                ))
            })
    }
}

/// How a strategy selects units.
#[derive(Clone, Debug, PartialEq)]
pub enum Plan {
    Full,
    Srswor(usize),
    Stratified(ExactAllocation),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmseRecord {
    /// One-based.
    pub replication: usize,
    pub strategy: Strategy,
    pub group: String,
    /// `None` when the fit failed.
    pub rmse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub group: String,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub fitted: usize,
    pub missing: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmseReport {
    pub replications: usize,
    pub seed: u64,
    pub plans: Vec<(Strategy, Option<Vec<u64>>)>,
    pub records: Vec<RmseRecord>,
}

/// Coefficient 0 is the intercept; `pooled` is the root mean squared error
/// of the others.
pub fn coefficient_groups(p: usize) -> Vec<String> {
    let mut g = vec!["beta0".to_string(), "pooled".to_string()];
    g.extend((1..p).map(|j| format!("beta{j}")));
    g
}

fn group_errors(est: &[f64], beta: &[f64]) -> Vec<f64> {
    let err: Vec<f64> = est.iter().zip(beta).map(|(a, b)| a - b).collect();
    let rest = &err[1..];
    let pooled = (rest.iter().map(|e| e * e).sum::<f64>() / rest.len() as f64).sqrt();
    let mut out = vec![err[0].abs(), pooled];
    out.extend(rest.iter().map(|e| e.abs()));
    out
}

impl RmseReport {
    pub fn strategies(&self) -> Vec<Strategy> {
        self.plans.iter().map(|(s, _)| *s).collect()
    }

    pub fn groups(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.group) {
                seen.push(r.group.clone());
            }
        }
        seen
    }

    pub fn values(&self, strategy: Strategy, group: &str) -> Vec<Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.strategy == strategy && r.group == group)
            .map(|r| r.rmse)
            .collect()
    }

    /// Mean over the replications whose fit succeeded.
    pub fn mean(&self, strategy: Strategy, group: &str) -> Option<f64> {
        let v: Vec<f64> = self.values(strategy, group).into_iter().flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for s in self.strategies() {
            for g in self.groups() {
                let all = self.values(s, &g);
                let v: Vec<f64> = all.iter().flatten().copied().collect();
                let mean = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
                let sd = (v.len() > 1).then(|| {
                    let mu = mean.unwrap();
                    (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
                });
                rows.push(SummaryRow {
                    strategy: s,
                    group: g,
                    mean,
                    sd,
                    fitted: v.len(),
                    missing: all.len() - v.len(),
                });
            }
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("replication,strategy,coefficient_group,rmse\n");
        for r in &self.records {
            let v = r.rmse.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"));
            out.push_str(&format!("{},{},{},{}\n", r.replication, r.strategy, r.group, v));
        }
        out
    }
}

/// Runs `reps` replications of the given plans on `pop`.
pub fn run_plans(
    pop: &Population,
    beta: &[f64],
    plans: &[(Strategy, Plan)],
    reps: usize,
    seed: u64,
    policy: SeparationPolicy,
) -> Result<RmseReport> {
    let groups = coefficient_groups(beta.len());
    for (_, plan) in plans {
        match plan {
            Plan::Stratified(a) if a.len() != pop.sizes().len() => {
                return Err(Error::Dimension("allocation and strata differ in length".into()))
            }
            Plan::Stratified(a) => {
                if let Some(i) = (0..a.len()).find(|&i| a.counts()[i] > pop.sizes()[i]) {
                    return Err(Error::InvalidAllocation(format!(
                        "allocation takes {} units from stratum {} of size {}",
                        a.counts()[i],
                        i + 1,
                        pop.sizes()[i]
                    )));
                }
            }
            Plan::Srswor(n) if *n > pop.len() => {
                return Err(Error::InvalidParameter(format!("sample of {n} from {} units", pop.len())))
            }
            _ => {}
        }
    }
    let per_rep: Vec<Vec<RmseRecord>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let rep_seed = split_seed(seed, r as u64);
            let y = generate_binary_responses(pop, beta, Link::Logit, split_seed(rep_seed, 0))?;
            let mut out = Vec::with_capacity(plans.len() * groups.len());
            for (strategy, plan) in plans {
                let s = split_seed(rep_seed, strategy.stream());
                let idx = match plan {
                    Plan::Full => (0..pop.len()).collect(),
                    Plan::Srswor(n) => srswor(pop.len(), *n, s)?,
                    Plan::Stratified(a) => stratified_sample(pop.labels(), a.counts(), s)?,
                };
                let ys: Vec<bool> = idx.iter().map(|&k| y[k]).collect();
                let errs = match fit_logistic(&pop.rows_of(&idx), &ys) {
                    Ok(fit) if !(fit.separated && policy == SeparationPolicy::Missing) => {
                        Some(group_errors(&fit.beta, beta))
                    }
                    _ => None,
                };
                for (g, name) in groups.iter().enumerate() {
                    out.push(RmseRecord {
                        replication: r + 1,
                        strategy: *strategy,
                        group: name.clone(),
                        rmse: errs.as_ref().map(|e| e[g]),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(RmseReport {
        replications: reps,
        seed,
        plans: plans
            .iter()
            .map(|(s, p)| {
                let counts = match p {
                    Plan::Stratified(a) => Some(a.counts().to_vec()),
                    _ => None,
                };
                (*s, counts)
            })
            .collect(),
        records: per_rep.into_iter().flatten().collect(),
    })
}

/// Allocation each strategy samples with under `scenario`.
pub fn plan_for(scenario: &Scenario, strategy: Strategy) -> Result<Plan> {
    let constrained = scenario.has_constraints();
    Ok(match strategy {
        Strategy::Full => Plan::Full,
        Strategy::Srswor => Plan::Srswor(scenario.n as usize),
        Strategy::Uniform => Plan::Stratified(uniform_allocation(scenario)?.0),
        Strategy::LocalD | Strategy::Ew => {
            let criterion = if strategy == Strategy::Ew { Criterion::ExpectedWeights } else { Criterion::Local };
            let res = optimal_weights(scenario, criterion, constrained)?;
            Plan::Stratified(round(scenario, &res.w, constrained)?.0)
        }
    })
}

/// The full experiment described by the scenario's `simulation` section.
pub fn rmse_experiment(scenario: &Scenario, reps: usize, seed: u64) -> Result<RmseReport> {
    let Model::Glm { link, design, beta } = scenario.problem.model() else {
        return Err(Error::Unsupported("simulation covers glm models only".into()));
    };
    if *link != Link::Logit {
        return Err(Error::Unsupported(format!("simulation fits logistic models, not {link}")));
    }
    let sizes = scenario
        .strata_sizes()
        .ok_or_else(|| Error::Config("simulation needs strata sizes".into()))?;
    let names = scenario
        .simulation
        .as_ref()
        .map_or_else(crate::config::default_strategies, |s| s.strategies.clone());
    let strategies = names.iter().map(|s| s.parse()).collect::<Result<Vec<Strategy>>>()?;
    let plans = strategies
        .iter()
        .map(|&s| Ok((s, plan_for(scenario, s)?)))
        .collect::<Result<Vec<_>>>()?;
    let pop = Population::from_strata(design, &sizes)?;
    let policy = scenario.simulation.as_ref().map(|s| s.on_separation).unwrap_or_default();
    run_plans(&pop, beta, &plans, reps, seed, policy)
}
