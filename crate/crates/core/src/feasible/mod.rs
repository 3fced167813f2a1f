//! Linear constraint sets over the allocation simplex.
//!
//! A [`LinearConstraintSet`] holds rows `a·w {≤,=,≥} b`; the simplex rows
//! `Σ w = 1`, `w ≥ 0` are always implied and never stored.

mod simplex;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simplex::{LinearProgram, LpSolution};

/// Default absolute feasibility tolerance.
pub const FEAS_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==", alias = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Le => Direction::Ge,
            Direction::Eq => Direction::Eq,
            Direction::Ge => Direction::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Le => "<=",
            Direction::Eq => "==",
            Direction::Ge => ">=",
        }
    }

    /// Whether `lhs dir rhs` holds within `eps`.
    pub fn holds(self, lhs: f64, rhs: f64, eps: f64) -> bool {
        match self {
            Direction::Le => lhs <= rhs + eps,
            Direction::Eq => (lhs - rhs).abs() <= eps,
            Direction::Ge => lhs >= rhs - eps,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "<=" | "≤" => Ok(Direction::Le),
            "=" | "==" => Ok(Direction::Eq),
            ">=" | "≥" => Ok(Direction::Ge),
            other => Err(Error::Config(format!("unknown constraint direction '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub dir: Direction,
    pub rhs: f64,
}

impl ConstraintRow {
    pub fn new(coeffs: Vec<f64>, dir: Direction, rhs: f64) -> Self {
        ConstraintRow { coeffs, dir, rhs }
    }

    pub fn lhs(&self, w: &[f64]) -> f64 {
        self.coeffs.iter().zip(w).map(|(a, x)| a * x).sum()
    }
}

/// Closed interval `[lo, hi]`; `lo > hi` marks it empty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn empty() -> Self {
        Interval { lo: 1.0, hi: 0.0 }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, z: f64, slack: f64) -> bool {
        z >= self.lo - slack && z <= self.hi + slack
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraintSet {
    m: usize,
    rows: Vec<ConstraintRow>,
}

impl LinearConstraintSet {
    /// The plain simplex `S_0` over `m` points.
    pub fn unconstrained(m: usize) -> Self {
        LinearConstraintSet { m, rows: Vec::new() }
    }

    pub fn new(m: usize, rows: Vec<ConstraintRow>) -> Result<Self> {
        let mut cs = LinearConstraintSet::unconstrained(m);
        for row in rows {
            cs.push(row)?;
        }
        Ok(cs)
    }

    /// Per-point upper bounds `w_i ≤ u_i`.
    pub fn upper_bounds(bounds: &[f64]) -> Result<Self> {
        let m = bounds.len();
        let rows = bounds
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let mut a = vec![0.0; m];
                a[i] = 1.0;
                ConstraintRow::new(a, Direction::Le, u)
            })
            .collect();
        LinearConstraintSet::new(m, rows)
    }

    pub fn push(&mut self, row: ConstraintRow) -> Result<()> {
        if row.coeffs.len() != self.m {
            return Err(Error::Dimension(format!(
                "constraint row {} has {} coefficients for {} design points",
                self.rows.len(),
                row.coeffs.len(),
                self.m
            )));
        }
        if !row.rhs.is_finite() || row.coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "constraint row {} is not finite",
                self.rows.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    pub fn is_unconstrained(&self) -> bool {
        self.rows.is_empty()
    }

    /// Every stored row and the simplex rows hold within `eps`.
    pub fn is_feasible(&self, w: &[f64], eps: f64) -> bool {
        if w.len() != self.m || w.iter().any(|x| !x.is_finite() || *x < -eps) {
            return false;
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > eps {
            return false;
        }
        self.rows.iter().all(|r| r.dir.holds(r.lhs(w), r.rhs, eps))
    }

    /// The set of `z ∈ [0, 1]` for which the lift-one path `w_i(z)` stays in
    /// the region. When `w_i = 1` the path is undefined and `[1, 1]` is returned.
    pub fn liftone_interval(&self, i: usize, w: &[f64]) -> Interval {
        assert!(i < self.m && w.len() == self.m, "index or length out of range");
        let wi = w[i];
        if wi >= 1.0 {
            return Interval::new(1.0, 1.0);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for row in &self.rows {
            // a·w(z) = s + z (a_i − s), s = Σ_{j≠i} a_j w_j / (1 − w_i)
            let rest: f64 = row
                .coeffs
                .iter()
                .zip(w)
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, (a, x))| a * x)
                .sum();
            let s = rest / (1.0 - wi);
            let slope = row.coeffs[i] - s;
            let scale = row.coeffs.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
            let tiny = 1e-13 * scale.max(1.0);
            let b = row.rhs;
            let mut upper = |bound: f64| hi = hi.min(bound);
            let (mut at_most, mut at_least) = (None, None);
            match row.dir {
                Direction::Le => at_most = Some(b),
                Direction::Ge => at_least = Some(b),
                Direction::Eq => {
                    at_most = Some(b);
                    at_least = Some(b);
                }
            }
            if let Some(b) = at_most {
                // s + slope z ≤ b
                if slope.abs() <= tiny {
                    if s > b + FEAS_EPS {
                        return Interval::empty();
                    }
                } else if slope > 0.0 {
                    upper((b - s) / slope);
                } else {
                    lo = lo.max((b - s) / slope);
                }
            }
            if let Some(b) = at_least {
                // s + slope z ≥ b
                if slope.abs() <= tiny {
                    if s < b - FEAS_EPS {
                        return Interval::empty();
                    }
                } else if slope > 0.0 {
                    lo = lo.max((b - s) / slope);
                } else {
                    upper((b - s) / slope);
                }
            }
        }
        // The current point belongs to the interval up to rounding slack.
        if lo > wi && lo - wi <= FEAS_EPS {
            lo = wi;
        }
        if hi < wi && wi - hi <= FEAS_EPS {
            hi = wi;
        }
        Interval::new(lo, hi)
    }

    /// The set of `t` with `w + t·d` in the region, for a direction with
    /// `Σ d = 0`. Always contains 0 up to rounding slack when `w` is feasible.
    pub fn direction_interval(&self, w: &[f64], d: &[f64]) -> Interval {
        assert!(w.len() == self.m && d.len() == self.m, "length mismatch");
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (&x, &dk) in w.iter().zip(d) {
            // x + t dk ≥ 0
            if dk > 0.0 {
                lo = lo.max(-x / dk);
            } else if dk < 0.0 {
                hi = hi.min(-x / dk);
            }
        }
        for row in &self.rows {
            let base = row.lhs(w);
            let slope = row.lhs(d);
            let scale = row.coeffs.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
            if slope.abs() <= 1e-13 * scale.max(1.0) {
                if !row.dir.holds(base, row.rhs, FEAS_EPS) {
                    return Interval::empty();
                }
                continue;
            }
            let edge = (row.rhs - base) / slope;
            let upper_side = match row.dir {
                Direction::Le => Some(slope > 0.0),
                Direction::Ge => Some(slope < 0.0),
                Direction::Eq => None,
            };
            match upper_side {
                Some(true) => hi = hi.min(edge),
                Some(false) => lo = lo.max(edge),
                None => {
                    lo = lo.max(edge);
                    hi = hi.min(edge);
                }
            }
        }
        if lo > 0.0 && lo <= FEAS_EPS {
            lo = 0.0;
        }
        if hi < 0.0 && hi >= -FEAS_EPS {
            hi = 0.0;
        }
        Interval::new(lo, hi)
    }

    fn program(&self, c: &[f64]) -> LinearProgram {
        let mut rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| (r.coeffs.clone(), r.dir, r.rhs))
            .collect();
        rows.push((vec![1.0; self.m], Direction::Eq, 1.0));
        LinearProgram {
            objective: c.to_vec(),
            rows,
        }
    }

    /// Maximises `cᵀw` over the region; returns a vertex and the value.
    pub fn lp_maximize(&self, c: &[f64]) -> Result<(Vec<f64>, f64)> {
        if c.len() != self.m {
            return Err(Error::Dimension(format!(
                "objective has {} entries for {} design points",
                c.len(),
                self.m
            )));
        }
        let sol = self.program(c).maximize()?;
        Ok((sol.x, sol.value))
    }

    /// Fails with [`Error::Infeasible`] when the region is empty.
    pub fn check_feasible(&self) -> Result<()> {
        self.lp_maximize(&vec![0.0; self.m]).map(|_| ())
    }

    /// A seeded point of the region: a Dirichlet(1) mixture of `m + 1` LP
    /// vertices found with random objectives.
    pub fn random_feasible(&self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.m + 1;
        let mut w = vec![0.0; self.m];
        let mut total = 0.0;
        for _ in 0..k {
            let c: Vec<f64> = (0..self.m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (v, _) = self.lp_maximize(&c)?;
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            let g = -u.ln();
            total += g;
            for (wj, vj) in w.iter_mut().zip(&v) {
                *wj += g * vj;
            }
        }
        for wj in w.iter_mut() {
            *wj = (*wj / total).max(0.0);
        }
        let s: f64 = w.iter().sum();
        for wj in w.iter_mut() {
            *wj /= s;
        }
        Ok(w)
    }
}
