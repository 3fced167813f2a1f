//! Dense two-phase simplex method with Bland's anti-cycling rule.
//!
//! Solves `max cᵀx` subject to `A x {≤,=,≥} b`, `x ≥ 0`. Problems here have a
//! few dozen variables at most, so a full tableau is the simplest correct
//! choice and pivots are exact vertex moves.

use crate::error::{Error, Result};

use super::Direction;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Direction, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (k, row) in self.t.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[c];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Maximises `cost · x` over columns not in `banned`, from the current
    /// basic feasible solution.
    fn optimize(&mut self, cost: &[f64], banned: &[bool]) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            // Bland: first improving column.
            let entering = (0..self.cols).find(|&j| {
                if banned[j] || self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = self
                    .basis
                    .iter()
                    .enumerate()
                    .map(|(r, &b)| cost[b] * self.t[r][j])
                    .sum();
                cost[j] - z > COST_EPS
            });
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-14
                                || (ratio <= lratio + 1e-14 && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(r, c);
        }
        Err(Error::Unsupported("simplex pivot limit reached".into()))
    }

    fn value(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b] * self.rhs(r))
            .sum()
    }
}

impl LinearProgram {
    pub fn maximize(&self) -> Result<LpSolution> {
        let n = self.objective.len();
        for (k, (a, _, b)) in self.rows.iter().enumerate() {
            if a.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint {k} has {} coefficients for {n} variables",
                    a.len()
                )));
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("constraint {k} is not finite")));
            }
        }

        // Normalise to nonnegative right-hand sides.
        let rows: Vec<(Vec<f64>, Direction, f64)> = self
            .rows
            .iter()
            .map(|(a, d, b)| {
                if *b < 0.0 {
                    (a.iter().map(|v| -v).collect(), d.flipped(), -b)
                } else {
                    (a.clone(), *d, *b)
                }
            })
            .collect();

        let n_slack = rows.iter().filter(|r| r.1 != Direction::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Direction::Le).count();
        let cols = n + n_slack + n_art;
        let mut t = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let mut is_art = vec![false; cols];
        let (mut s_idx, mut a_idx) = (n, n + n_slack);
        for (a, d, b) in &rows {
            let mut row = vec![0.0; cols + 1];
            row[..n].copy_from_slice(a);
            row[cols] = *b;
            match d {
                Direction::Le => {
                    row[s_idx] = 1.0;
                    basis.push(s_idx);
                    s_idx += 1;
                }
                Direction::Ge => {
                    row[s_idx] = -1.0;
                    s_idx += 1;
                    row[a_idx] = 1.0;
                    is_art[a_idx] = true;
                    basis.push(a_idx);
                    a_idx += 1;
                }
                Direction::Eq => {
                    row[a_idx] = 1.0;
                    is_art[a_idx] = true;
                    basis.push(a_idx);
                    a_idx += 1;
                }
            }
            t.push(row);
        }
        let mut tab = Tableau { t, basis, cols };

        if n_art > 0 {
            let phase1: Vec<f64> = is_art.iter().map(|&a| if a { -1.0 } else { 0.0 }).collect();
            tab.optimize(&phase1, &vec![false; cols])?;
            let infeas = -tab.value(&phase1);
            let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
            if infeas > 1e-9 * scale {
                return Err(Error::Infeasible { residual: infeas });
            }
            // Drive zero-level artificials out of the basis; drop redundant rows.
            let mut r = 0;
            while r < tab.t.len() {
                if is_art[tab.basis[r]] {
                    match (0..cols).find(|&j| !is_art[j] && tab.t[r][j].abs() > 1e-9) {
                        Some(c) => {
                            tab.pivot(r, c);
                            r += 1;
                        }
                        None => {
                            tab.t.remove(r);
                            tab.basis.remove(r);
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.objective);
        tab.optimize(&cost, &is_art)?;

        let mut x = vec![0.0; n];
        for (r, &b) in tab.basis.iter().enumerate() {
            if b < n {
                x[b] = tab.rhs(r).max(0.0);
            }
        }
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, value })
    }
}
