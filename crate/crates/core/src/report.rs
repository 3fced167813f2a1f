//! Report objects for the command-line tool: human tables with four
//! significant digits, JSON with full precision.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::Result;
use crate::information::InformationSet;
use crate::numkernel::Matrix;
use crate::optimizer::OptimResult;
use crate::sim::RmseReport;

/// `x` rounded to four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..4).contains(&e) {
        format!("{:.*}", (3 - e).max(0) as usize, x)
    } else {
        format!("{x:.3e}")
    }
}

fn opt4(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), sig4)
}

/// Right-aligned columns under a header row.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let line: Vec<String> = r.iter().zip(&width).map(|(v, w)| format!("{v:>w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn vector_table(labels: &[String], name: &str, values: &[String]) -> String {
    let rows: Vec<Vec<String>> =
        labels.iter().zip(values).map(|(l, v)| vec![l.clone(), v.clone()]).collect();
    table(&["point".into(), name.into()], &rows)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serialises")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FisherReport {
    pub labels: Vec<String>,
    pub allocation: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub det: f64,
    pub singular: bool,
}

impl FisherReport {
    /// `F = Σ c_i F_i` for weights or counts `c`.
    pub fn new(info: &InformationSet, labels: Vec<String>, c: &[f64]) -> Result<Self> {
        let f = info.fisher(c)?;
        let raw = f.determinant().unwrap_or(0.0);
        // Hadamard: 0 ≤ |F| ≤ Π F_jj for positive semidefinite F
        let scale: f64 = (0..f.rows()).map(|j| f[(j, j)].abs()).product();
        let singular = raw.abs() <= 1e-12 * scale;
        Ok(FisherReport {
            labels,
            allocation: c.to_vec(),
            matrix: f.row_vecs(),
            det: if singular { 0.0 } else { raw },
            singular,
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("Fisher information matrix\n");
        let p = self.matrix.len();
        let header: Vec<String> = std::iter::once(String::new()).chain((1..=p).map(|j| format!("[,{j}]"))).collect();
        let rows: Vec<Vec<String>> = self
            .matrix
            .iter()
            .enumerate()
            .map(|(i, r)| std::iter::once(format!("[{}]", i + 1)).chain(r.iter().map(|&v| sig4(v))).collect())
            .collect();
        out.push_str(&table(&header, &rows));
        let _ = writeln!(out, "determinant: {}", sig4(self.det));
        if self.singular {
            out.push_str("warning: the information matrix is singular\n");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub criterion: String,
    pub constrained: bool,
    pub labels: Vec<String>,
    #[serde(flatten)]
    pub result: OptimResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation: Option<Vec<u64>>,
    /// Determinant at the exact allocation, at the model's own parameters.
    #[serde(rename = "det_maximum", skip_serializing_if = "Option::is_none")]
    pub det_maximum: Option<f64>,
}

impl OptimizeReport {
    pub fn to_table(&self) -> String {
        let r = &self.result;
        let mut out = String::from("Optimal sampling results\n");
        let _ = writeln!(
            out,
            "criterion: {}{}",
            self.criterion,
            if self.constrained { ", constrained" } else { "" }
        );
        let header = ["point", "w", "w0", "deriv"].map(String::from);
        let mut rows: Vec<Vec<String>> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| vec![l.clone(), sig4(r.w[i]), sig4(r.w0[i]), sig4(r.deriv[i])])
            .collect();
        if let Some(a) = &self.allocation {
            for (row, n) in rows.iter_mut().zip(a) {
                row.push(n.to_string());
            }
        }
        let mut header = header.to_vec();
        if self.allocation.is_some() {
            header.push("allocation".into());
        }
        out.push_str(&table(&header, &rows));
        let _ = writeln!(out, "maximum: {}", sig4(r.maximum));
        let _ = writeln!(out, "itmax: {}", r.itmax);
        let _ = writeln!(out, "convergence: {}", r.convergence);
        let _ = writeln!(out, "gmax: {}", opt4(r.gmax));
        let _ = writeln!(out, "reason: {}", r.reason);
        if let Some(d) = self.det_maximum {
            let _ = writeln!(out, "det.maximum: {}", sig4(d));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundReport {
    pub labels: Vec<String>,
    pub w: Vec<f64>,
    pub allocation: Vec<u64>,
    pub det: f64,
}

impl RoundReport {
    pub fn to_table(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| vec![l.clone(), sig4(self.w[i]), self.allocation[i].to_string()])
            .collect();
        let mut out = table(&["point", "w", "allocation"].map(String::from), &rows);
        let _ = writeln!(out, "det: {}", sig4(self.det));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformReport {
    pub labels: Vec<String>,
    pub allocation: Vec<u64>,
    /// Product of the positive counts.
    pub det_unif: f64,
}

impl UniformReport {
    pub fn to_table(&self) -> String {
        let values: Vec<String> = self.allocation.iter().map(u64::to_string).collect();
        let mut out = vector_table(&self.labels, "allocation", &values);
        let _ = writeln!(out, "det_unif: {}", self.det_unif);
        out
    }
}

pub fn simulation_table(report: &RmseReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "RMSE over {} replications (seed {})", report.replications, report.seed);
    for (s, counts) in &report.plans {
        if let Some(c) = counts {
            let c: Vec<String> = c.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{s} allocation: ({})", c.join(", "));
        }
    }
    let rows: Vec<Vec<String>> = report
        .summary()
        .into_iter()
        .map(|r| {
            vec![
                r.strategy.to_string(),
                r.group,
                opt4(r.mean),
                opt4(r.sd),
                r.fitted.to_string(),
                r.missing.to_string(),
            ]
        })
        .collect();
    out.push_str(&table(&["strategy", "group", "mean", "sd", "fitted", "missing"].map(String::from), &rows));
    out
}

/// Matrix entries row by row, for CSV output of a Fisher matrix.
pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_significant_digits() {
        assert_eq!(sig4(0.23500371), "0.2350");
        assert_eq!(sig4(-0.07833457), "-0.07833");
        assert_eq!(sig4(46.10121), "46.10");
        assert_eq!(sig4(2.8813258e-8), "2.881e-8");
        assert_eq!(sig4(1.6316382705915986e23), "1.632e23");
        assert_eq!(sig4(123456.0), "1.235e5");
        assert_eq!(sig4(0.0), "0");
    }

    #[test]
    fn singular_fisher_reports_zero() {
        let info = InformationSet::from_matrices(vec![
            Matrix::outer(&[1.0, 0.0]),
            Matrix::outer(&[1.0, 1.0]),
        ])
        .unwrap();
        let r = FisherReport::new(&info, vec!["a".into(), "b".into()], &[1.0, 0.0]).unwrap();
        assert!(r.singular);
        assert_eq!(r.det, 0.0);
        assert!(r.to_table().contains("singular"));
        let r = FisherReport::new(&info, vec!["a".into(), "b".into()], &[0.5, 0.5]).unwrap();
        assert!(!r.singular && (r.det - 0.25).abs() < 1e-15);
    }

    #[test]
    fn tables_align() {
        let t = table(&["a".into(), "bb".into()], &[vec!["123".into(), "4".into()]]);
        assert_eq!(t, "  a  bb\n123   4\n");
    }
}
