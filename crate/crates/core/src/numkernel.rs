//! Small dense linear algebra and univariate polynomials.
//!
//! Everything here is sized for design problems: matrices of a few dozen rows
//! at most, polynomials of degree equal to the parameter count.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a matrix is treated as singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Dense row-major matrix of finite reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "matrix entry ({}, {}) is not finite",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Matrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// The rank-one matrix `x xᵀ`.
    pub fn outer(x: &[f64]) -> Self {
        let n = x.len();
        let mut data = Vec::with_capacity(n * n);
        for a in x {
            for b in x {
                data.push(a * b);
            }
        }
        Matrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} against {} columns",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Matrix, scale: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} to {}x{}",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scaled(&self, scale: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * scale).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Determinant by LU factorisation with partial pivoting.
    ///
    /// Returns exactly `0.0` once a pivot drops below
    /// [`PIVOT_TOLERANCE`] times the largest initial row norm.
    pub fn determinant(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "determinant of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(1.0);
        }
        let mut a = self.data.clone();
        let tol = PIVOT_TOLERANCE * self.max_row_norm();
        if tol == 0.0 {
            return Ok(0.0);
        }
        let mut det = 1.0;
        for k in 0..n {
            let (piv, piv_abs) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs < tol {
                return Ok(0.0);
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for r in k + 1..n {
                let factor = a[r * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for c in k + 1..n {
                    a[r * n + c] -= factor * a[k * n + c];
                }
            }
        }
        Ok(det)
    }

    /// Solves `self · X = rhs` for `X`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::Dimension(format!(
                "solve with non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, system has {}",
                rhs.rows, self.rows
            )));
        }
        let n = self.rows;
        let k_cols = rhs.cols;
        let mut a = self.data.clone();
        let mut b = rhs.data.clone();
        let tol = PIVOT_TOLERANCE * self.max_row_norm();
        for k in 0..n {
            let (piv, piv_abs) = (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs <= tol {
                return Err(Error::Singular { pivot: k });
            }
            if piv != k {
                for c in 0..n {
                    a.swap(k * n + c, piv * n + c);
                }
                for c in 0..k_cols {
                    b.swap(k * k_cols + c, piv * k_cols + c);
                }
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let factor = a[r * n + k] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for c in k + 1..n {
                    a[r * n + c] -= factor * a[k * n + c];
                }
                for c in 0..k_cols {
                    b[r * k_cols + c] -= factor * b[k * k_cols + c];
                }
            }
        }
        for k in (0..n).rev() {
            let pivot = a[k * n + k];
            for c in 0..k_cols {
                let mut s = b[k * k_cols + c];
                for j in k + 1..n {
                    s -= a[k * n + j] * b[j * k_cols + c];
                }
                b[k * k_cols + c] = s / pivot;
            }
        }
        Ok(Matrix {
            rows: n,
            cols: k_cols,
            data: b,
        })
    }

    fn max_row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let cells: Vec<String> = self.row(r).iter().map(|v| format!("{v:>12.8}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Free-function form of [`Matrix::determinant`].
pub fn determinant(m: &Matrix) -> Result<f64> {
    m.determinant()
}

/// Free-function form of [`Matrix::solve`].
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.solve(b)
}

/// Real polynomial with coefficients in ascending degree order.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree after discarding exactly-zero leading coefficients; `None` for
    /// the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| *c != 0.0)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// Real roots inside `[lo, hi]`, ascending.
    ///
    /// Critical points of the polynomial (roots of its derivative, found
    /// recursively) split the interval into monotone pieces; each piece with a
    /// sign change holds exactly one root, located by bisection.
    pub fn real_roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let Some(deg) = self.degree() else {
            return Vec::new();
        };
        let c = &self.coeffs;
        match deg {
            0 => Vec::new(),
            1 => {
                let r = -c[0] / c[1];
                if r >= lo && r <= hi {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let mut breaks = vec![lo];
                breaks.extend(self.derivative().real_roots_in(lo, hi));
                breaks.push(hi);
                let mut roots: Vec<f64> = Vec::new();
                let push = |r: f64, roots: &mut Vec<f64>| {
                    if roots.last().is_none_or(|last| r - last > 1e-14 * (1.0 + r.abs())) {
                        roots.push(r);
                    }
                };
                for w in breaks.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let (fa, fb) = (self.eval(a), self.eval(b));
                    if fa == 0.0 {
                        push(a, &mut roots);
                    } else if fa.signum() != fb.signum() && fb != 0.0 {
                        push(self.bisect(a, b, fa), &mut roots);
                    }
                }
                if self.eval(hi) == 0.0 {
                    push(hi, &mut roots);
                }
                roots
            }
        }
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = self.eval(mid);
            if fm == 0.0 {
                return mid;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

/// Interpolating polynomial through `points`, in monomial form.
pub fn fit_polynomial(points: &[(f64, f64)]) -> Result<Polynomial> {
    let n = points.len();
    if n == 0 {
        return Ok(Polynomial::new(vec![0.0]));
    }
    for i in 0..n {
        for j in i + 1..n {
            if points[i].0 == points[j].0 {
                return Err(Error::DuplicateAbscissa(points[i].0));
            }
        }
    }
    // Newton divided differences, in place.
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut dd: Vec<f64> = points.iter().map(|p| p.1).collect();
    for level in 1..n {
        for i in (level..n).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (xs[i] - xs[i - level]);
        }
    }
    // Nested multiplication: p = dd0 + (x - x0)(dd1 + (x - x1)(...)).
    let mut coeffs = vec![dd[n - 1]];
    for k in (0..n - 1).rev() {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (d, c) in coeffs.iter().enumerate() {
            next[d + 1] += c;
            next[d] -= xs[k] * c;
        }
        next[0] += dd[k];
        coeffs = next;
    }
    Ok(Polynomial::new(coeffs))
}

/// Global maximum of `poly` over `[lo, hi]`; ties go to the smallest abscissa.
pub fn maximize_on_interval(poly: &Polynomial, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(Error::EmptyInterval { lo, hi });
    }
    let mut candidates = vec![lo];
    candidates.extend(
        poly.derivative()
            .real_roots_in(lo, hi)
            .into_iter()
            .filter(|z| *z > lo && *z < hi),
    );
    candidates.push(hi);
    let mut best = (lo, poly.eval(lo));
    for z in candidates {
        let v = poly.eval(z);
        if v > best.1 {
            best = (z, v);
        }
    }
    Ok(best)
}

/// `n` Chebyshev nodes of the first kind mapped onto `[lo, hi]`, ascending.
pub fn chebyshev_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    (0..n)
        .rev()
        .map(|k| {
            let theta = std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64;
            mid + half * theta.cos()
        })
        .collect()
}
