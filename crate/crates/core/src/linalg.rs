//! Dense complex matrix kernel.
//!
//! [`CMatrix`] is a small row-major container over [`Complex64`] with the
//! handful of operations the analysis modules need. Transposition comes in
//! two flavours: [`CMatrix::transpose`] is the plain (non-conjugating)
//! transpose under which admittance matrices are symmetric, while
//! [`CMatrix::conj_transpose`] is only used internally by the condition
//! estimator.
//!
//! Factorizations: a partial-pivoted LU ([`Lu`]) is implemented here; singular
//! values are delegated to `nalgebra`'s SVD.

use std::fmt;
use std::ops::Index;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Unit roundoff of binary64.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Largest 1-norm condition number at which an `n×n` matrix still counts as
/// invertible: `1/(n·ε)` with `ε = 2⁻⁵²`.
pub fn invertibility_limit(n: usize) -> f64 {
    1.0 / (n.max(1) as f64 * f64::EPSILON)
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix stored row-major. Entries are always finite.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Structural(format!(
                "non-finite entry at ({}, {})",
                k / cols.max(1),
                k % cols.max(1)
            )));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    /// Builds from real entries; convenient in tests and for the incidence lift.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let lifted: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&lifted)
    }

    /// Panics if `f` produces a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_row_major(rows, cols, data).expect("from_fn produced a non-finite entry")
    }

    pub fn column_vector(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), 1, |i, _| v[i])
    }

    pub fn diagonal(d: &[Complex64]) -> Self {
        Self::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { ZERO })
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

    /// Row-major view of the entries.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub(crate) fn get_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self·rhs` with every entry accumulated in double-double and rounded
    /// once.
    pub fn matmul_accurate(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(CMatrix::from_fn(self.rows, rhs.cols, |i, j| {
            self.compensated_dot(rhs, i, j, ZERO, ONE)
        }))
    }

    /// `I − self·rhs`, accumulated like [`CMatrix::matmul_accurate`].
    pub fn identity_defect(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows || self.rows != rhs.cols {
            return Err(Error::Dimension(format!(
                "identity defect needs a square product, got {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(CMatrix::from_fn(self.rows, rhs.cols, |i, j| {
            let start = if i == j { ONE } else { ZERO };
            self.compensated_dot(rhs, i, j, start, -ONE)
        }))
    }

    /// `start + sign·Σ_k self[i,k]·rhs[k,j]` for real `sign = ±1`.
    fn compensated_dot(&self, rhs: &CMatrix, i: usize, j: usize, start: Complex64, sign: Complex64) -> Complex64 {
        let mut re = Compensated::new(start.re);
        let mut im = Compensated::new(start.im);
        for k in 0..self.cols {
            let a = sign.re * self.data[i * self.cols + k];
            let b = rhs.data[k * rhs.cols + j];
            re.add_product(a.re, b.re);
            re.add_product(-a.im, b.im);
            im.add_product(a.re, b.im);
            im.add_product(a.im, b.re);
        }
        Complex64::new(re.value(), im.value())
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn zip_with(&self, rhs: &CMatrix, op: &str, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<CMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "cannot {op} {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, rhs: &CMatrix) -> Result<CMatrix> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &CMatrix) -> Result<CMatrix> {
        self.zip_with(rhs, "subtract", |a, b| a - b)
    }

    pub fn negate(&self) -> CMatrix {
        self.scale(-ONE)
    }

    pub fn scale(&self, s: Complex64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Submatrix picking the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// `‖self − other‖_F / max(‖other‖_F, tiny)`.
    pub fn relative_distance(&self, other: &CMatrix) -> Result<f64> {
        let diff = self.sub(other)?.frobenius_norm();
        Ok(diff / other.frobenius_norm().max(f64::MIN_POSITIVE))
    }

    /// Relative asymmetry `‖M − Mᵀ‖_F / ‖M‖_F` under the plain transpose.
    pub fn symmetry_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut diff = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                diff += (self[(i, j)] - self[(j, i)]).norm_sqr();
            }
        }
        diff.sqrt() / self.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    pub fn row_sums(&self) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<Complex64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)]).sum())
            .collect()
    }

    /// Places `block` with its top-left corner at `(r0, c0)`.
    pub fn write_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                *self.get_mut(r0 + i, c0 + j) = block[(i, j)];
            }
        }
    }

    fn to_nalgebra(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Double-double accumulator (TwoSum and FMA-based TwoProduct).
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn new(x: f64) -> Self {
        Compensated { hi: x, lo: 0.0 }
    }

    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (x - bb);
        self.hi = s;
        self.lo += err;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.lo += a.mul_add(b, -p);
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Tolerance policy for [`numerical_rank`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TolPolicy {
    /// `max(rows, cols) · σ_max · u` with `u` the unit roundoff.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub rank: usize,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
}

impl RankResult {
    /// Ratio `σ_rank / σ_{rank+1}`; `None` when either side of the gap does
    /// not exist. An exactly zero trailing value gives infinity.
    pub fn gap(&self) -> Option<f64> {
        if self.rank == 0 || self.rank >= self.singular_values.len() {
            return None;
        }
        let above = self.singular_values[self.rank - 1];
        let below = self.singular_values[self.rank];
        Some(if below == 0.0 { f64::INFINITY } else { above / below })
    }
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    if m.rows == 0 || m.cols == 0 {
        return Ok(Vec::new());
    }
    let max_iter = 100 * m.rows.max(m.cols).max(10);
    let svd = m
        .to_nalgebra()
        .try_svd(false, false, f64::EPSILON, max_iter)
        .ok_or(Error::SvdNotConverged { iterations: max_iter })?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Numerical rank: the number of singular values above the tolerance.
///
/// The auto tolerance is `max(rows, cols)·σ_max·ε` with `ε = 2⁻⁵²`, the
/// machine epsilon (twice the unit roundoff).
pub fn numerical_rank(m: &CMatrix, policy: TolPolicy) -> Result<RankResult> {
    let singular_values = singular_values(m)?;
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let tolerance_used = match policy {
        TolPolicy::Auto => m.rows.max(m.cols) as f64 * sigma_max * f64::EPSILON,
        TolPolicy::Fixed(t) => t.max(0.0),
    };
    let rank = singular_values.iter().filter(|&&s| s > tolerance_used).count();
    Ok(RankResult {
        rank,
        singular_values,
        tolerance_used,
    })
}

/// Partial-pivoted LU factorization `P·A = L·U` of a square matrix.
///
/// `L` is unit lower triangular and shares storage with `U`.
#[derive(Debug, Clone)]
pub struct Lu {
    factors: CMatrix,
    /// Row `i` of `P·A` is row `perm[i]` of `A`.
    perm: Vec<usize>,
    norm_one: f64,
}

impl Lu {
    /// Fails with [`Error::Singular`] on an exactly zero pivot.
    pub fn factor(a: &CMatrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        let n = a.rows;
        let mut f = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot_abs) =
                (k..n)
                    .map(|i| (i, f[(i, k)].norm()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs == 0.0 {
                return Err(Error::Singular { pivot: k });
            }
            if p != k {
                for j in 0..n {
                    f.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = f[(k, k)];
            for i in k + 1..n {
                let l = f[(i, k)] / pivot;
                *f.get_mut(i, k) = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = f[(k, j)];
                    *f.get_mut(i, j) -= l * u;
                }
            }
        }
        Ok(Lu {
            factors: f,
            perm,
            norm_one: a.norm_one(),
        })
    }

    pub fn dim(&self) -> usize {
        self.factors.rows
    }

    fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let f = &self.factors;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= f[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= f[(i, j)] * x[j];
            }
            x[i] = s / f[(i, i)];
        }
        x
    }

    /// Solves `Aᴴ·x = b`.
    fn solve_conj_transpose_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let f = &self.factors;
        // Uᴴ w = b
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for j in 0..i {
                s -= f[(j, i)].conj() * w[j];
            }
            w[i] = s / f[(i, i)].conj();
        }
        // Lᴴ z = w
        for i in (0..n).rev() {
            let mut s = w[i];
            for j in i + 1..n {
                s -= f[(j, i)].conj() * w[j];
            }
            w[i] = s;
        }
        let mut x = vec![ZERO; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// Solves `A·X = B` column by column.
    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        if b.rows != self.dim() {
            return Err(Error::Dimension(format!(
                "right-hand side has {} rows, system has {}",
                b.rows,
                self.dim()
            )));
        }
        let mut x = CMatrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let col = self.solve_vec(&b.column(j));
            for (i, v) in col.into_iter().enumerate() {
                *x.get_mut(i, j) = v;
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve(&CMatrix::identity(self.dim()))
            .expect("identity has matching dimension")
    }

    /// Inverse of `a` (the factored matrix) after one Newton step
    /// `X ← X + (I − X·a)·X` with the defect computed in double-double.
    pub fn refined_inverse(&self, a: &CMatrix) -> Result<CMatrix> {
        if a.rows != self.dim() || a.cols != self.dim() {
            return Err(Error::Dimension(format!(
                "factor is {n}x{n}, matrix is {}x{}",
                a.rows,
                a.cols,
                n = self.dim()
            )));
        }
        let x = self.inverse();
        let r = x.identity_defect(a)?;
        x.add(&r.matmul(&x)?)
    }

    /// Estimate of `‖A⁻¹‖₁` by Hager's method with Higham's refinements.
    fn inverse_norm_one_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut estimate = 0.0;
        for iter in 0..5 {
            let y = self.solve_vec(&x);
            let y_norm: f64 = y.iter().map(|z| z.norm()).sum();
            if iter > 0 && y_norm <= estimate {
                break;
            }
            estimate = y_norm;
            let sign: Vec<Complex64> = y
                .iter()
                .map(|z| if z.norm() == 0.0 { ONE } else { z / z.norm() })
                .collect();
            let z = self.solve_conj_transpose_vec(&sign);
            let (j, z_max) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if iter > 0 && z_max <= ztx {
                break;
            }
            x = vec![ZERO; n];
            x[j] = ONE;
        }
        // Alternating-sign probe guards against the known failure cases.
        let alt: Vec<Complex64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let mag = if n > 1 { 1.0 + i as f64 / (n - 1) as f64 } else { 1.0 };
                Complex64::new(sign * mag, 0.0)
            })
            .collect();
        let alt_est = 2.0 * self.solve_vec(&alt).iter().map(|z| z.norm()).sum::<f64>() / (3.0 * n as f64);
        estimate.max(alt_est)
    }

    /// Estimate of the 1-norm condition number `‖A‖₁·‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        self.norm_one * self.inverse_norm_one_estimate()
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: CMatrix,
    /// `‖A·X − B‖_F / max(‖B‖_F, tiny)`, measured after the solve.
    pub relative_residual: f64,
    pub condition_estimate: f64,
}

pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Result<SolveResult> {
    let lu = Lu::factor(a)?;
    let solution = lu.solve(b)?;
    let residual = a.matmul(&solution)?.sub(b)?.frobenius_norm();
    Ok(SolveResult {
        relative_residual: residual / b.frobenius_norm().max(f64::MIN_POSITIVE),
        condition_estimate: lu.condition_estimate(),
        solution,
    })
}
