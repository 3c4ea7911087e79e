//! Dense complex helpers shared by the propagator code.
//!
//! Every square solve goes through [`Solver`], which equilibrates rows and
//! columns (Ruiz scaling) before a fully pivoted LU and carries a condition
//! estimate of the equilibrated matrix. Inverses are never formed explicitly.

use nalgebra::{DMatrix, DVector, Dyn, FullPivLU};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Real matrix from row-major values.
pub fn real_mat(n: usize, values: &[f64]) -> CMat {
    assert_eq!(values.len(), n * n);
    CMat::from_fn(n, n, |i, j| c(values[i * n + j], 0.0))
}

/// N×N block `(row, col)` of a 2N×2N matrix, with `row, col ∈ {0, 1}`.
pub fn block(m: &CMat, row: usize, col: usize) -> CMat {
    let n = m.nrows() / 2;
    m.view((row * n, col * n), (n, n)).into_owned()
}

pub fn assemble(b11: &CMat, b12: &CMat, b21: &CMat, b22: &CMat) -> CMat {
    let n = b11.nrows();
    let mut m = CMat::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(b11);
    m.view_mut((0, n), (n, n)).copy_from(b12);
    m.view_mut((n, 0), (n, n)).copy_from(b21);
    m.view_mut((n, n), (n, n)).copy_from(b22);
    m
}

/// `[left right]` side by side.
pub fn assemble_cols(left: &CMat, right: &CMat) -> CMat {
    assert_eq!(left.nrows(), right.nrows());
    let mut m = CMat::zeros(left.nrows(), left.ncols() + right.ncols());
    m.view_mut((0, 0), left.shape()).copy_from(left);
    m.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    m
}

/// Frobenius norm.
pub fn norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// ‖a − b‖ / max(‖b‖, floor).
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let scale = norm(b).max(f64::MIN_POSITIVE);
    norm(&(a - b)) / scale
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn sigma_min(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// 2-norm condition number (infinite for singular input).
pub fn condition(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Row and column scale factors such that `diag(r)·m·diag(c)` has every
/// non-zero row and column with max-magnitude close to one.
pub fn ruiz_scaling(m: &CMat) -> (Vec<f64>, Vec<f64>) {
    let (nr, nc) = m.shape();
    let mut r = vec![1.0; nr];
    let mut cs = vec![1.0; nc];
    let mut s = m.map(|z| z.norm());
    for _ in 0..24 {
        let mut changed = false;
        for i in 0..nr {
            let mx = (0..nc).fold(0.0f64, |a, j| a.max(s[(i, j)]));
            if mx > 0.0 && mx.is_finite() {
                let f = 1.0 / mx.sqrt();
                if (f - 1.0).abs() > 1e-3 {
                    changed = true;
                }
                r[i] *= f;
                for j in 0..nc {
                    s[(i, j)] *= f;
                }
            }
        }
        for j in 0..nc {
            let mx = (0..nr).fold(0.0f64, |a, i| a.max(s[(i, j)]));
            if mx > 0.0 && mx.is_finite() {
                let f = 1.0 / mx.sqrt();
                if (f - 1.0).abs() > 1e-3 {
                    changed = true;
                }
                cs[j] *= f;
                for i in 0..nr {
                    s[(i, j)] *= f;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (r, cs)
}

fn scale_rows_cols(m: &CMat, r: &[f64], cs: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (r[i] * cs[j]))
}

/// Condition number of the Ruiz-equilibrated matrix. Insensitive to the
/// unit choices that make e.g. piezoelectric coefficient matrices span
/// twenty orders of magnitude.
pub fn scaled_condition(m: &CMat) -> f64 {
    let (r, cs) = ruiz_scaling(m);
    condition(&scale_rows_cols(m, &r, &cs))
}

/// Equilibrated fully pivoted LU of a square matrix.
pub struct Solver {
    lu: FullPivLU<Complex64, Dyn, Dyn>,
    row: Vec<f64>,
    col: Vec<f64>,
    cond: f64,
    sigma_min: f64,
}

impl Solver {
    /// Factor `m`. Returns `None` only for non-finite or exactly singular input;
    /// callers compare [`Solver::cond`] against their own thresholds.
    pub fn new(m: &CMat) -> Option<Self> {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        if !all_finite(m) {
            return None;
        }
        let (row, col) = ruiz_scaling(m);
        let scaled = scale_rows_cols(m, &row, &col);
        let s = singular_values(&scaled);
        let smax = s.first().copied().unwrap_or(1.0);
        let smin = s.last().copied().unwrap_or(1.0);
        if !(smin > 0.0) {
            return None;
        }
        let lu = scaled.full_piv_lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self {
            lu,
            row,
            col,
            cond: smax / smin,
            sigma_min: sigma_min(m),
        })
    }

    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// Smallest singular value of the unscaled matrix.
    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    /// Solve `m·x = b`.
    pub fn solve(&self, b: &CMat) -> CMat {
        let rb = CMat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * self.row[i]);
        let y = self
            .lu
            .solve(&rb)
            .expect("factorization checked invertible at construction");
        CMat::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] * self.col[i])
    }
}

/// `m⁻¹·a` with the condition estimate of `m`; `Err(cond)` when `m` is
/// singular or its condition exceeds `max_cond`.
pub fn left_divide(m: &CMat, a: &CMat, max_cond: f64) -> Result<(CMat, f64), f64> {
    let s = Solver::new(m).ok_or(f64::INFINITY)?;
    if s.cond() > max_cond {
        return Err(s.cond());
    }
    Ok((s.solve(a), s.cond()))
}

/// `a·m⁻¹` via a solve with the transpose.
pub fn right_divide(a: &CMat, m: &CMat, max_cond: f64) -> Result<(CMat, f64), f64> {
    let (xt, cond) = left_divide(&m.transpose(), &a.transpose(), max_cond)?;
    Ok((xt.transpose(), cond))
}

pub fn det(m: &CMat) -> Complex64 {
    if m.is_empty() {
        return ONE;
    }
    m.clone().determinant()
}

/// Column vector from complex entries.
pub fn cvec(values: &[Complex64]) -> CVec {
    CVec::from_column_slice(values)
}
