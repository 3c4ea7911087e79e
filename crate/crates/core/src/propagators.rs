//! Single-layer propagators and conversions between them.
//!
//! Mode ordering everywhere is plus modes first, then minus modes, so
//! `Q0 = [[F0+, F0-], [A0+, A0-]]`. A layer spans `[z0, z0 + d]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MslError, Result};
use crate::linalg::{self, assemble, block, c, CMat, Solver, I, ONE};
use crate::medium::MslCoefficients;
use crate::qep::{solve_qep, Mode, ModeBasis};

/// Largest exponent whose exponential is representable.
pub fn overflow_exponent() -> f64 {
    f64::MAX.ln()
}

/// Condition number above which a mode basis is rejected.
pub const BASIS_COND_LIMIT: f64 = 1e12;
/// Condition number above which the stable E (and compliance) constructions fail.
pub const STIFFNESS_COND_LIMIT: f64 = 1e12;
/// Condition number above which a block counts as singular in a conversion.
pub const SINGULAR_COND_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Q,
    T,
    H,
    HInv,
    E,
    Compliance,
    K,
    S,
    X,
    Y,
    Z,
    R,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Condition estimate of the matrix solved against during construction.
    pub cond: Option<f64>,
    /// |det T − exp(d·tr M)| for transfer matrices (|det T − 1| when P + Y = 0).
    pub det_drift: Option<f64>,
}

/// A 2N×2N matrix tagged with what it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub variant: Variant,
    pub n: usize,
    pub data: CMat,
    pub diagnostics: Diagnostics,
}

#[derive(Serialize)]
struct BlockMatrixJson<'a> {
    variant: Variant,
    n: usize,
    data: Vec<Vec<[f64; 2]>>,
    diagnostics: &'a Diagnostics,
}

impl BlockMatrix {
    pub fn new(variant: Variant, data: CMat) -> Result<Self> {
        if data.nrows() != data.ncols() || !data.nrows().is_multiple_of(2) {
            return Err(MslError::Dimension(format!(
                "block matrix must be 2N x 2N, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self {
            variant,
            n: data.nrows() / 2,
            data,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn from_blocks(variant: Variant, b11: &CMat, b12: &CMat, b21: &CMat, b22: &CMat) -> Self {
        Self {
            variant,
            n: b11.nrows(),
            data: assemble(b11, b12, b21, b22),
            diagnostics: Diagnostics::default(),
        }
    }

    fn with_cond(mut self, cond: f64) -> Self {
        self.diagnostics.cond = Some(cond);
        self
    }

    /// Block `(row, col)` with 1-based indices as in `M11 … M22`.
    pub fn block(&self, row: usize, col: usize) -> CMat {
        assert!((1..=2).contains(&row) && (1..=2).contains(&col));
        block(&self.data, row - 1, col - 1)
    }

    pub fn b11(&self) -> CMat {
        self.block(1, 1)
    }
    pub fn b12(&self) -> CMat {
        self.block(1, 2)
    }
    pub fn b21(&self) -> CMat {
        self.block(2, 1)
    }
    pub fn b22(&self) -> CMat {
        self.block(2, 2)
    }

    pub fn is_finite(&self) -> bool {
        linalg::all_finite(&self.data)
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.data)
    }

    /// Row-major `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(BlockMatrixJson {
            variant: self.variant,
            n: self.n,
            data: crate::structure::matrix_to_pairs(&self.data),
            diagnostics: &self.diagnostics,
        })
        .expect("block matrix serializes")
    }

    fn expect_variant(&self, allowed: &[Variant], op: &str) -> Result<()> {
        if allowed.contains(&self.variant) {
            Ok(())
        } else {
            Err(MslError::UnsupportedVariant(format!("{op} does not accept {}", self.variant)))
        }
    }
}

/// `[[0, I], [I, 0]]`, the value of H at zero thickness and the S identity.
pub fn antidiagonal_identity(n: usize) -> CMat {
    let z = linalg::zeros(n);
    let i = linalg::identity(n);
    assemble(&z, &i, &i, &z)
}

/// Where each mode's exponential equals one.
#[derive(Debug, Clone, PartialEq)]
pub enum Referencing {
    /// Every mode referenced at the evaluation point (a reduced base).
    Reduced,
    /// One reference coordinate per mode, plus modes first.
    Points(Vec<f64>),
}

fn mode_column(mode: &Mode, phase: Complex64) -> Vec<Complex64> {
    mode.f0.iter().chain(mode.a0.iter()).map(|v| v * phase).collect()
}

/// Columns `(F_j(z); A_j(z))` with `F_j(z) = f0_j exp(i k_j (z − r_j))`.
pub fn q_matrix(basis: &ModeBasis, z: f64, referencing: &Referencing) -> Result<BlockMatrix> {
    let n = basis.n();
    let refs: Vec<f64> = match referencing {
        Referencing::Reduced => vec![z; 2 * n],
        Referencing::Points(p) if p.len() == 2 * n => p.clone(),
        Referencing::Points(p) => {
            return Err(MslError::Dimension(format!("{} reference points for {} modes", p.len(), 2 * n)))
        }
    };
    let mut q = CMat::zeros(2 * n, 2 * n);
    for (j, mode) in basis.modes().enumerate() {
        let exponent = I * mode.k * (z - refs[j]);
        if exponent.re > overflow_exponent() {
            return Err(MslError::Overflow {
                omega_d: exponent.re,
                layer: None,
            });
        }
        for (i, v) in mode_column(mode, exponent.exp()).into_iter().enumerate() {
            q[(i, j)] = v;
        }
    }
    let cond = linalg::scaled_condition(&q);
    if !(cond <= BASIS_COND_LIMIT) {
        return Err(MslError::IllConditioned {
            what: "mode basis Q".into(),
            cond,
        });
    }
    Ok(BlockMatrix::new(Variant::Q, q)?.with_cond(cond))
}

fn exp_diag(ks: &[Complex64], d: f64) -> Vec<Complex64> {
    ks.iter().map(|k| (I * k * d).exp()).collect()
}

fn scale_columns(m: &CMat, s: &[Complex64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s[j])
}

/// exp(d·tr M) with M the first-order system matrix, i.e. exp(−d·tr(B⁻¹(P+Y))).
pub fn liouville_determinant(m: &MslCoefficients, d: f64) -> Complex64 {
    let py = &m.p + &m.y;
    if py.iter().all(|z| *z == linalg::ZERO) {
        return ONE;
    }
    match linalg::left_divide(&m.b, &py, f64::INFINITY) {
        Ok((x, _)) => (-x.trace() * d).exp(),
        Err(_) => c(f64::NAN, f64::NAN),
    }
}

fn check_overflow(basis: &ModeBasis, d: f64) -> Result<()> {
    let omega_d = basis.max_abs_im_k() * d.abs();
    if omega_d > overflow_exponent() {
        Err(MslError::Overflow { omega_d, layer: None })
    } else {
        Ok(())
    }
}

fn reduced_q0(basis: &ModeBasis) -> Result<(CMat, Solver)> {
    let q0 = q_matrix(basis, 0.0, &Referencing::Reduced)?.data;
    let solver = Solver::new(&q0).ok_or(MslError::IllConditioned {
        what: "mode basis Q".into(),
        cond: f64::INFINITY,
    })?;
    Ok((q0, solver))
}

/// `T(d) = Q0 Π(d) Q0⁻¹`, mapping `(F, A)` at `z0` to `(F, A)` at `z0 + d`.
/// Negative `d` gives the inverse propagator.
pub fn t_from_basis(basis: &ModeBasis, d: f64) -> Result<BlockMatrix> {
    check_overflow(basis, d)?;
    let ks: Vec<Complex64> = basis.modes().map(|m| m.k).collect();
    let (q0, solver) = reduced_q0(basis)?;
    let q_pi = scale_columns(&q0, &exp_diag(&ks, d));
    // T = (Q0 Π) Q0⁻¹, solved as (Q0ᵀ)⁻¹ (Q0 Π)ᵀ
    let (t, _) = linalg::right_divide(&q_pi, &q0, f64::INFINITY).map_err(|cond| MslError::IllConditioned {
        what: "mode basis Q".into(),
        cond,
    })?;
    if !linalg::all_finite(&t) {
        return Err(MslError::Overflow {
            omega_d: basis.max_abs_im_k() * d.abs(),
            layer: None,
        });
    }
    let drift = (linalg::det(&t) - liouville_determinant(&basis.medium, d)).norm();
    let mut out = BlockMatrix::new(Variant::T, t)?.with_cond(solver.cond());
    out.diagnostics.det_drift = Some(drift);
    Ok(out)
}

pub fn t_single(m: &MslCoefficients, d: f64) -> Result<BlockMatrix> {
    t_from_basis(&solve_qep(m)?, d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaBlocks {
    pub g11: CMat,
    pub g12: CMat,
    pub g21: CMat,
    pub g22: CMat,
}

fn singular(what: &str) -> impl Fn(f64) -> MslError + '_ {
    move |cond| MslError::SingularBlock {
        what: what.to_string(),
        cond,
    }
}

/// `x · m⁻¹` treating `m` as singular beyond [`SINGULAR_COND_LIMIT`].
fn rdiv(x: &CMat, m: &CMat, what: &str) -> Result<CMat> {
    Ok(linalg::right_divide(x, m, SINGULAR_COND_LIMIT).map_err(singular(what))?.0)
}

/// `m⁻¹ · x`.
fn ldiv(m: &CMat, x: &CMat, what: &str) -> Result<CMat> {
    Ok(linalg::left_divide(m, x, SINGULAR_COND_LIMIT).map_err(singular(what))?.0)
}

/// T blocks assembled from the N×N Schur-type combinations of the mode basis.
pub fn t_partitions(basis: &ModeBasis, d: f64) -> Result<([CMat; 4], GammaBlocks)> {
    check_overflow(basis, d)?;
    let (fp, fm, ap, am) = (basis.f0_plus(), basis.f0_minus(), basis.a0_plus(), basis.a0_minus());
    let g11 = &fp - &fm * ldiv(&am, &ap, "A0-")?;
    let g12 = &fm - &fp * ldiv(&ap, &am, "A0+")?;
    let g21 = &ap - &am * ldiv(&fm, &fp, "F0-")?;
    let g22 = &am - &ap * ldiv(&fp, &fm, "F0+")?;
    let pp = exp_diag(&basis.k_plus(), d);
    let pm = exp_diag(&basis.k_minus(), d);
    let id = linalg::identity(basis.n());
    let (i11, i12, i21, i22) = (
        ldiv(&g11, &id, "gamma11")?,
        ldiv(&g12, &id, "gamma12")?,
        ldiv(&g21, &id, "gamma21")?,
        ldiv(&g22, &id, "gamma22")?,
    );
    let (fpp, fmp) = (scale_columns(&fp, &pp), scale_columns(&fm, &pm));
    let (app, amp) = (scale_columns(&ap, &pp), scale_columns(&am, &pm));
    let t11 = &fpp * &i11 + &fmp * &i12;
    let t12 = &fpp * &i21 + &fmp * &i22;
    let t21 = &app * &i11 + &amp * &i12;
    let t22 = &app * &i21 + &amp * &i22;
    Ok(([t11, t12, t21, t22], GammaBlocks { g11, g12, g21, g22 }))
}

/// `H = [[−T11⁻¹T12, T11⁻¹], [T22 − T21T11⁻¹T12, T21T11⁻¹]]`.
pub fn h_from_t(t: &BlockMatrix) -> Result<BlockMatrix> {
    t.expect_variant(&[Variant::T], "h_from_t")?;
    let (t11, t12, t21, t22) = (t.b11(), t.b12(), t.b21(), t.b22());
    let n = t.n;
    let solver = Solver::new(&t11).ok_or_else(|| singular("T11")(f64::INFINITY))?;
    if solver.cond() > SINGULAR_COND_LIMIT {
        return Err(singular("T11")(solver.cond()));
    }
    let inv_t12 = solver.solve(&t12);
    let inv = solver.solve(&linalg::identity(n));
    let t21_inv = rdiv(&t21, &t11, "T11")?;
    let h = BlockMatrix::from_blocks(Variant::H, &(-&inv_t12), &inv, &(&t22 - &t21 * &inv_t12), &t21_inv);
    Ok(h.with_cond(solver.cond()))
}

/// `E = [[−T12⁻¹T11, T12⁻¹], [T21 − T22T12⁻¹T11, T22T12⁻¹]]`.
pub fn e_from_t(t: &BlockMatrix) -> Result<BlockMatrix> {
    t.expect_variant(&[Variant::T], "e_from_t")?;
    let (t11, t12, t21, t22) = (t.b11(), t.b12(), t.b21(), t.b22());
    let n = t.n;
    let solver = Solver::new(&t12).ok_or_else(|| singular("T12")(f64::INFINITY))?;
    if solver.cond() > SINGULAR_COND_LIMIT {
        return Err(singular("T12")(solver.cond()));
    }
    let inv_t11 = solver.solve(&t11);
    let inv = solver.solve(&linalg::identity(n));
    let t22_inv = rdiv(&t22, &t12, "T12")?;
    let e = BlockMatrix::from_blocks(Variant::E, &(-&inv_t11), &inv, &(&t21 - &t22 * &inv_t11), &t22_inv);
    Ok(e.with_cond(solver.cond()))
}

/// Field and linear-form rows at both faces of a layer, with plus modes
/// referenced at `z0` and minus modes at `z0 + d` so every exponential has
/// modulus at most one.
struct FaceRows {
    f_left: CMat,
    a_left: CMat,
    f_right: CMat,
    a_right: CMat,
}

fn face_rows(basis: &ModeBasis, d: f64) -> Result<FaceRows> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(MslError::InvalidInput(format!("layer thickness must be finite and non-negative, got {d}")));
    }
    let n = basis.n();
    let pp = exp_diag(&basis.k_plus(), d);
    let pm = exp_diag(&basis.k_minus(), -d);
    let ones = vec![ONE; n];
    let left: Vec<Complex64> = ones.iter().chain(&pm).copied().collect();
    let right: Vec<Complex64> = pp.iter().chain(&ones).copied().collect();
    let f0 = linalg::assemble_cols(&basis.f0_plus(), &basis.f0_minus());
    let a0 = linalg::assemble_cols(&basis.a0_plus(), &basis.a0_minus());
    Ok(FaceRows {
        f_left: scale_columns(&f0, &left),
        a_left: scale_columns(&a0, &left),
        f_right: scale_columns(&f0, &right),
        a_right: scale_columns(&a0, &right),
    })
}

fn stack(top: &CMat, bottom: &CMat) -> CMat {
    let mut m = CMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    m.view_mut((0, 0), top.shape()).copy_from(top);
    m.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    m
}

/// `out_rows · in_rows⁻¹`, failing when `in_rows` is worse conditioned than `limit`.
fn ratio(variant: Variant, out_rows: CMat, in_rows: CMat, limit: f64, what: &str) -> Result<BlockMatrix> {
    let (data, cond) = linalg::right_divide(&out_rows, &in_rows, limit).map_err(|cond| MslError::IllConditioned {
        what: what.to_string(),
        cond,
    })?;
    if !linalg::all_finite(&data) {
        return Err(MslError::IllConditioned {
            what: what.to_string(),
            cond: f64::INFINITY,
        });
    }
    Ok(BlockMatrix::new(variant, data)?.with_cond(cond))
}

/// Hybrid matrix `(A(z0), F(z)) → (F(z0), A(z))`, finite for any thickness.
pub fn h_from_basis(basis: &ModeBasis, d: f64) -> Result<BlockMatrix> {
    let r = face_rows(basis, d)?;
    ratio(
        Variant::H,
        stack(&r.f_left, &r.a_right),
        stack(&r.a_left, &r.f_right),
        BASIS_COND_LIMIT,
        "U^AF",
    )
}

pub fn h_single_stable(m: &MslCoefficients, d: f64) -> Result<BlockMatrix> {
    h_from_basis(&solve_qep(m)?, d)
}

/// Inverse hybrid matrix `(F(z0), A(z)) → (A(z0), F(z))`.
pub fn h_inverse_from_basis(basis: &ModeBasis, d: f64) -> Result<BlockMatrix> {
    let r = face_rows(basis, d)?;
    ratio(
        Variant::HInv,
        stack(&r.a_left, &r.f_right),
        stack(&r.f_left, &r.a_right),
        BASIS_COND_LIMIT,
        "U^FA",
    )
}

pub fn h_inverse_single_stable(m: &MslCoefficients, d: f64) -> Result<BlockMatrix> {
    h_inverse_from_basis(&solve_qep(m)?, d)
}

/// Stiffness matrix `(F(z0), F(z)) → (A(z0), A(z))`. Stable for thick layers;
/// fails with a conditioning error as the thickness goes to zero.
pub fn e_from_basis(basis: &ModeBasis, d: f64) -> Result<BlockMatrix> {
    let r = face_rows(basis, d)?;
    ratio(
        Variant::E,
        stack(&r.a_left, &r.a_right),
        stack(&r.f_left, &r.f_right),
        STIFFNESS_COND_LIMIT,
        "U^FF",
    )
}

pub fn e_single_stable(m: &MslCoefficients, d: f64) -> Result<BlockMatrix> {
    e_from_basis(&solve_qep(m)?, d)
}

/// Compliance matrix `(A(z0), A(z)) → (F(z0), F(z))`, the inverse of E.
pub fn compliance_from_basis(basis: &ModeBasis, d: f64) -> Result<BlockMatrix> {
    let r = face_rows(basis, d)?;
    ratio(
        Variant::Compliance,
        stack(&r.f_left, &r.f_right),
        stack(&r.a_left, &r.a_right),
        STIFFNESS_COND_LIMIT,
        "U^AA",
    )
}

pub fn compliance_single_stable(m: &MslCoefficients, d: f64) -> Result<BlockMatrix> {
    compliance_from_basis(&solve_qep(m)?, d)
}

/// `K = qR⁻¹ · T · qL`, mapping mode amplitudes `(a+, a−)` from L to R.
pub fn k_matrix(q_r: &BlockMatrix, t: &BlockMatrix, q_l: &BlockMatrix) -> Result<BlockMatrix> {
    q_r.expect_variant(&[Variant::Q], "k_matrix")?;
    q_l.expect_variant(&[Variant::Q], "k_matrix")?;
    t.expect_variant(&[Variant::T], "k_matrix")?;
    let rhs = &t.data * &q_l.data;
    let (k, cond) = linalg::left_divide(&q_r.data, &rhs, SINGULAR_COND_LIMIT).map_err(singular("Q(R)"))?;
    Ok(BlockMatrix::new(Variant::K, k)?.with_cond(cond))
}

/// K across an interface between two reduced bases at the same point.
pub fn k_interface(q_prev: &CMat, q_next: &CMat) -> Result<BlockMatrix> {
    let (k, cond) = linalg::left_divide(q_next, q_prev, SINGULAR_COND_LIMIT).map_err(singular("Q(next)"))?;
    Ok(BlockMatrix::new(Variant::K, k)?.with_cond(cond))
}

/// `S = [[−K22⁻¹K21, K22⁻¹], [K11 − K12K22⁻¹K21, K12K22⁻¹]]`, mapping
/// incoming `(a+(L), a−(R))` to outgoing `(a−(L), a+(R))`.
pub fn s_from_k(k: &BlockMatrix) -> Result<BlockMatrix> {
    k.expect_variant(&[Variant::K], "s_from_k")?;
    let (k11, k12, k21, k22) = (k.b11(), k.b12(), k.b21(), k.b22());
    let n = k.n;
    let solver = Solver::new(&k22).ok_or_else(|| singular("K22")(f64::INFINITY))?;
    if solver.cond() > SINGULAR_COND_LIMIT {
        return Err(singular("K22")(solver.cond()));
    }
    let inv_k21 = solver.solve(&k21);
    let inv = solver.solve(&linalg::identity(n));
    let k12_inv = rdiv(&k12, &k22, "K22")?;
    let s = BlockMatrix::from_blocks(Variant::S, &(-&inv_k21), &inv, &(&k11 - &k12 * &inv_k21), &k12_inv);
    Ok(s.with_cond(solver.cond()))
}

/// S of a slab of thickness `d` inside its own medium, reduced bases at both faces.
pub fn s_propagation(basis: &ModeBasis, d: f64) -> Result<BlockMatrix> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(MslError::InvalidInput(format!("layer thickness must be finite and non-negative, got {d}")));
    }
    let n = basis.n();
    let diag = |v: Vec<Complex64>| CMat::from_diagonal(&linalg::cvec(&v));
    let z = linalg::zeros(n);
    Ok(BlockMatrix::from_blocks(
        Variant::S,
        &z,
        &diag(exp_diag(&basis.k_minus(), -d)),
        &diag(exp_diag(&basis.k_plus(), d)),
        &z,
    ))
}

/// Appendix-style family: Y swaps block rows of X, Z swaps block columns, R swaps both.
fn family_swaps(v: Variant) -> Option<(bool, bool)> {
    match v {
        Variant::X | Variant::T | Variant::H | Variant::E => Some((false, false)),
        Variant::Y => Some((true, false)),
        Variant::Z => Some((false, true)),
        Variant::R => Some((true, true)),
        _ => None,
    }
}

/// Re-arrange blocks between the X, Y, Z, R family members. T, H and E
/// inputs are read as the X member.
pub fn reblock_family(m: &BlockMatrix, target: Variant) -> Result<BlockMatrix> {
    let (from_rows, from_cols) = family_swaps(m.variant)
        .ok_or_else(|| MslError::UnsupportedVariant(format!("reblock_family from {}", m.variant)))?;
    let (to_rows, to_cols) = match target {
        Variant::X | Variant::Y | Variant::Z | Variant::R => family_swaps(target).expect("family member"),
        other => return Err(MslError::UnsupportedVariant(format!("reblock_family to {other}"))),
    };
    let swap_rows = from_rows != to_rows;
    let swap_cols = from_cols != to_cols;
    let pick = |r: usize, col: usize| {
        let r = if swap_rows { 1 - r } else { r };
        let col = if swap_cols { 1 - col } else { col };
        block(&m.data, r, col)
    };
    Ok(BlockMatrix {
        variant: target,
        n: m.n,
        data: assemble(&pick(0, 0), &pick(0, 1), &pick(1, 0), &pick(1, 1)),
        diagnostics: m.diagnostics,
    })
}

/// Matrix inverse with the variant tag of the inverse map.
pub fn invert_variant(m: &BlockMatrix) -> Result<BlockMatrix> {
    let target = match m.variant {
        Variant::T => Variant::T,
        Variant::H => Variant::HInv,
        Variant::HInv => Variant::H,
        Variant::E => Variant::Compliance,
        Variant::Compliance => Variant::E,
        Variant::K => Variant::K,
        Variant::Q => Variant::Q,
        other => return Err(MslError::UnsupportedVariant(format!("invert_variant of {other}"))),
    };
    let (inv, cond) = linalg::left_divide(&m.data, &linalg::identity(2 * m.n), SINGULAR_COND_LIMIT)
        .map_err(singular("input matrix"))?;
    Ok(BlockMatrix::new(target, inv)?.with_cond(cond))
}
