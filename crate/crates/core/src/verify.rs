//! Independent oracles and roundoff diagnostics.
//!
//! The oracle route never touches the mode basis: it exponentiates the
//! first-order system matrix `M` with `(F, A)' = M (F, A)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::compose::{fold_layers, structure_s_matrix};
use crate::error::{MslError, Result};
use crate::exec::{map_grid, Execution};
use crate::linalg::{self, assemble, block, c, CMat};
use crate::medium::{MslCoefficients, SINGULAR_B_COND};
use crate::propagators::{t_from_basis, t_partitions, BlockMatrix, Variant};
use crate::qep::{solve_qep, ModeBasis};
use crate::structure::{Layer, LayeredStructure};

/// `M = [[−B⁻¹P, B⁻¹], [Y B⁻¹ P − W, −Y B⁻¹]]` of one medium.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderSystem {
    pub matrix: CMat,
    pub medium: MslCoefficients,
}

pub fn first_order_matrix(m: &MslCoefficients) -> Result<FirstOrderSystem> {
    let n = m.n();
    let (b_inv, _) =
        linalg::left_divide(&m.b, &linalg::identity(n), SINGULAR_B_COND).map_err(|cond| MslError::SingularB { cond })?;
    let b_inv_p = &b_inv * &m.p;
    let y_b_inv = &m.y * &b_inv;
    let matrix = assemble(&(-&b_inv_p), &b_inv, &(&m.y * &b_inv_p - &m.w), &(-&y_b_inv));
    Ok(FirstOrderSystem {
        matrix,
        medium: m.clone(),
    })
}

impl FirstOrderSystem {
    /// Recover `(B, P, Y, W)` from the blocks of `M`.
    pub fn reconstruct(&self) -> Result<MslCoefficients> {
        let (m11, m12, m21, m22) = (
            block(&self.matrix, 0, 0),
            block(&self.matrix, 0, 1),
            block(&self.matrix, 1, 0),
            block(&self.matrix, 1, 1),
        );
        let n = m11.nrows();
        let (b, _) = linalg::left_divide(&m12, &linalg::identity(n), f64::INFINITY)
            .map_err(|cond| MslError::SingularB { cond })?;
        let p = -(&b * &m11);
        let y = -(&m22 * &b);
        let w = &y * &m12 * &p - &m21;
        MslCoefficients::new(b, p, y, w)
    }
}

/// Which independent route computes the oracle propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleRoute {
    /// Scaling and squaring with a Taylor core.
    #[default]
    Expm,
    /// Fixed-step classical Runge-Kutta on `X' = M X`.
    Rk4,
}

fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a degree-20 Taylor core.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let nrm = norm1(a);
    let squarings = if nrm > 0.25 { (nrm / 0.25).log2().ceil() as i32 } else { 0 };
    let scaled = a * c(0.5f64.powi(squarings), 0.0);
    let mut result = linalg::identity(n);
    let mut term = linalg::identity(n);
    for j in 1..=20 {
        term = &term * &scaled * c(1.0 / j as f64, 0.0);
        result += &term;
        if linalg::max_abs(&term) <= f64::EPSILON * 1e-3 * linalg::max_abs(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn rk4(m: &CMat, d: f64) -> CMat {
    let n = m.nrows();
    let steps = ((norm1(m) * d.abs() / 0.005).ceil() as usize).clamp(1, 2_000_000);
    let h = c(d / steps as f64, 0.0);
    let mut x = linalg::identity(n);
    for _ in 0..steps {
        let k1 = m * &x;
        let k2 = m * (&x + &k1 * (h * 0.5));
        let k3 = m * (&x + &k2 * (h * 0.5));
        let k4 = m * (&x + &k3 * h);
        x += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * (h / 6.0);
    }
    x
}

/// Transfer matrix from the first-order form, independent of the QEP.
pub fn expm_propagator(m: &MslCoefficients, d: f64) -> Result<BlockMatrix> {
    expm_propagator_with(m, d, OracleRoute::Expm)
}

pub fn expm_propagator_with(m: &MslCoefficients, d: f64, route: OracleRoute) -> Result<BlockMatrix> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(MslError::InvalidInput(format!("oracle thickness must be finite and non-negative, got {d}")));
    }
    let sys = first_order_matrix(m)?;
    let n2 = 2 * m.n();
    if d == 0.0 {
        return BlockMatrix::new(Variant::T, linalg::identity(n2));
    }
    let a = &sys.matrix * c(d, 0.0);
    let t = match route {
        OracleRoute::Expm => expm(&a),
        OracleRoute::Rk4 => rk4(&sys.matrix, d),
    };
    if !linalg::all_finite(&t) {
        return Err(MslError::Overflow {
            omega_d: norm1(&a),
            layer: None,
        });
    }
    BlockMatrix::new(Variant::T, t)
}

/// Smallest power of two `u` with `1 + u != 1` in double precision.
pub fn unit_roundoff() -> f64 {
    let mut u = 1.0f64;
    while std::hint::black_box(1.0 + u / 2.0) != 1.0 {
        u /= 2.0;
    }
    u
}

/// `c · max_j exp(|Im k_j| d) · u`.
pub fn roundoff_bound(m: &MslCoefficients, d: f64, c_estimate: f64) -> Result<f64> {
    let basis = solve_qep(m)?;
    Ok(roundoff_bound_from_basis(&basis, d, c_estimate))
}

pub fn roundoff_bound_from_basis(basis: &ModeBasis, d: f64, c_estimate: f64) -> f64 {
    c_estimate * (basis.max_abs_im_k() * d.abs()).exp() * unit_roundoff()
}

/// Prefactor proxy: the largest norm among the mode-column times
/// inverse-Schur-combination products that build T at zero thickness.
pub fn default_c_estimate(m: &MslCoefficients) -> Result<f64> {
    default_c_from_basis(&solve_qep(m)?)
}

fn default_c_from_basis(basis: &ModeBasis) -> Result<f64> {
    let (_, g) = t_partitions(basis, 0.0)?;
    let n = basis.n();
    let id = linalg::identity(n);
    let inv = |m: &CMat| linalg::left_divide(m, &id, f64::INFINITY).map(|x| x.0);
    let err = |cond| MslError::SingularBlock {
        what: "gamma block".into(),
        cond,
    };
    let gammas = [inv(&g.g11).map_err(err)?, inv(&g.g12).map_err(err)?, inv(&g.g21).map_err(err)?, inv(&g.g22).map_err(err)?];
    let cols = [basis.f0_plus(), basis.f0_minus(), basis.a0_plus(), basis.a0_minus()];
    // F0+ pairs with γ11⁻¹, γ21⁻¹; F0− with γ12⁻¹, γ22⁻¹; likewise for A0±
    let mut best = 0.0f64;
    for (ci, col) in cols.iter().enumerate() {
        let pair = if ci % 2 == 0 { [&gammas[0], &gammas[2]] } else { [&gammas[1], &gammas[3]] };
        for g in pair {
            best = best.max(linalg::norm(&(col * g)));
        }
    }
    Ok(best)
}

/// One row of a stability sweep. Missing values are left empty in CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityPoint {
    pub param: f64,
    pub omega_d: f64,
    pub det_drift: Option<f64>,
    pub t_status: String,
    pub h11_norm: Option<f64>,
    pub h12_norm: Option<f64>,
    pub h21_norm: Option<f64>,
    pub h22_norm: Option<f64>,
    pub h_cond: Option<f64>,
    pub s11_norm: Option<f64>,
    pub s12_norm: Option<f64>,
    pub s21_norm: Option<f64>,
    pub s22_norm: Option<f64>,
    pub s_cond: Option<f64>,
    pub e_status: String,
    pub e_cond: Option<f64>,
    pub bound: f64,
    pub u: f64,
}

impl StabilityPoint {
    fn empty(param: f64, u: f64) -> Self {
        Self {
            param,
            omega_d: 0.0,
            det_drift: None,
            t_status: String::new(),
            h11_norm: None,
            h12_norm: None,
            h21_norm: None,
            h22_norm: None,
            h_cond: None,
            s11_norm: None,
            s12_norm: None,
            s21_norm: None,
            s22_norm: None,
            s_cond: None,
            e_status: String::new(),
            e_cond: None,
            bound: 0.0,
            u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Name of the swept quantity.
    pub parameter: String,
    pub unit_roundoff: f64,
    pub points: Vec<StabilityPoint>,
}

const CSV_HEADER: [&str; 18] = [
    "param", "omega_d", "det_drift", "t_status", "h11_norm", "h12_norm", "h21_norm", "h22_norm", "h_cond", "s11_norm",
    "s12_norm", "s21_norm", "s22_norm", "s_cond", "e_status", "e_cond", "bound", "u",
];

impl StabilityReport {
    pub fn write_csv<W: Write>(&self, out: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(CSV_HEADER)?;
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

fn status(err: &MslError) -> String {
    match err {
        MslError::Overflow { .. } => "overflow".into(),
        MslError::IllConditioned { .. } | MslError::SingularBlock { .. } => "not_computable".into(),
        MslError::Resonance { .. } => "resonance".into(),
        _ => "error".into(),
    }
}

/// Entries can be finite while their determinant is not (e.g. cosh² at
/// d = 700); such points are flagged rather than reported as a NaN drift.
fn t_drift_status(t: &BlockMatrix) -> (Option<f64>, String) {
    match t.diagnostics.det_drift {
        Some(drift) if drift.is_finite() => (Some(drift), "ok".into()),
        _ => (None, "det_overflow".into()),
    }
}

fn block_norms(m: &BlockMatrix) -> [f64; 4] {
    [linalg::norm(&m.b11()), linalg::norm(&m.b12()), linalg::norm(&m.b21()), linalg::norm(&m.b22())]
}

/// `|det T − exp(d·tr M)|` of a single medium over a thickness grid.
pub fn det_unimodularity_scan(m: &MslCoefficients, d_grid: &[f64], exec: Execution) -> Result<StabilityReport> {
    let basis = solve_qep(m)?;
    let c_est = default_c_from_basis(&basis).unwrap_or(1.0);
    let u = unit_roundoff();
    let points = map_grid(d_grid, exec, |&d| {
        let mut p = StabilityPoint::empty(d, u);
        p.omega_d = basis.max_abs_im_k() * d;
        p.bound = roundoff_bound_from_basis(&basis, d, c_est);
        match t_from_basis(&basis, d) {
            Ok(t) => {
                (p.det_drift, p.t_status) = t_drift_status(&t);
            }
            Err(e) => p.t_status = status(&e),
        }
        p
    });
    Ok(StabilityReport {
        parameter: "d".into(),
        unit_roundoff: u,
        points,
    })
}

/// Sweep of thickness scale factors applied to every layer of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub scales: Vec<f64>,
}

fn scaled(s: &LayeredStructure, factor: f64) -> Result<LayeredStructure> {
    let layers = s
        .layers
        .iter()
        .map(|l| {
            let mut layer = Layer::new(l.medium.clone(), l.thickness * factor)?;
            layer.label = l.label.clone();
            Ok(layer)
        })
        .collect::<Result<Vec<_>>>()?;
    LayeredStructure::new(s.left.clone(), layers, s.right.clone())
}

/// Compare T, H, S and E folds of `s` over a thickness-scale sweep. Failures
/// are recorded as data.
pub fn variant_comparison_report(s: &LayeredStructure, sweep: &SweepSpec, exec: Execution) -> Result<StabilityReport> {
    let bases: Vec<ModeBasis> = s
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| solve_qep(&l.medium).map_err(|e| e.with_layer(i)))
        .collect::<Result<_>>()?;
    let c_est = bases
        .iter()
        .filter_map(|b| default_c_from_basis(b).ok())
        .fold(1.0f64, f64::max);
    let u = unit_roundoff();
    let points = map_grid(&sweep.scales, exec, |&factor| {
        let mut p = StabilityPoint::empty(factor, u);
        let st = match scaled(s, factor) {
            Ok(st) => st,
            Err(e) => {
                p.t_status = status(&e);
                p.e_status = status(&e);
                return p;
            }
        };
        p.omega_d = bases.iter().zip(&st.layers).map(|(b, l)| b.max_abs_im_k() * l.thickness).sum();
        p.bound = c_est * p.omega_d.exp() * u;
        match fold_layers(&st, &bases, Variant::T) {
            Ok((t, _)) => {
                (p.det_drift, p.t_status) = t_drift_status(&t);
            }
            Err(e) => p.t_status = status(&e),
        }
        if let Ok((h, trace)) = fold_layers(&st, &bases, Variant::H) {
            let [a, b, c2, d] = block_norms(&h);
            (p.h11_norm, p.h12_norm, p.h21_norm, p.h22_norm) = (Some(a), Some(b), Some(c2), Some(d));
            p.h_cond = Some(trace.max_cond());
        }
        if let Ok((sm, trace)) = structure_s_matrix(&st, None) {
            let [a, b, c2, d] = block_norms(&sm);
            (p.s11_norm, p.s12_norm, p.s21_norm, p.s22_norm) = (Some(a), Some(b), Some(c2), Some(d));
            p.s_cond = Some(trace.max_cond());
        }
        match fold_layers(&st, &bases, Variant::E) {
            Ok((_, trace)) => {
                p.e_status = "ok".into();
                p.e_cond = Some(trace.max_cond());
            }
            Err(e) => {
                p.e_status = status(&e);
                if let MslError::IllConditioned { cond, .. } = e {
                    p.e_cond = Some(cond);
                }
            }
        }
        p
    });
    Ok(StabilityReport {
        parameter: "thickness_scale".into(),
        unit_roundoff: u,
        points,
    })
}
