//! Composition rules and folds over a layer stack.

use serde::{Deserialize, Serialize};

use crate::error::{MslError, Result};
use crate::linalg::{self, CMat, Solver};
use crate::propagators::{
    antidiagonal_identity, e_from_basis, h_from_basis, k_interface, liouville_determinant, q_matrix, s_from_k,
    s_propagation, t_from_basis, BlockMatrix, Referencing, Variant, SINGULAR_COND_LIMIT,
};
use crate::qep::{solve_qep, ModeBasis};
use crate::structure::LayeredStructure;

/// Conditioning of one composition step's inner factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub sigma_min: f64,
    pub cond: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositionTrace {
    pub steps: Vec<StepTrace>,
    /// Construction condition estimate of each operand, in stack order.
    pub operand_cond: Vec<Option<f64>>,
}

impl CompositionTrace {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn max_cond(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.cond)
            .chain(self.operand_cond.iter().flatten().copied())
            .fold(1.0, f64::max)
    }
}

fn same_n(a: &BlockMatrix, b: &BlockMatrix) -> Result<()> {
    if a.n == b.n {
        Ok(())
    } else {
        Err(MslError::Dimension(format!("cannot compose N = {} with N = {}", a.n, b.n)))
    }
}

fn inner_solver(factor: &CMat, step: usize) -> Result<(Solver, StepTrace)> {
    let resonance = |sigma_min| MslError::Resonance { step, sigma_min };
    let solver = Solver::new(factor).ok_or_else(|| resonance(linalg::sigma_min(factor)))?;
    let trace = StepTrace {
        sigma_min: solver.sigma_min(),
        cond: solver.cond(),
    };
    if solver.cond() > SINGULAR_COND_LIMIT {
        return Err(resonance(trace.sigma_min));
    }
    Ok((solver, trace))
}

/// `t2 · t1`: first through t1, then t2.
pub fn compose_t(t2: &BlockMatrix, t1: &BlockMatrix) -> Result<BlockMatrix> {
    same_n(t2, t1)?;
    let data = &t2.data * &t1.data;
    if !linalg::all_finite(&data) {
        return Err(MslError::Overflow {
            omega_d: f64::INFINITY,
            layer: None,
        });
    }
    BlockMatrix::new(Variant::T, data)
}

/// Redheffer-type combination with `left` the earlier piece:
/// inner factor `I − left22 · right11`.
fn redheffer(left: &BlockMatrix, right: &BlockMatrix, variant: Variant, step: usize) -> Result<(BlockMatrix, StepTrace)> {
    same_n(left, right)?;
    let (x11, x12, x21, x22) = (left.b11(), left.b12(), left.b21(), left.b22());
    let (y11, y12, y21, y22) = (right.b11(), right.b12(), right.b21(), right.b22());
    let factor = linalg::identity(left.n) - &x22 * &y11;
    let (solver, trace) = inner_solver(&factor, step)?;
    let g_x21 = solver.solve(&x21);
    let g_x22_y12 = solver.solve(&(&x22 * &y12));
    let z11 = &x11 + &x12 * &y11 * &g_x21;
    let z12 = &x12 * (&y12 + &y11 * &g_x22_y12);
    let z21 = &y21 * &g_x21;
    let z22 = &y22 + &y21 * &g_x22_y12;
    let mut out = BlockMatrix::from_blocks(variant, &z11, &z12, &z21, &z22);
    out.diagnostics.cond = Some(trace.cond);
    Ok((out, trace))
}

/// Hybrid matrix of layer `m` followed by the layers to its right.
pub fn compose_h(h_m: &BlockMatrix, h_rest: &BlockMatrix) -> Result<BlockMatrix> {
    Ok(compose_h_step(h_m, h_rest, 0)?.0)
}

fn compose_h_step(h_m: &BlockMatrix, h_rest: &BlockMatrix, step: usize) -> Result<(BlockMatrix, StepTrace)> {
    redheffer(h_m, h_rest, Variant::H, step)
}

/// Star product `y ⊛ x` where `x` is the left (earlier) scatterer.
pub fn star_product(y: &BlockMatrix, x: &BlockMatrix) -> Result<BlockMatrix> {
    Ok(redheffer(x, y, Variant::S, 0)?.0)
}

/// Stiffness matrix of layer `m` followed by the layers to its right.
pub fn compose_e(e_m: &BlockMatrix, e_rest: &BlockMatrix) -> Result<BlockMatrix> {
    Ok(compose_e_step(e_m, e_rest, 0)?.0)
}

fn compose_e_step(e_m: &BlockMatrix, e_rest: &BlockMatrix, step: usize) -> Result<(BlockMatrix, StepTrace)> {
    same_n(e_m, e_rest)?;
    let (m11, m12, m21, m22) = (e_m.b11(), e_m.b12(), e_m.b21(), e_m.b22());
    let (r11, r12, r21, r22) = (e_rest.b11(), e_rest.b12(), e_rest.b21(), e_rest.b22());
    let (solver, trace) = inner_solver(&(&r11 - &m22), step)?;
    let d_m21 = solver.solve(&m21);
    let d_r12 = solver.solve(&r12);
    let e11 = &m11 + &m12 * &d_m21;
    let e12 = -(&m12 * &d_r12);
    let e21 = &r21 * &d_m21;
    let e22 = &r22 - &r21 * &d_r12;
    let mut out = BlockMatrix::from_blocks(Variant::E, &e11, &e12, &e21, &e22);
    out.diagnostics.cond = Some(trace.cond);
    Ok((out, trace))
}

/// Reduced mode bases replacing the half-space media in the S fold.
#[derive(Debug, Clone, PartialEq)]
pub struct EndBases {
    pub left: CMat,
    pub right: CMat,
}

fn layer_bases(s: &LayeredStructure) -> Result<Vec<ModeBasis>> {
    s.layers
        .iter()
        .enumerate()
        .map(|(i, l)| solve_qep(&l.medium).map_err(|e| e.with_layer(i)))
        .collect()
}

fn fold_redheffer_like(
    pieces: Vec<BlockMatrix>,
    step_fn: impl Fn(&BlockMatrix, &BlockMatrix, usize) -> Result<(BlockMatrix, StepTrace)>,
    trace: &mut CompositionTrace,
) -> Result<Option<BlockMatrix>> {
    let mut iter = pieces.into_iter().rev();
    let Some(mut acc) = iter.next() else {
        return Ok(None);
    };
    for (step, piece) in iter.enumerate() {
        let (next, st) = step_fn(&piece, &acc, step)?;
        trace.steps.push(st);
        acc = next;
    }
    Ok(Some(acc))
}

/// Fold the finite layers (T, H, E) or the whole L–M–R structure (S) from
/// right to left under the variant's composition rule.
pub fn structure_propagator(s: &LayeredStructure, variant: Variant) -> Result<(BlockMatrix, CompositionTrace)> {
    match variant {
        Variant::S => structure_s_matrix(s, None),
        Variant::T | Variant::H | Variant::E => {
            let bases = layer_bases(s)?;
            fold_layers(s, &bases, variant)
        }
        other => Err(MslError::UnsupportedVariant(format!("structure_propagator for {other}"))),
    }
}

pub(crate) fn fold_layers(
    s: &LayeredStructure,
    bases: &[ModeBasis],
    variant: Variant,
) -> Result<(BlockMatrix, CompositionTrace)> {
    let n = s.n();
    let mut trace = CompositionTrace::default();
    match variant {
        Variant::T => {
            let mut acc = BlockMatrix::new(Variant::T, linalg::identity(2 * n))?;
            let mut expected_det = linalg::ONE;
            let mut omega_d = 0.0;
            let mut pieces = Vec::with_capacity(bases.len());
            for (i, (basis, layer)) in bases.iter().zip(&s.layers).enumerate() {
                let t = t_from_basis(basis, layer.thickness).map_err(|e| e.with_layer(i))?;
                trace.operand_cond.push(t.diagnostics.cond);
                expected_det *= liouville_determinant(&basis.medium, layer.thickness);
                pieces.push(t);
            }
            for (i, t) in pieces.iter().enumerate().rev() {
                omega_d += bases[i].max_abs_im_k() * s.layers[i].thickness;
                let prod = &acc.data * &t.data;
                if !linalg::all_finite(&prod) {
                    return Err(MslError::Overflow {
                        omega_d,
                        layer: Some(i),
                    });
                }
                if i + 1 < pieces.len() {
                    trace.steps.push(StepTrace {
                        sigma_min: f64::NAN,
                        cond: 1.0,
                    });
                }
                acc = BlockMatrix::new(Variant::T, prod)?;
            }
            acc.diagnostics.det_drift = Some((linalg::det(&acc.data) - expected_det).norm());
            Ok((acc, trace))
        }
        Variant::H | Variant::E => {
            let build = if variant == Variant::H { h_from_basis } else { e_from_basis };
            let mut pieces = Vec::with_capacity(bases.len());
            for (i, (basis, layer)) in bases.iter().zip(&s.layers).enumerate() {
                let piece = build(basis, layer.thickness).map_err(|e| e.with_layer(i))?;
                trace.operand_cond.push(piece.diagnostics.cond);
                pieces.push(piece);
            }
            let folded = if variant == Variant::H {
                fold_redheffer_like(pieces, compose_h_step, &mut trace)?
            } else {
                fold_redheffer_like(pieces, compose_e_step, &mut trace)?
            };
            match folded {
                Some(m) => Ok((m, trace)),
                None if variant == Variant::H => Ok((BlockMatrix::new(Variant::H, antidiagonal_identity(n))?, trace)),
                None => Err(MslError::InvalidInput("stiffness matrix of an empty stack is undefined".into())),
            }
        }
        other => Err(MslError::UnsupportedVariant(format!("layer fold for {other}"))),
    }
}

/// S matrix of the whole structure mapping `(a+(L), a−(R))` to
/// `(a−(L), a+(R))`, with reduced half-space bases at `z_l` and `z_r`.
/// `end_bases` overrides those two bases.
pub fn structure_s_matrix(s: &LayeredStructure, end_bases: Option<&EndBases>) -> Result<(BlockMatrix, CompositionTrace)> {
    let bases = layer_bases(s)?;
    let reduced = |b: &ModeBasis| q_matrix(b, 0.0, &Referencing::Reduced).map(|q| q.data);
    let (q_left, q_right) = match end_bases {
        Some(e) => (e.left.clone(), e.right.clone()),
        None => (reduced(&solve_qep(&s.left)?)?, reduced(&solve_qep(&s.right)?)?),
    };
    let mut trace = CompositionTrace::default();
    let mut pieces = Vec::with_capacity(2 * bases.len() + 1);
    let mut prev = q_left;
    for (i, (basis, layer)) in bases.iter().zip(&s.layers).enumerate() {
        let q = reduced(basis).map_err(|e| e.with_layer(i))?;
        let k = k_interface(&prev, &q)?;
        let s_int = s_from_k(&k)?;
        trace.operand_cond.push(s_int.diagnostics.cond);
        pieces.push(s_int);
        let s_prop = s_propagation(basis, layer.thickness)?;
        trace.operand_cond.push(None);
        pieces.push(s_prop);
        prev = q;
    }
    let k = k_interface(&prev, &q_right)?;
    let s_int = s_from_k(&k)?;
    trace.operand_cond.push(s_int.diagnostics.cond);
    pieces.push(s_int);
    let folded = fold_redheffer_like(pieces, |x, y, step| redheffer(x, y, Variant::S, step), &mut trace)?;
    Ok((folded.expect("at least one interface"), trace))
}
