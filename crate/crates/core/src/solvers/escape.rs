//! Escape (bound-state) problem: only outgoing waves in the two
//! half-spaces, joined through the hybrid or stiffness matrix of the inner
//! region.

use num_complex::Complex64;

use crate::compose::structure_propagator;
use crate::error::{MslError, Result};
use crate::linalg::{self, CMat};
use crate::medium::MslCoefficients;
use crate::propagators::Variant;
use crate::qep::{solve_qep, PROPAGATING_TOL};
use crate::solvers::scan::{scan_and_refine, ScanOptions, SecularScan};
use crate::structure::LayeredStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// The N outgoing modes of a half-space stacked as a 2N×N matrix
/// `[F0; A0]`, referenced at the interface with the inner region.
#[derive(Debug, Clone, PartialEq)]
pub struct OutgoingBasis {
    pub side: Side,
    pub columns: CMat,
    pub k: Vec<Complex64>,
}

impl OutgoingBasis {
    /// Minus modes for the left half-space, plus modes for the right one.
    pub fn new(medium: &MslCoefficients, side: Side) -> Result<Self> {
        let basis = solve_qep(medium)?;
        let (f0, a0, k) = match side {
            Side::Left => (basis.f0_minus(), basis.a0_minus(), basis.k_minus()),
            Side::Right => (basis.f0_plus(), basis.a0_plus(), basis.k_plus()),
        };
        let n = basis.n();
        let mut columns = CMat::zeros(2 * n, n);
        columns.view_mut((0, 0), (n, n)).copy_from(&f0);
        columns.view_mut((n, 0), (n, n)).copy_from(&a0);
        Ok(Self { side, columns, k })
    }

    /// True when every mode decays away from the inner region.
    pub fn is_decaying(&self) -> bool {
        let scale = self.k.iter().map(|k| k.norm()).fold(0.0, f64::max);
        let tol = PROPAGATING_TOL * scale.max(f64::MIN_POSITIVE);
        self.k.iter().all(|k| match self.side {
            Side::Left => k.im < -tol,
            Side::Right => k.im > tol,
        })
    }

    fn check_decay(&self) -> Result<()> {
        if self.is_decaying() {
            return Ok(());
        }
        let side = match self.side {
            Side::Left => "left",
            Side::Right => "right",
        };
        Err(MslError::Modeling(format!(
            "outgoing waves in the {side} half-space do not decay (k = {:?})",
            self.k
        )))
    }
}

/// Secular matrix `Ms` of the escape problem (2N×2N). Nontrivial
/// solutions exist where `det Ms = 0`. With `bound_state` set, every
/// outgoing mode must decay away from the inner region.
pub fn escape_secular(s: &LayeredStructure, variant: Variant, bound_state: bool) -> Result<CMat> {
    let left = OutgoingBasis::new(&s.left, Side::Left)?;
    let right = OutgoingBasis::new(&s.right, Side::Right)?;
    if bound_state {
        left.check_decay()?;
        right.check_decay()?;
    }
    let n = s.n();
    let eye = linalg::identity(n);
    let zero = linalg::zeros(n);
    let (m, _) = structure_propagator(s, variant)?;
    let (b11, b12, b21, b22) = (m.b11(), m.b12(), m.b21(), m.b22());
    let row = |a: &CMat, b: &CMat| linalg::assemble_cols(a, b);
    let (r11, r12, r21, r22) = match variant {
        Variant::H => (
            row(&(-&eye), &b11),
            row(&b12, &zero),
            row(&zero, &b21),
            row(&b22, &(-&eye)),
        ),
        Variant::E => (
            row(&b11, &(-&eye)),
            row(&b12, &zero),
            row(&b21, &zero),
            row(&b22, &(-&eye)),
        ),
        other => return Err(MslError::UnsupportedVariant(format!("escape problem in {other} form"))),
    };
    Ok(linalg::assemble(
        &(r11 * &left.columns),
        &(r12 * &right.columns),
        &(r21 * &left.columns),
        &(r22 * &right.columns),
    ))
}

/// Scan `det Ms` over a real parameter; `build` maps the parameter to the
/// structure at that point.
pub fn escape_scan<B>(parameter: &str, build: B, variant: Variant, grid: &[f64], opts: &ScanOptions) -> Result<SecularScan>
where
    B: Fn(f64) -> Result<LayeredStructure> + Sync + Send,
{
    let f = |x: f64| -> Result<Complex64> {
        let s = build(x)?;
        Ok(linalg::det(&escape_secular(&s, variant, true)?))
    };
    scan_and_refine(parameter, f, grid, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::medium::make_quantum_medium;
    use crate::solvers::scan::linspace;
    use crate::solvers::wells::finite_well_oracle;
    use crate::structure::Layer;

    fn well(v0: f64, width: f64) -> impl Fn(f64) -> Result<LayeredStructure> + Sync + Send {
        move |e| {
            let barrier = make_quantum_medium(1.0, v0, e, 1.0)?;
            let inside = make_quantum_medium(1.0, 0.0, e, 1.0)?;
            LayeredStructure::new(barrier.clone(), vec![Layer::new(inside, width)?], barrier)
        }
    }

    fn opts() -> ScanOptions {
        ScanOptions {
            tol: 1e-12,
            exec: Execution::Sequential,
            ..Default::default()
        }
    }

    #[test]
    fn finite_well_three_levels_in_both_forms() {
        let oracle: Vec<f64> = finite_well_oracle(10.0, 2.0, 1.0, 1.0)
            .unwrap()
            .iter()
            .map(|l| l.energy)
            .collect();
        let grid = linspace(0.0, 10.0, 400);
        for variant in [Variant::H, Variant::E] {
            let scan = escape_scan("energy", well(10.0, 2.0), variant, &grid, &opts()).unwrap();
            let roots = scan.root_values();
            assert_eq!(roots.len(), 3, "{variant}: {roots:?}");
            for (r, o) in roots.iter().zip(&oracle) {
                assert!((r - o).abs() < 1e-8, "{variant}: {r} vs {o}");
            }
        }
    }

    #[test]
    fn non_decaying_outgoing_wave_is_a_modeling_error() {
        let s = well(10.0, 2.0)(12.0).unwrap();
        assert!(matches!(escape_secular(&s, Variant::H, true), Err(MslError::Modeling(_))));
        assert!(escape_secular(&s, Variant::H, false).is_ok());
    }

    #[test]
    fn t_form_is_unsupported() {
        let s = well(10.0, 2.0)(1.0).unwrap();
        assert!(matches!(
            escape_secular(&s, Variant::T, true),
            Err(MslError::UnsupportedVariant(_))
        ));
    }
}
