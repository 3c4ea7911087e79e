//! Transfer, hybrid, stiffness and scattering matrices for layered media
//! governed by the matrix Sturm-Liouville system
//!
//! ```text
//! (B F' + P F)' + Y F' + W F = 0,    A = B F' + P F
//! ```
//!
//! with piecewise-constant coefficients. Each homogeneous layer is described
//! by the modes of its quadratic eigenvalue problem; per-layer propagators are
//! composed across a stack and fed to escape (bound-state) and periodic
//! (Bloch) secular solvers.

// `!(x > 0.0)` is used on purpose to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compose;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod medium;
pub mod propagators;
pub mod qep;
pub mod solvers;
pub mod structure;
pub mod verify;

pub use error::{MslError, Result};
pub use exec::Execution;
pub use linalg::{CMat, CVec};
pub use medium::{
    make_quantum_medium, make_real_scalar_medium, make_scalar_medium, make_sh_piezo_medium, validate_coefficients,
    MslCoefficients, ShPiezoParams, ValidationReport, ViolationKind,
};
pub use qep::{linear_form_amplitudes, partition_modes, secular_matrix, solve_qep, Mode, ModeBasis};
pub use structure::{
    load_structure, load_structure_spec, FieldState, Layer, LayeredStructure, StructureSource, StructureSpec,
};
pub use propagators::{
    compliance_single_stable, e_from_t, e_single_stable, h_from_t, h_inverse_single_stable, h_single_stable,
    invert_variant, k_matrix, q_matrix, reblock_family, s_from_k, t_partitions, t_single, BlockMatrix, GammaBlocks,
    Referencing, Variant,
};
pub use compose::{
    compose_e, compose_h, compose_t, star_product, structure_propagator, structure_s_matrix, CompositionTrace, EndBases,
};
pub use solvers::{
    band_structure, escape_secular, finite_well_oracle, kronig_penney_residuals, periodic_dispersion, scan_and_refine,
    sh_wave_speeds, BandStructure, KronigPenney, ScanMode, ScanOptions, SecularScan, ShStack,
};
pub use verify::{
    default_c_estimate, det_unimodularity_scan, expm_propagator, first_order_matrix, roundoff_bound, unit_roundoff,
    variant_comparison_report, FirstOrderSystem, OracleRoute, StabilityReport, SweepSpec,
};
