//! Coefficient matrices of a homogeneous medium and their builders.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MslError, Result};
use crate::linalg::{c, norm, scaled_condition, CMat};

/// Relative tolerance of the formal hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Scaled condition number above which B is treated as singular.
pub const SINGULAR_B_COND: f64 = 1e13;

/// The four N×N coefficient matrices of `(B F' + P F)' + Y F' + W F = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MslCoefficients {
    n: usize,
    pub b: CMat,
    pub p: CMat,
    pub y: CMat,
    pub w: CMat,
}

impl MslCoefficients {
    /// Checks only that the four matrices are square and of equal size.
    pub fn new(b: CMat, p: CMat, y: CMat, w: CMat) -> Result<Self> {
        let n = b.nrows();
        if n == 0 {
            return Err(MslError::Dimension("empty coefficient matrices".into()));
        }
        for (name, m) in [("b", &b), ("p", &p), ("y", &y), ("w", &w)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(MslError::Dimension(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(Self { n, b, p, y, w })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// B = B†, W = W†, Y = −P† within [`HERMITIAN_TOL`].
    pub fn is_formally_hermitian(&self) -> bool {
        validate_coefficients(self, true).violations.iter().all(|v| v.kind == ViolationKind::BSingular)
    }

    /// Returns an error when B is numerically singular.
    pub fn check_regular_b(&self) -> Result<()> {
        let cond = scaled_condition(&self.b);
        if cond.is_finite() && cond <= SINGULAR_B_COND {
            Ok(())
        } else {
            Err(MslError::SingularB { cond })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    BSingular,
    BNotHermitian,
    WNotHermitian,
    YNotMinusPAdjoint,
}

impl std::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ViolationKind::BSingular => "B singular",
            ViolationKind::BNotHermitian => "B != B^H",
            ViolationKind::WNotHermitian => "W != W^H",
            ViolationKind::YNotMinusPAdjoint => "Y != -P^H",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Absolute residual norm, or the scaled condition number for `BSingular`.
    pub magnitude: f64,
    /// Residual relative to the size of the matrices involved.
    pub relative: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

fn relative_residual(residual: f64, scale: f64) -> f64 {
    if residual == 0.0 {
        0.0
    } else if scale > 0.0 {
        residual / scale
    } else {
        f64::INFINITY
    }
}

/// Check B regularity and, when `hermitian_expected`, the three formal
/// hermiticity identities.
pub fn validate_coefficients(m: &MslCoefficients, hermitian_expected: bool) -> ValidationReport {
    let mut violations = Vec::new();
    let cond = scaled_condition(&m.b);
    if !(cond.is_finite() && cond <= SINGULAR_B_COND) {
        violations.push(Violation {
            kind: ViolationKind::BSingular,
            magnitude: cond,
            relative: cond,
        });
    }
    if hermitian_expected {
        let checks = [
            (ViolationKind::BNotHermitian, &m.b - m.b.adjoint(), norm(&m.b)),
            (ViolationKind::WNotHermitian, &m.w - m.w.adjoint(), norm(&m.w)),
            (ViolationKind::YNotMinusPAdjoint, &m.y + m.p.adjoint(), norm(&m.p).max(norm(&m.y))),
        ];
        for (kind, diff, scale) in checks {
            let residual = norm(&diff);
            let relative = relative_residual(residual, scale);
            if relative > HERMITIAN_TOL {
                violations.push(Violation {
                    kind,
                    magnitude: residual,
                    relative,
                });
            }
        }
    }
    ValidationReport { violations }
}

fn scalar(z: Complex64) -> CMat {
    CMat::from_element(1, 1, z)
}

/// N = 1 medium from four scalars.
pub fn make_scalar_medium(b: Complex64, p: Complex64, y: Complex64, w: Complex64) -> Result<MslCoefficients> {
    if b == Complex64::new(0.0, 0.0) || !b.re.is_finite() || !b.im.is_finite() {
        return Err(MslError::SingularB { cond: f64::INFINITY });
    }
    MslCoefficients::new(scalar(b), scalar(p), scalar(y), scalar(w))
}

/// Real-valued convenience wrapper around [`make_scalar_medium`].
pub fn make_real_scalar_medium(b: f64, p: f64, y: f64, w: f64) -> Result<MslCoefficients> {
    make_scalar_medium(c(b, 0.0), c(p, 0.0), c(y, 0.0), c(w, 0.0))
}

/// Schrödinger medium: `b = hbar2_over_2 / mass`, `w = energy − potential`.
pub fn make_quantum_medium(mass: f64, potential: f64, energy: f64, hbar2_over_2: f64) -> Result<MslCoefficients> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(MslError::InvalidInput(format!("mass must be positive, got {mass}")));
    }
    if !(hbar2_over_2 > 0.0) {
        return Err(MslError::InvalidInput(format!("hbar2_over_2 must be positive, got {hbar2_over_2}")));
    }
    make_real_scalar_medium(hbar2_over_2 / mass, 0.0, 0.0, energy - potential)
}

/// Material constants and wave parameters of a transversely isotropic
/// piezoelectric layer carrying shear-horizontal waves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShPiezoParams {
    pub rho: f64,
    pub c44: f64,
    pub e15: f64,
    pub eps11: f64,
    pub omega: f64,
    pub kappa_x: f64,
}

impl ShPiezoParams {
    /// Phase speed along the layers, `omega / kappa_x`.
    pub fn phase_speed(&self) -> f64 {
        self.omega / self.kappa_x
    }

    /// Piezoelectrically stiffened bulk SH speed.
    pub fn bulk_speed(&self) -> f64 {
        ((self.c44 + self.e15 * self.e15 / self.eps11) / self.rho).sqrt()
    }

    /// Copy with `kappa_x = omega / speed`.
    pub fn at_speed(mut self, omega: f64, speed: f64) -> Self {
        self.omega = omega;
        self.kappa_x = omega / speed;
        self
    }

    fn check(&self) -> Result<()> {
        if self.eps11 == 0.0 {
            return Err(MslError::SingularB { cond: f64::INFINITY });
        }
        for (name, v) in [("rho", self.rho), ("c44", self.c44), ("eps11", self.eps11)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(MslError::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// N = 2 medium coupling the SH displacement with the electrostatic potential.
pub fn make_sh_piezo_medium(params: &ShPiezoParams) -> Result<MslCoefficients> {
    params.check()?;
    let ShPiezoParams {
        rho,
        c44,
        e15,
        eps11,
        omega,
        kappa_x,
    } = *params;
    let k2 = kappa_x * kappa_x;
    let b = crate::linalg::real_mat(2, &[c44, e15, e15, -eps11]);
    let w = crate::linalg::real_mat(2, &[rho * omega * omega - c44 * k2, -e15 * k2, -e15 * k2, eps11 * k2]);
    MslCoefficients::new(b, CMat::zeros(2, 2), CMat::zeros(2, 2), w)
}
