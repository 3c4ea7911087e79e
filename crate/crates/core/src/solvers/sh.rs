//! Guided shear-horizontal waves in piezoelectric multilayers, found as
//! escape-problem roots over the phase speed along the layers.

use serde::{Deserialize, Serialize};

use crate::error::{MslError, Result};
use crate::medium::{make_sh_piezo_medium, ShPiezoParams};
use crate::propagators::Variant;
use crate::solvers::escape::escape_scan;
use crate::solvers::scan::{check_grid, ScanOptions, SecularScan};
use crate::structure::{Layer, LayeredStructure};

/// Material constants only; `omega` and `kappa_x` are filled in per scan point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShMaterial {
    pub rho: f64,
    pub c44: f64,
    pub e15: f64,
    pub eps11: f64,
}

impl ShMaterial {
    pub fn at(&self, omega: f64, speed: f64) -> ShPiezoParams {
        ShPiezoParams {
            rho: self.rho,
            c44: self.c44,
            e15: self.e15,
            eps11: self.eps11,
            omega,
            kappa_x: 0.0,
        }
        .at_speed(omega, speed)
    }

    pub fn bulk_speed(&self) -> f64 {
        self.at(1.0, 1.0).bulk_speed()
    }
}

/// Half-space, finite layers, half-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShStack {
    pub left: ShMaterial,
    pub layers: Vec<(ShMaterial, f64)>,
    pub right: ShMaterial,
}

impl ShStack {
    /// `outer` on both sides with `count` inner layers alternating
    /// `inner`, `outer`, `inner`, … each of thickness `thickness`.
    pub fn alternating(outer: ShMaterial, inner: ShMaterial, count: usize, thickness: f64) -> Self {
        let layers = (0..count)
            .map(|i| (if i % 2 == 0 { inner } else { outer }, thickness))
            .collect();
        Self {
            left: outer,
            layers,
            right: outer,
        }
    }

    pub fn structure(&self, omega: f64, speed: f64) -> Result<LayeredStructure> {
        let medium = |m: &ShMaterial| make_sh_piezo_medium(&m.at(omega, speed));
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, (m, d))| Layer::new(medium(m).map_err(|e| e.with_layer(i))?, *d))
            .collect::<Result<Vec<_>>>()?;
        LayeredStructure::new(medium(&self.left)?, layers, medium(&self.right)?)
    }

    /// Slower of the two half-space bulk speeds; confinement needs `v_s` below it.
    pub fn outer_bulk_speed(&self) -> f64 {
        self.left.bulk_speed().min(self.right.bulk_speed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShSpeeds {
    pub scan: SecularScan,
    pub warnings: Vec<String>,
}

/// Guided-mode phase speeds at angular frequency `omega`, scanning the
/// H-form escape determinant over `speed_grid`.
pub fn sh_wave_speeds(stack: &ShStack, omega: f64, speed_grid: &[f64], opts: &ScanOptions) -> Result<ShSpeeds> {
    check_grid(speed_grid)?;
    if !(omega > 0.0) {
        return Err(MslError::InvalidInput(format!("omega must be positive, got {omega}")));
    }
    if speed_grid[0] <= 0.0 {
        return Err(MslError::InvalidInput("phase speeds must be positive".into()));
    }
    let mut warnings = Vec::new();
    let limit = stack.outer_bulk_speed();
    if speed_grid[speed_grid.len() - 1] >= limit {
        warnings.push(format!(
            "speed range reaches the outer bulk SH speed {limit:.6}; outgoing waves above it are not evanescent and those points are masked"
        ));
    }
    let scan = escape_scan("v_s", |v| stack.structure(omega, v), Variant::H, speed_grid, opts)?;
    Ok(ShSpeeds { scan, warnings })
}
