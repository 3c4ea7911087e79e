//! Bound states of a symmetric rectangular well from the even/odd
//! transcendental equations. Used as an independent reference for the
//! escape and periodic solvers.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{MslError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellLevel {
    pub energy: f64,
    pub parity: Parity,
}

/// Levels of a well of depth `v0` and full width `width` (potential zero
/// inside, `v0` outside), in increasing energy.
///
/// With `z = k·width/2` and `z0 = (width/2)·sqrt(v0·mass/hbar2_over_2)` the
/// even states solve `z sin z = sqrt(z0² − z²) cos z` and the odd states
/// `−z cos z = sqrt(z0² − z²) sin z`.
pub fn finite_well_oracle(v0: f64, width: f64, mass: f64, hbar2_over_2: f64) -> Result<Vec<WellLevel>> {
    for (name, v) in [("v0", v0), ("width", width), ("mass", mass), ("hbar2_over_2", hbar2_over_2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(MslError::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    let beta = hbar2_over_2 / mass;
    let z0 = 0.5 * width * (v0 / beta).sqrt();
    let root = |z: f64| (z0 * z0 - z * z).max(0.0).sqrt();
    let even = |z: f64| z * z.sin() - root(z) * z.cos();
    let odd = |z: f64| -z * z.cos() - root(z) * z.sin();

    let mut levels = Vec::new();
    let mut lo = 0.0;
    let mut index = 0usize;
    while lo < z0 {
        let hi = (lo + FRAC_PI_2).min(z0);
        let parity = if index.is_multiple_of(2) { Parity::Even } else { Parity::Odd };
        let g = |z: f64| match parity {
            Parity::Even => even(z),
            Parity::Odd => odd(z),
        };
        if let Some(z) = bisect(&g, lo, hi) {
            let energy = (2.0 * z / width).powi(2) * beta;
            if energy < v0 {
                levels.push(WellLevel { energy, parity });
            }
        }
        lo += FRAC_PI_2;
        index += 1;
    }
    Ok(levels)
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut g_lo = g(lo);
    let g_hi = g(hi);
    if g_lo == 0.0 && lo > 0.0 {
        return Some(lo);
    }
    if g_hi == 0.0 {
        return Some(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v == 0.0 {
            return Some(mid);
        }
        if v.signum() == g_lo.signum() {
            lo = mid;
            g_lo = v;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
