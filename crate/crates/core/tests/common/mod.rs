//! Shared generators for the integration tests.
#![allow(dead_code)]

use msl_transfer::linalg::{c, CMat};
use msl_transfer::{solve_qep, MslCoefficients};
use rand::Rng;

fn random_complex(rng: &mut impl Rng, n: usize, scale: f64) -> CMat {
    CMat::from_fn(n, n, |_, _| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
}

/// Formally hermitian medium: B positive definite, W hermitian, Y = −P†.
pub fn hermitian_medium(rng: &mut impl Rng, n: usize) -> MslCoefficients {
    let x = random_complex(rng, n, 1.0);
    let b = &x * x.adjoint() * c(1.0 / n as f64, 0.0) + msl_transfer::linalg::identity(n) * c(0.5, 0.0);
    let p = random_complex(rng, n, 0.4);
    let y = -p.adjoint();
    let v = random_complex(rng, n, 2.0);
    let w = (&v + v.adjoint()) * c(0.5, 0.0);
    MslCoefficients::new(b, p, y, w).expect("square blocks")
}

/// Hermitian medium whose QEP partitions cleanly, with a thickness giving
/// `max|Im k|·d = target` (or `d = target` when every mode propagates).
pub fn medium_and_thickness(rng: &mut impl Rng, n: usize, target: f64) -> Option<(MslCoefficients, f64)> {
    let m = hermitian_medium(rng, n);
    let basis = solve_qep(&m).ok()?;
    let im = basis.max_abs_im_k();
    let d = if im > 1e-6 { target / im } else { target };
    Some((m, d))
}

pub fn rel_err(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Printed closed-form SH-piezo modes: `(k, F0)` for j = 1..4.
pub fn sh_closed_form_modes(p: &msl_transfer::ShPiezoParams) -> Vec<(num_complex::Complex64, [num_complex::Complex64; 2])> {
    let v_s = p.phase_speed();
    let v = p.bulk_speed();
    let k1 = c(0.0, -p.omega / v_s);
    let k3 = c(0.0, -p.omega * (1.0 / (v_s * v_s) - 1.0 / (v * v)).sqrt());
    let potential = [c(0.0, 0.0), c(1.0, 0.0)];
    let coupled = [c(1.0, 0.0), c(p.e15 / p.eps11, 0.0)];
    vec![(k1, potential), (-k1, potential), (k3, coupled), (-k3, coupled)]
}

/// Worst row-scaled residual `|Θ(k) f|_i / Σ_j |Θ(k)_ij f_j|` of a mode.
pub fn row_scaled_residual(m: &MslCoefficients, k: num_complex::Complex64, f: &[num_complex::Complex64]) -> f64 {
    let theta = msl_transfer::secular_matrix(m, k);
    (0..f.len())
        .map(|i| {
            let terms: Vec<_> = (0..f.len()).map(|j| theta[(i, j)] * f[j]).collect();
            let scale: f64 = terms.iter().map(|t| t.norm()).sum();
            let sum: num_complex::Complex64 = terms.iter().sum();
            if scale == 0.0 { 0.0 } else { sum.norm() / scale }
        })
        .fold(0.0, f64::max)
}

/// Sine of the angle between two vectors, from the residual of projecting
/// `b` onto `a`.
pub fn sin_angle(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> f64 {
    let dot: num_complex::Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let aa: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let bb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    let r: f64 = a.iter().zip(b).map(|(x, y)| (y - x * (dot / aa)).norm_sqr()).sum();
    (r / bb).sqrt()
}

/// Random SH-piezo parameters with the phase speed below the bulk speed.
pub fn random_sh_params(rng: &mut impl Rng) -> msl_transfer::ShPiezoParams {
    let base = msl_transfer::ShPiezoParams {
        rho: rng.gen_range(2000.0..9000.0),
        c44: rng.gen_range(1e10..8e10),
        e15: rng.gen_range(0.5..20.0),
        eps11: rng.gen_range(1e-9..2e-8),
        omega: 1.0,
        kappa_x: 1.0,
    };
    let v = base.bulk_speed();
    base.at_speed(rng.gen_range(1e6..1e10), v * rng.gen_range(0.2..0.98))
}

/// Hermitian medium with every mode evanescent (`W` negative definite, weak
/// `P`). Returns the medium and its smallest `|Im k|`.
pub fn evanescent_medium(rng: &mut impl Rng, n: usize) -> Option<(MslCoefficients, f64)> {
    let x = random_complex(rng, n, 1.0);
    let b = &x * x.adjoint() * c(1.0 / n as f64, 0.0) + msl_transfer::linalg::identity(n) * c(0.5, 0.0);
    let p = random_complex(rng, n, 0.1);
    let y = -p.adjoint();
    let v = random_complex(rng, n, 1.0);
    let w = -(&v * v.adjoint() * c(1.0 / n as f64, 0.0) + msl_transfer::linalg::identity(n)) * c(2.0, 0.0);
    let m = MslCoefficients::new(b, p, y, w).ok()?;
    let basis = solve_qep(&m).ok()?;
    let min_im = basis.modes().map(|mode| mode.k.im.abs()).fold(f64::INFINITY, f64::min);
    (min_im > 0.1 * basis.max_abs_im_k()).then_some((m, min_im))
}
