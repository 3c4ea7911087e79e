//! Modes of a homogeneous medium from the quadratic eigenvalue problem
//! `Θ(k) f = (−k² B + i k (P + Y) + W) f = 0`.

use nalgebra::linalg::Schur;
use num_complex::Complex64;

use crate::error::{MslError, Result};
use crate::linalg::{self, c, norm, CMat, CVec, Solver, I};
use crate::medium::MslCoefficients;

/// Relative separation below which two wavenumbers count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// |Im k| below this fraction of max|k| marks a propagating mode.
pub const PROPAGATING_TOL: f64 = 1e-10;
/// Required `‖Θ(k) f0‖ / max(1, ‖Θ(k)‖)`.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// One eigenpair with its linear-form amplitude `a0 = (i k B + P) f0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub k: Complex64,
    pub f0: CVec,
    pub a0: CVec,
}

/// The 2N modes of a medium split into the plus set (Im k > 0, or right-going
/// when propagating) and the minus set.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub plus: Vec<Mode>,
    pub minus: Vec<Mode>,
    pub medium: MslCoefficients,
    pub degenerate: bool,
}

fn columns(modes: &[Mode], pick: impl Fn(&Mode) -> &CVec) -> CMat {
    let n = modes.first().map_or(0, |m| m.f0.len());
    CMat::from_fn(n, modes.len(), |i, j| pick(&modes[j])[i])
}

impl ModeBasis {
    pub fn n(&self) -> usize {
        self.medium.n()
    }

    pub fn f0_plus(&self) -> CMat {
        columns(&self.plus, |m| &m.f0)
    }
    pub fn a0_plus(&self) -> CMat {
        columns(&self.plus, |m| &m.a0)
    }
    pub fn f0_minus(&self) -> CMat {
        columns(&self.minus, |m| &m.f0)
    }
    pub fn a0_minus(&self) -> CMat {
        columns(&self.minus, |m| &m.a0)
    }

    pub fn k_plus(&self) -> Vec<Complex64> {
        self.plus.iter().map(|m| m.k).collect()
    }
    pub fn k_minus(&self) -> Vec<Complex64> {
        self.minus.iter().map(|m| m.k).collect()
    }

    pub fn modes(&self) -> impl Iterator<Item = &Mode> {
        self.plus.iter().chain(self.minus.iter())
    }

    /// max_j |Im k_j|, the growth rate of the worst exponential.
    pub fn max_abs_im_k(&self) -> f64 {
        self.modes().fold(0.0, |a, m| a.max(m.k.im.abs()))
    }

    /// Same basis with mode `j` (plus modes first, then minus) multiplied by `factors[j]`.
    pub fn rescaled(&self, factors: &[Complex64]) -> Self {
        let n = self.plus.len();
        let scale = |m: &Mode, s: Complex64| Mode {
            k: m.k,
            f0: &m.f0 * s,
            a0: &m.a0 * s,
        };
        Self {
            plus: self.plus.iter().zip(&factors[..n]).map(|(m, &s)| scale(m, s)).collect(),
            minus: self.minus.iter().zip(&factors[n..]).map(|(m, &s)| scale(m, s)).collect(),
            medium: self.medium.clone(),
            degenerate: self.degenerate,
        }
    }
}

/// `Θ(k) = −k² B + i k (P + Y) + W`.
pub fn secular_matrix(m: &MslCoefficients, k: Complex64) -> CMat {
    &m.b * (-k * k) + (&m.p + &m.y) * (I * k) + &m.w
}

fn secular_derivative(m: &MslCoefficients, k: Complex64) -> CMat {
    &m.b * (-2.0 * k) + (&m.p + &m.y) * I
}

/// Fill in `a0 = (i k B + P) f0` for every mode.
pub fn linear_form_amplitudes(m: &MslCoefficients, modes: &mut [Mode]) {
    for mode in modes.iter_mut() {
        mode.a0 = (&m.b * (I * mode.k) + &m.p) * &mode.f0;
    }
}

/// Symmetric diagonal scaling that brings the diagonal of B to unit size.
fn variable_scaling(b: &CMat) -> Vec<f64> {
    let (r, cs) = linalg::ruiz_scaling(b);
    r.iter().zip(&cs).map(|(a, b)| (a * b).sqrt()).collect()
}

fn scale_sym(m: &CMat, d: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (d[i] * d[j]))
}

fn relative_residual(m: &MslCoefficients, k: Complex64, f: &CVec) -> f64 {
    let theta = secular_matrix(m, k);
    let r = (&theta * f).norm();
    r / norm(&theta).max(1.0) / f.norm().max(f64::MIN_POSITIVE)
}

/// Right singular vectors of `a` for its `count` smallest singular values.
fn null_vectors(a: &CMat, count: usize) -> Vec<CVec> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    order
        .into_iter()
        .take(count)
        .map(|i| v_t.row(i).adjoint())
        .collect()
}

/// One bordered Newton step on `Θ(k) f = 0`, `f^H f = 1`.
fn newton_step(m: &MslCoefficients, k: Complex64, f: &CVec) -> Option<(Complex64, CVec)> {
    let n = f.len();
    let theta = secular_matrix(m, k);
    let dtheta_f = secular_derivative(m, k) * f;
    let mut jac = CMat::zeros(n + 1, n + 1);
    jac.view_mut((0, 0), (n, n)).copy_from(&theta);
    jac.view_mut((0, n), (n, 1)).copy_from(&dtheta_f);
    jac.view_mut((n, 0), (1, n)).copy_from(&f.adjoint());
    let mut rhs = CMat::zeros(n + 1, 1);
    rhs.view_mut((0, 0), (n, 1)).copy_from(&(-(&theta * f)));
    let step = Solver::new(&jac)?.solve(&rhs);
    let df = step.view((0, 0), (n, 1)).into_owned();
    let k_new = k + step[(n, 0)];
    let f_new = f + CVec::from_column_slice(df.as_slice());
    (k_new.re.is_finite() && k_new.im.is_finite()).then_some((k_new, f_new))
}

fn normalize(f: &CVec) -> CVec {
    let mut out = f / c(f.norm(), 0.0);
    let (idx, _) = out
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bi, bv), (i, z)| if z.norm() > bv + 1e-14 { (i, z.norm()) } else { (bi, bv) });
    let lead = out[idx];
    if lead.norm() > 0.0 {
        out *= lead.conj() / c(lead.norm(), 0.0);
    }
    out
}

/// Solve the QEP by companion linearization in `λ = i k` and split the modes.
pub fn solve_qep(m: &MslCoefficients) -> Result<ModeBasis> {
    m.check_regular_b()?;
    let n = m.n();

    // Work on a rescaled problem: F = D F̃ balances B, k = σ k̃ balances B and W.
    let d = variable_scaling(&m.b);
    let bt = scale_sym(&m.b, &d);
    let ct = scale_sym(&(&m.p + &m.y), &d);
    let wt = scale_sym(&m.w, &d);
    let sigma = {
        let (nb, nw) = (norm(&bt), norm(&wt));
        let nc = norm(&ct);
        if nw > 0.0 {
            (nw / nb).sqrt()
        } else if nc > 0.0 {
            nc / nb
        } else {
            1.0
        }
    };
    let b_hat = &bt * c(sigma * sigma, 0.0);
    let c_hat = &ct * c(sigma, 0.0);
    let scaled = MslCoefficients::new(b_hat.clone(), c_hat.clone(), CMat::zeros(n, n), wt.clone())?;

    let rhs = linalg::assemble_cols(&(-&wt), &(-&c_hat));
    let (lower, _) = linalg::left_divide(&b_hat, &rhs, f64::INFINITY)
        .map_err(|cond| MslError::SingularB { cond })?;
    let mut companion = CMat::zeros(2 * n, 2 * n);
    companion.view_mut((0, n), (n, n)).copy_from(&linalg::identity(n));
    companion.view_mut((n, 0), (n, 2 * n)).copy_from(&lower);
    if !linalg::all_finite(&companion) {
        return Err(MslError::Solver {
            what: "non-finite companion matrix".into(),
            residual: f64::NAN,
        });
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 10_000).ok_or_else(|| MslError::Solver {
        what: "Schur iteration did not converge".into(),
        residual: f64::NAN,
    })?;
    let lambdas = schur.eigenvalues().ok_or_else(|| MslError::Solver {
        what: "Schur form not triangular".into(),
        residual: f64::NAN,
    })?;
    let k_scaled: Vec<Complex64> = lambdas.iter().map(|l| -I * l).collect();

    // Group nearly equal wavenumbers; each group shares a null space.
    let kmax = k_scaled.iter().fold(0.0f64, |a, k| a.max(k.norm()));
    let cluster_tol = DEGENERACY_TOL * kmax.max(1.0);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut assigned = vec![false; k_scaled.len()];
    for i in 0..k_scaled.len() {
        if assigned[i] {
            continue;
        }
        let mut group = vec![i];
        assigned[i] = true;
        for j in i + 1..k_scaled.len() {
            if !assigned[j] && (k_scaled[i] - k_scaled[j]).norm() <= cluster_tol {
                group.push(j);
                assigned[j] = true;
            }
        }
        clusters.push(group);
    }
    let degenerate = clusters.iter().any(|g| g.len() > 1);

    let mut raw = Vec::with_capacity(2 * n);
    for group in &clusters {
        let mean = group.iter().map(|&i| k_scaled[i]).sum::<Complex64>() / c(group.len() as f64, 0.0);
        let vecs = null_vectors(&secular_matrix(&scaled, mean), group.len().min(n));
        for (slot, &idx) in group.iter().enumerate() {
            let mut kt = if group.len() > 1 { mean } else { k_scaled[idx] };
            let mut ft = normalize(&vecs[slot.min(vecs.len() - 1)]);
            if group.len() == 1 {
                if let Some((k_new, f_new)) = newton_step(&scaled, kt, &ft) {
                    let f_new = normalize(&f_new);
                    if relative_residual(&scaled, k_new, &f_new) <= relative_residual(&scaled, kt, &ft) {
                        kt = k_new;
                        ft = f_new;
                    }
                }
            }
            let f = normalize(&CVec::from_fn(n, |i, _| ft[i] * d[i]));
            let k = kt * sigma;
            let residual = relative_residual(m, k, &f);
            if !(residual <= RESIDUAL_TOL) {
                return Err(MslError::Solver {
                    what: format!("mode k = {k} fails the residual check"),
                    residual,
                });
            }
            raw.push(Mode {
                k,
                f0: f,
                a0: CVec::zeros(n),
            });
        }
    }
    linear_form_amplitudes(m, &mut raw);
    let (plus, minus) = partition_modes(raw, n)?;
    Ok(ModeBasis {
        plus,
        minus,
        medium: m.clone(),
        degenerate,
    })
}

fn describe(ks: &[Complex64]) -> String {
    ks.iter().map(|k| format!("{k:.6e}")).collect::<Vec<_>>().join(", ")
}

/// Split 2N modes into N plus modes and N minus modes.
///
/// Evanescent modes go by the sign of Im k; propagating ones (|Im k| within
/// [`PROPAGATING_TOL`] of max|k|) by the sign of Re k. Modes with k ≈ 0 fill
/// whichever set is short.
pub fn partition_modes(modes: Vec<Mode>, n: usize) -> Result<(Vec<Mode>, Vec<Mode>)> {
    if modes.len() != 2 * n {
        return Err(MslError::Partition(format!("expected {} modes, got {}", 2 * n, modes.len())));
    }
    let kmax = modes.iter().fold(0.0f64, |a, m| a.max(m.k.norm()));
    let tol = PROPAGATING_TOL * kmax;
    let (mut plus, mut minus, mut loose) = (Vec::new(), Vec::new(), Vec::new());
    for mode in modes {
        if mode.k.im > tol {
            plus.push(mode);
        } else if mode.k.im < -tol {
            minus.push(mode);
        } else if mode.k.re > tol {
            plus.push(mode);
        } else if mode.k.re < -tol {
            minus.push(mode);
        } else {
            loose.push(mode);
        }
    }
    if plus.len() > n || minus.len() > n {
        let all: Vec<Complex64> = plus.iter().chain(&minus).chain(&loose).map(|m| m.k).collect();
        return Err(MslError::Partition(format!(
            "{} plus and {} minus modes for N = {n}: {}",
            plus.len(),
            minus.len(),
            describe(&all)
        )));
    }
    for mode in loose {
        if plus.len() < n {
            plus.push(mode);
        } else {
            minus.push(mode);
        }
    }
    let key = |a: &Mode, b: &Mode| a.k.im.total_cmp(&b.k.im).then(a.k.re.total_cmp(&b.k.re));
    plus.sort_by(key);
    minus.sort_by(key);
    Ok((plus, minus))
}

/// Largest distance from each k to the nearest conjugate in the spectrum,
/// relative to max(1, max|k|).
pub fn conjugate_pairing_error(basis: &ModeBasis) -> f64 {
    let ks: Vec<Complex64> = basis.modes().map(|m| m.k).collect();
    let scale = ks.iter().fold(1.0f64, |a, k| a.max(k.norm()));
    ks.iter()
        .map(|k| ks.iter().map(|q| (q - k.conj()).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
        / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::medium::{make_quantum_medium, make_real_scalar_medium, make_sh_piezo_medium, ShPiezoParams};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn secular_matrix_values() {
        let ev = make_real_scalar_medium(1.0, 0.0, 0.0, -1.0).unwrap();
        assert!(secular_matrix(&ev, I)[(0, 0)].norm() < 1e-15);
        let pr = make_real_scalar_medium(1.0, 0.0, 0.0, 4.0).unwrap();
        assert_eq!(secular_matrix(&pr, ZERO)[(0, 0)], c(4.0, 0.0));
    }

    #[test]
    fn evanescent_and_propagating_roots() {
        let ev = solve_qep(&make_real_scalar_medium(1.0, 0.0, 0.0, -1.0).unwrap()).unwrap();
        assert!(close(ev.plus[0].k, I, 1e-14));
        assert!(close(ev.minus[0].k, -I, 1e-14));
        // a0 = i k f0 with B = 1
        assert!(close(ev.plus[0].a0[0], c(-1.0, 0.0), 1e-14));
        let pr = solve_qep(&make_real_scalar_medium(1.0, 0.0, 0.0, 4.0).unwrap()).unwrap();
        assert!(close(pr.plus[0].k, c(2.0, 0.0), 1e-14));
        assert!(close(pr.minus[0].k, c(-2.0, 0.0), 1e-14));
        assert!(close(pr.plus[0].a0[0], c(0.0, 2.0), 1e-14));
    }

    #[test]
    fn quantum_barrier_roots() {
        let b = solve_qep(&make_quantum_medium(1.0, 10.0, 4.0, 1.0).unwrap()).unwrap();
        assert!(close(b.plus[0].k, c(0.0, 6f64.sqrt()), 1e-13));
    }

    #[test]
    fn band_edge_is_degenerate() {
        let basis = solve_qep(&make_quantum_medium(1.0, 4.0, 4.0, 1.0).unwrap()).unwrap();
        assert!(basis.degenerate);
        assert_eq!(basis.plus.len(), 1);
        assert_eq!(basis.minus.len(), 1);
        assert!(basis.plus[0].k.norm() < 1e-12);
    }

    #[test]
    fn doubly_degenerate_free_medium() {
        let b = linalg::real_mat(2, &[1.0, 0.0, 0.0, 1.0]);
        let w = linalg::real_mat(2, &[4.0, 0.0, 0.0, 4.0]);
        let m = MslCoefficients::new(b, CMat::zeros(2, 2), CMat::zeros(2, 2), w).unwrap();
        let basis = solve_qep(&m).unwrap();
        assert!(basis.degenerate);
        for mode in &basis.plus {
            assert!(close(mode.k, c(2.0, 0.0), 1e-12));
        }
        for mode in &basis.minus {
            assert!(close(mode.k, c(-2.0, 0.0), 1e-12));
        }
        // the two plus modes span the plane
        assert!(linalg::sigma_min(&basis.f0_plus()) > 0.5);
    }

    #[test]
    fn sh_piezo_eigenstructure() {
        let p = ShPiezoParams {
            rho: 7500.0,
            c44: 2.56e10,
            e15: 12.7,
            eps11: 6.46e-9,
            omega: 2.0 * std::f64::consts::PI * 1e8,
            kappa_x: 2.0 * std::f64::consts::PI * 1e8 / 2400.0,
        };
        let basis = solve_qep(&make_sh_piezo_medium(&p).unwrap()).unwrap();
        let kappa = p.kappa_x;
        let k3 = (-kappa * kappa + p.omega * p.omega * p.rho / (p.c44 + p.e15 * p.e15 / p.eps11)).sqrt();
        assert!(k3.is_nan(), "v_s below bulk speed makes k3 imaginary");
        let k3_im = (kappa * kappa - p.omega * p.omega * p.rho / (p.c44 + p.e15 * p.e15 / p.eps11)).sqrt();
        let mut found = 0;
        for mode in basis.modes() {
            if close(mode.k, c(0.0, -kappa), 1e-10) || close(mode.k, c(0.0, kappa), 1e-10) {
                assert!(mode.f0[0].norm() < 1e-10);
                found += 1;
            } else {
                assert!(close(mode.k, c(0.0, k3_im), 1e-10) || close(mode.k, c(0.0, -k3_im), 1e-10));
                let ratio = mode.f0[1] / mode.f0[0];
                assert!(close(ratio, c(p.e15 / p.eps11, 0.0), 1e-10));
            }
        }
        assert_eq!(found, 2);
    }
}
