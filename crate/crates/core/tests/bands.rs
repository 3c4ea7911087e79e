use msl_transfer::linalg::c;
use msl_transfer::solvers::{
    band_structure, finite_well_oracle, kronig_penney_residuals, linspace, periodic_dispersion, scan_and_refine,
    KronigPenney, ScanOptions,
};
use msl_transfer::Variant;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Textbook equal-mass Kronig-Penney relation (ħ²/2m = 1), coded directly.
fn textbook(v0: f64, a: f64, b: f64, e: f64, q: f64) -> Complex64 {
    let ka = c(e, 0.0).sqrt();
    let kb = c(e - v0, 0.0).sqrt();
    (ka * a).cos() * (kb * b).cos() - (ka / kb + kb / ka) * 0.5 * (ka * a).sin() * (kb * b).sin()
        - c((q * (a + b)).cos(), 0.0)
}

fn bisect_roots(f: impl Fn(f64) -> f64, grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for w in grid.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}

#[test]
fn t_form_equals_textbook_pointwise() {
    let kp = KronigPenney::symmetric(10.0, 1.0, 1.0);
    for i in 1..60 {
        let e = 0.37 * i as f64;
        if (e - 10.0).abs() < 1e-6 {
            continue;
        }
        for q in [0.0, 0.4, 1.3, PI / 2.0] {
            let r = kronig_penney_residuals(&kp, e, q, Variant::T).unwrap();
            let oracle = textbook(10.0, 1.0, 1.0, e, q);
            assert!((r - oracle).norm() < 1e-12, "E = {e}, q = {q}: {r} vs {oracle}");
        }
    }
}

#[test]
fn scalar_forms_share_band_edges_with_textbook() {
    let kp = KronigPenney::symmetric(10.0, 1.0, 1.0);
    let grid = linspace(0.01, 30.0, 1500);
    for q in [0.0, PI / 2.0] {
        let oracle = bisect_roots(|e| textbook(10.0, 1.0, 1.0, e, q).re, &grid);
        assert!(oracle.len() >= 3);
        for v in [Variant::T, Variant::H, Variant::E, Variant::S] {
            let roots = scan_and_refine("energy", |e| kp.residual(e, q, v), &grid, &ScanOptions::default())
                .unwrap()
                .root_values();
            assert_eq!(roots.len(), oracle.len(), "{v} q={q}: {roots:?} vs {oracle:?}");
            for (r, o) in roots.iter().zip(&oracle) {
                assert!((r - o).abs() < 1e-8, "{v}: {r} vs {o}");
            }
        }
    }
}

#[test]
fn general_dispersion_forms_agree() {
    let kp = KronigPenney::symmetric(10.0, 1.0, 1.0);
    let grid = linspace(0.01, 30.0, 1500);
    let q = 0.3 * PI / 2.0;
    let roots = |v| {
        scan_and_refine("energy", |e| periodic_dispersion(&kp.period(e)?, v, q, None), &grid, &ScanOptions::default())
            .unwrap()
            .root_values()
    };
    let reference = roots(Variant::T);
    assert!(reference.len() >= 3);
    for v in [Variant::H, Variant::E, Variant::S] {
        let r = roots(v);
        assert_eq!(r.len(), reference.len(), "{v}");
        for (a, b) in r.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-8, "{v}: {a} vs {b}");
        }
    }
}

#[test]
fn residuals_are_even_in_q() {
    let kp = KronigPenney::symmetric(10.0, 1.0, 0.5);
    for v in [Variant::T, Variant::H, Variant::E, Variant::S] {
        for &(e, q) in &[(3.0, 0.7), (12.0, 1.9)] {
            assert_eq!(kp.residual(e, q, v).unwrap(), kp.residual(e, -q, v).unwrap());
        }
    }
}

#[test]
fn thick_barriers_isolate_the_wells() {
    // V0 = 20, a = 1: two levels; barriers sized so κ_B·b = 40 at the upper level.
    let (v0, a) = (20.0, 1.0);
    let levels: Vec<f64> = finite_well_oracle(v0, a, 1.0, 1.0).unwrap().iter().map(|l| l.energy).collect();
    assert_eq!(levels.len(), 2);
    let b = 40.0 / (v0 - levels[1]).sqrt();
    let kp = KronigPenney::symmetric(v0, a, b);
    let grid = linspace(0.05, v0 - 0.05, 2000);
    for q in [0.0, PI / (a + b)] {
        let roots = scan_and_refine("energy", |e| kp.residual(e, q, Variant::H), &grid, &ScanOptions::default())
            .unwrap()
            .root_values();
        assert_eq!(roots.len(), 2, "{roots:?}");
        for (r, l) in roots.iter().zip(&levels) {
            assert!((r - l).abs() < 1e-6, "{r} vs {l}");
        }
    }
}

#[test]
fn t_form_degrades_where_h_form_does_not() {
    let kp = KronigPenney::symmetric(10.0, 1.0, 60.0 / 10f64.sqrt());
    let e = 1.0;
    assert!(kp.residual(e, 0.3, Variant::H).unwrap().norm().is_finite());
    assert!(kp.residual(e, 0.3, Variant::E).unwrap().norm().is_finite());
    assert!(kp.residual(e, 0.3, Variant::S).unwrap().norm().is_finite());
    let (t, _) = msl_transfer::structure_propagator(&kp.period(e).unwrap(), Variant::T).unwrap();
    let drift = t.diagnostics.det_drift.unwrap();
    assert!(drift > 1e3 || !t.is_finite(), "drift {drift}");
}

#[test]
fn gaps_close_as_the_barrier_vanishes() {
    let (a, b) = (1.0, 0.5);
    let d = a + b;
    let edge = (PI / d).powi(2);
    let kp = KronigPenney::symmetric(1e-8, a, b);
    let grid = linspace(edge - 0.5, edge + 0.5, 400);
    let roots = scan_and_refine("energy", |e| kp.residual(e, PI / d, Variant::H), &grid, &ScanOptions::default())
        .unwrap()
        .root_values();
    assert!(!roots.is_empty());
    let gap = roots.iter().copied().fold(f64::MIN, f64::max) - roots.iter().copied().fold(f64::MAX, f64::min);
    assert!(gap < 1e-6, "{roots:?}");
    assert!(roots.iter().all(|r| (r - edge).abs() < 1e-6));
}

#[test]
fn free_medium_folds_the_parabola() {
    let d = 1.0;
    let free = |e: f64| {
        let m = msl_transfer::make_quantum_medium(1.0, 0.0, e, 1.0)?;
        msl_transfer::LayeredStructure::new(m.clone(), vec![msl_transfer::Layer::new(m.clone(), d)?], m)
    };
    // q = π/2 is avoided: there every Bloch root of this cell sits on a pole
    // of the layer's hybrid matrix (see the next test).
    let q_grid = linspace(0.1, PI - 0.1, 6);
    let bands = band_structure(free, &q_grid, &linspace(0.2, 80.0, 800), Variant::H, &ScanOptions::default()).unwrap();
    for &q in &q_grid {
        let mut expected: Vec<f64> =
            (-3..=3).map(|n| (q + 2.0 * PI * n as f64 / d).powi(2)).filter(|e| *e > 0.2 && *e < 80.0).collect();
        expected.sort_by(f64::total_cmp);
        let got = bands.roots_at(q);
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-8, "{g} vs {e}");
        }
    }
}

#[test]
fn hybrid_form_is_blind_where_its_poles_cancel_the_roots() {
    let free = |e: f64| {
        let m = msl_transfer::make_quantum_medium(1.0, 0.0, e, 1.0)?;
        msl_transfer::LayeredStructure::new(m.clone(), vec![msl_transfer::Layer::new(m.clone(), 1.0)?], m)
    };
    // At qd = π/2 every Bloch root has cos kd = 0, where the layer's hybrid
    // matrix blows up; the two cancel and the H residual is flat.
    let q = PI / 2.0;
    let grid = linspace(0.2, 80.0, 800);
    let expected: Vec<f64> = {
        let mut v: Vec<f64> = (-2..=2).map(|n| (q + 2.0 * PI * n as f64).powi(2)).filter(|e| *e > 0.2 && *e < 80.0).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let h = band_structure(free, &[q], &grid, Variant::H, &ScanOptions::default()).unwrap();
    assert!(h.roots_at(q).is_empty());
    for variant in [Variant::T, Variant::E] {
        let bands = band_structure(free, &[q], &grid, variant, &ScanOptions::default()).unwrap();
        let got = bands.roots_at(q);
        assert_eq!(got.len(), expected.len(), "{variant}: {got:?}");
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-8, "{variant}: {g} vs {e}");
        }
    }
}
