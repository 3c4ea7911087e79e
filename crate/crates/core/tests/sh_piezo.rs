mod common;

use msl_transfer::solvers::{linspace, sh_wave_speeds, ScanOptions, ShMaterial, ShStack};
use msl_transfer::{make_sh_piezo_medium, solve_qep};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pzt4() -> ShMaterial {
    ShMaterial { rho: 7500.0, c44: 2.56e10, e15: 12.7, eps11: 6.46e-9 }
}

fn pzt5a() -> ShMaterial {
    ShMaterial { rho: 7750.0, c44: 2.11e10, e15: 12.3, eps11: 8.11e-9 }
}

#[test]
fn qep_reproduces_closed_form_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let p = common::random_sh_params(&mut rng);
        let m = make_sh_piezo_medium(&p).unwrap();
        let basis = solve_qep(&m).unwrap();
        for (k, f) in common::sh_closed_form_modes(&p) {
            assert!(common::row_scaled_residual(&m, k, &f) < 1e-10, "{p:?}");
            let mode = basis.modes().min_by(|a, b| (a.k - k).norm().total_cmp(&(b.k - k).norm())).unwrap();
            assert!((mode.k - k).norm() / k.norm() < 1e-10, "{} vs {k}", mode.k);
            assert!(common::sin_angle(&f, mode.f0.as_slice()) < 1e-10);
        }
        // All four decay or grow: the outgoing sets are evanescent below the bulk speed.
        assert!(basis.k_plus().iter().all(|k| k.im > 0.0));
    }
}

#[test]
fn homogeneous_nine_layer_stack_guides_nothing() {
    let a = pzt4();
    let stack = ShStack::alternating(a, a, 9, 5e-6);
    let grid = linspace(0.5 * a.bulk_speed(), 0.999 * a.bulk_speed(), 300);
    let out = sh_wave_speeds(&stack, 3.2e9, &grid, &ScanOptions::default()).unwrap();
    assert!(out.scan.roots.is_empty(), "{:?}", out.scan.roots);
}

/// Distance from the lowest three-layer speed to the nearest nine-layer speed.
fn n9_to_n3_gap(omega: f64) -> f64 {
    let (a, b) = (pzt4(), pzt5a());
    let grid = linspace(b.bulk_speed() * 1.0001, a.bulk_speed() * 0.9999, 700);
    let opts = ScanOptions { tol: 1e-9, ..Default::default() };
    let three = sh_wave_speeds(&ShStack::alternating(a, b, 1, 5e-6), omega, &grid, &opts).unwrap();
    let nine = sh_wave_speeds(&ShStack::alternating(a, b, 7, 5e-6), omega, &grid, &opts).unwrap();
    let v3 = three.scan.roots.first().expect("three-layer mode").value;
    nine.scan.roots.iter().map(|r| (r.value - v3).abs()).fold(f64::INFINITY, f64::min)
}

#[test]
fn nine_layer_modes_converge_to_three_layer_modes_as_frequency_grows() {
    let gaps: Vec<f64> = [1.6e9, 3.2e9, 6.4e9, 1.28e10].iter().map(|&w| n9_to_n3_gap(w)).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    assert!(gaps[gaps.len() - 1] < 1e-3, "{gaps:?}");
}
