use msl_transfer::solvers::escape::escape_scan;
use msl_transfer::solvers::{finite_well_oracle, linspace, ScanOptions};
use msl_transfer::{make_quantum_medium, Layer, LayeredStructure, Result, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn well(v0: f64, width: f64) -> impl Fn(f64) -> Result<LayeredStructure> + Sync + Send {
    move |e| {
        let barrier = make_quantum_medium(1.0, v0, e, 1.0)?;
        let inside = make_quantum_medium(1.0, 0.0, e, 1.0)?;
        LayeredStructure::new(barrier.clone(), vec![Layer::new(inside, width)?], barrier)
    }
}

fn levels(v0: f64, width: f64) -> Vec<f64> {
    finite_well_oracle(v0, width, 1.0, 1.0).unwrap().iter().map(|l| l.energy).collect()
}

#[test]
fn finite_well_matches_transcendental_oracle() {
    let grid = linspace(0.0, 10.0, 2000);
    let oracle = levels(10.0, 2.0);
    assert_eq!(oracle.len(), 3);
    let mut by_variant = Vec::new();
    for v in [Variant::H, Variant::E] {
        let scan = escape_scan("energy", well(10.0, 2.0), v, &grid, &ScanOptions::default()).unwrap();
        let roots = scan.root_values();
        assert_eq!(roots.len(), 3, "{v}: {roots:?}");
        for (r, o) in roots.iter().zip(&oracle) {
            assert!((r - o).abs() < 1e-8, "{v}: {r} vs {o}");
        }
        by_variant.push(roots);
    }
    for (h, e) in by_variant[0].iter().zip(&by_variant[1]) {
        assert!((h - e).abs() < 1e-8);
    }
}

#[test]
fn deep_well_approaches_infinite_well_asymptotics() {
    // Ground state of a deep well: z ≈ (π/2)·z0/(z0 + 1), so E1 sits a
    // relative 2/z0 below the infinite-well value.
    let v0 = 1e6;
    let grid = linspace(0.5, 5.0, 400);
    let scan = escape_scan("energy", well(v0, 2.0), Variant::H, &grid, &ScanOptions::default()).unwrap();
    let e1 = scan.roots[0].value;
    let infinite = (std::f64::consts::PI / 2.0).powi(2);
    let z0 = v0.sqrt();
    let asymptotic = infinite * (z0 / (z0 + 1.0)).powi(2);
    assert!((e1 - asymptotic).abs() / infinite < 1e-5);
    assert!((e1 - infinite).abs() / infinite < 2.5e-3);
    assert!((e1 - levels(v0, 2.0)[0]).abs() < 1e-8);
}

#[test]
fn bound_state_count_matches_oracle_for_random_wells() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..50 {
        let v0 = rng.gen_range(0.5..40.0);
        let width = rng.gen_range(0.3..4.0);
        let grid = linspace(0.0, v0, 1500);
        let scan = escape_scan("energy", well(v0, width), Variant::H, &grid, &ScanOptions::default()).unwrap();
        let oracle = levels(v0, width);
        assert_eq!(scan.roots.len(), oracle.len(), "V0 = {v0}, width = {width}");
    }
}

#[test]
fn roots_do_not_depend_on_layer_splitting() {
    // Splitting the well moves internal interfaces but not the physics.
    let split = |e: f64| -> Result<LayeredStructure> {
        let barrier = make_quantum_medium(1.0, 10.0, e, 1.0)?;
        let inside = make_quantum_medium(1.0, 0.0, e, 1.0)?;
        LayeredStructure::new(
            barrier.clone(),
            vec![Layer::new(inside.clone(), 0.3)?, Layer::new(inside, 1.7)?],
            barrier,
        )
    };
    let grid = linspace(0.0, 10.0, 2000);
    let a = escape_scan("energy", well(10.0, 2.0), Variant::H, &grid, &ScanOptions::default()).unwrap();
    let b = escape_scan("energy", split, Variant::H, &grid, &ScanOptions::default()).unwrap();
    assert_eq!(a.roots.len(), b.roots.len());
    for (x, y) in a.roots.iter().zip(&b.roots) {
        assert!((x.value - y.value).abs() < 1e-9);
    }
}
