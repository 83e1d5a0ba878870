use hkelab::space::*;
use proptest::prelude::*;

fn report(g: &MetricMeasureGraph<f64>) -> DoublingReport {
    doubling_report(g, &radius_grid(g).unwrap()).unwrap()
}

#[test]
fn builder_sizes() {
    assert_eq!(build_gasket::<f64>(0).unwrap().n(), 3);
    assert_eq!(build_gasket::<f64>(1).unwrap().n(), 6);
    assert_eq!(build_gasket::<f64>(4).unwrap().n(), 123);
    assert_eq!(build_vicsek::<f64>(1).unwrap().n(), 21);
    assert_eq!(build_lattice2d::<f64>(8).unwrap().n(), 64);
    assert!((build_gasket::<f64>(3).unwrap().total_measure() - 1.0).abs() < 1e-12);
}

#[test]
fn path_volume_exponents() {
    let r = report(&build_path(64, 1.0).unwrap());
    assert!((r.q_lower - 1.0).abs() <= 0.15, "{r:?}");
    assert!((r.q_upper - 1.0).abs() <= 0.15, "{r:?}");
    assert!(r.d >= 1.0 && r.d <= 3.0 + 1e-12);
}

#[test]
fn lattice_volume_exponents() {
    let r = report(&build_lattice2d(16).unwrap());
    assert!((r.q_lower - 2.0).abs() <= 0.2, "{r:?}");
    assert!((r.q_upper - 2.0).abs() <= 0.2, "{r:?}");
}

#[test]
fn gasket_volume_exponents() {
    let r = report(&build_gasket(5).unwrap());
    let q = 3f64.ln() / 2f64.ln();
    assert!((r.q_lower - q).abs() <= 0.15, "{r:?}");
    assert!((r.q_upper - q).abs() <= 0.15, "{r:?}");
}

#[test]
fn report_invariants() {
    for g in [
        build_path::<f64>(20, 1.0).unwrap(),
        build_lattice2d(6).unwrap(),
        build_gasket(3).unwrap(),
        build_vicsek(2).unwrap(),
    ] {
        let r = report(&g);
        assert!(r.d >= 1.0);
        assert!(r.q_lower > 0.0 && r.q_lower <= r.q_upper);
        assert!(r.lambda_perf > 0.0 && r.lambda_perf <= 2.0);
    }
}

#[test]
fn gasket_doubling_stays_bounded() {
    let ds: Vec<f64> = (1..=6).map(|l| {
        let g = build_gasket::<f64>(l).unwrap();
        let plan = plan_sweep(&g, &SweepOptions::default()).unwrap();
        doubling_report(&g, &plan.radii).unwrap().d
    }).collect();
    for d in &ds {
        assert!(*d <= 8.0, "{ds:?}");
    }
}

#[test]
fn doubling_is_scale_invariant() {
    let g = build_gasket::<f64>(3).unwrap();
    let h = g.rescaled(1.0, 2.5, 3.7).unwrap();
    let a = report(&g);
    let b = report(&h);
    assert!((a.d - b.d).abs() < 1e-9 * a.d);
    assert!((a.q_lower - b.q_lower).abs() < 1e-9);
}

#[test]
fn metric_axioms_on_random_triples() {
    use rand::{Rng, SeedableRng};
    let g = build_vicsek::<f64>(2).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (x, y, z) = (rng.gen_range(0..g.n()), rng.gen_range(0..g.n()), rng.gen_range(0..g.n()));
        let dxy = g.dist(x, y).unwrap();
        assert_eq!(dxy, g.dist(y, x).unwrap());
        assert_eq!(dxy == 0.0, x == y);
        assert!(dxy <= g.dist(x, z).unwrap() + g.dist(z, y).unwrap() + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn balls_grow_with_radius(x in 0usize..42, r in 0.01f64..2.0, dr in 0.0f64..1.0) {
        let g = build_gasket::<f64>(3).unwrap();
        let small = ball(&g, x, r).unwrap();
        let big = ball(&g, x, r + dr).unwrap();
        prop_assert!(small.contains(x));
        prop_assert!(small.members.iter().all(|&v| big.contains(v)));
        prop_assert!(small.measure(&g) <= big.measure(&g));
    }
}
