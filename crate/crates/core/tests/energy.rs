use hkelab::energy::*;
use hkelab::space::*;
use hkelab::HkeError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_fn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

#[test]
fn path_energy_examples() {
    let g = build_path::<f64>(3, 1.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let f = [0.0, 1.0, 2.0];
    assert_eq!(energy(&form, &f, &f).unwrap(), 2.0);
    assert_eq!(energy(&form, &[3.0; 3], &[3.0; 3]).unwrap(), 0.0);
    let m = p_energy_measure(&form, &f).unwrap();
    assert_eq!(m.weights, vec![0.5, 1.0, 0.5]);
    assert_eq!(m.total, 2.0);
}

#[test]
fn p1_single_edge() {
    let g = build_path::<f64>(2, 1.0).unwrap();
    let form = EnergyForm::new(&g, 1.0).unwrap();
    let m = p_energy_measure(&form, &[0.0, 1.0]).unwrap();
    assert_eq!(m.weights, vec![0.5, 0.5]);
    assert!(energy(&form, &[0.0, 1.0], &[1.0, 0.0]).is_err());
    assert!(EnergyForm::new(&g, 0.5).is_err());
}

#[test]
fn energy_is_symmetric() {
    let g = build_gasket::<f64>(3).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let f = random_fn(&mut rng, g.n());
        let h = random_fn(&mut rng, g.n());
        let a = energy(&form, &f, &h).unwrap();
        let b = energy(&form, &h, &f).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        assert!(energy(&form, &f, &f).unwrap() >= 0.0);
    }
}

#[test]
fn markov_examples() {
    let g = build_path::<f64>(3, 1.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let c = check_markov(&form, &[-1.0, 0.5, 2.0]).unwrap();
    assert_eq!((c.contracted, c.original), (0.5, 4.5));
    assert!(c.holds);
    let c = check_markov(&form, &[0.0, 0.3, 1.0]).unwrap();
    assert_eq!(c.contracted, c.original);
}

#[test]
fn markov_contraction_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for g in [
        build_path::<f64>(16, 1.0).unwrap(),
        build_lattice2d(5).unwrap(),
        build_gasket(2).unwrap(),
        build_vicsek(1).unwrap(),
    ] {
        let form = EnergyForm::dirichlet(&g);
        for _ in 0..10_000 {
            let f = random_fn(&mut rng, g.n());
            assert!(check_markov(&form, &f).unwrap().holds);
        }
    }
}

#[test]
fn strong_locality() {
    let g = build_path::<f64>(6, 1.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    assert_eq!(check_strong_locality(&form, &[1.0; 6], &[0, 1, 2, 3, 4, 5]).unwrap(), 0.0);
    // a cutoff flat on {0,1,2}, decaying beyond
    let xi = [1.0, 1.0, 1.0, 1.0, 0.5, 0.0];
    assert_eq!(check_strong_locality(&form, &xi, &[0, 1, 2]).unwrap(), 0.0);
    let e = check_strong_locality(&form, &xi, &[2, 3, 4]).unwrap_err();
    assert!(matches!(e, HkeError::Precondition(_)));
}

#[test]
fn identity_on_gasket() {
    let g = build_gasket::<f64>(3).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let f = random_fn(&mut rng, g.n());
        let phi = random_fn(&mut rng, g.n());
        let r = energy_measure_identity_check(&form, &f, &phi).unwrap();
        assert!(r.residual < 1e-10 * r.scale.max(1.0), "{r:?}");
    }
    let f = random_fn(&mut rng, g.n());
    let r = energy_measure_identity_check(&form, &f, &vec![1.0; g.n()]).unwrap();
    assert!((r.lhs - energy(&form, &f, &f).unwrap()).abs() < 1e-12);
    let r = energy_measure_identity_check(&form, &vec![2.0; g.n()], &f).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
}

#[test]
fn generator_examples() {
    let g = build_path::<f64>(2, 1.0).unwrap();
    let gen = assemble_generator(&EnergyForm::dirichlet(&g)).unwrap();
    let d = gen.matrix.to_dense();
    assert_eq!(d.data, vec![1.0, -1.0, -1.0, 1.0]);

    let g = build_gasket::<f64>(3).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let gen = assemble_generator(&form).unwrap();
    let mut out = vec![0.0; g.n()];
    gen.apply(&vec![4.2; g.n()], &mut out);
    assert!(out.iter().all(|v| v.abs() < 1e-9));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let f = random_fn(&mut rng, g.n());
        let h = random_fn(&mut rng, g.n());
        gen.apply(&f, &mut out);
        let lhs = gen.inner(&out, &h);
        let rhs = energy(&form, &f, &h).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0) * 10.0, "{lhs} {rhs}");
    }
}

fn arb_fn(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measure_is_additive_over_partitions(f in arb_fn(42), labels in prop::collection::vec(0usize..4, 42)) {
        let g = build_gasket::<f64>(3).unwrap();
        let form = EnergyForm::dirichlet(&g);
        let m = p_energy_measure(&form, &f).unwrap();
        let parts: f64 = (0..4)
            .map(|k| {
                let set: Vec<usize> = (0..42).filter(|&v| labels[v] == k).collect();
                m.mass(&set)
            })
            .sum();
        let e = energy(&form, &f, &f).unwrap();
        prop_assert!((parts - e).abs() <= 1e-12 * e.max(1.0));
        prop_assert!(m.weights.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn translation_and_scaling(f in arb_fn(25), c in -5.0f64..5.0, a in prop::sample::select(vec![-2.0f64, 0.5, 3.0]), p in prop::sample::select(vec![1.0f64, 1.5, 2.0, 3.0])) {
        let g = build_lattice2d::<f64>(5).unwrap();
        let form = EnergyForm::new(&g, p).unwrap();
        let base = p_energy_measure(&form, &f).unwrap();
        let shifted: Vec<f64> = f.iter().map(|v| v + c).collect();
        let sm = p_energy_measure(&form, &shifted).unwrap();
        for (x, y) in base.weights.iter().zip(&sm.weights) {
            prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        }
        let scaled: Vec<f64> = f.iter().map(|v| a * v).collect();
        let am = p_energy_measure(&form, &scaled).unwrap();
        let k = a.abs().powf(p);
        for (x, y) in base.weights.iter().zip(&am.weights) {
            prop_assert!((k * x - y).abs() <= 1e-12 * y.max(1.0));
        }
    }
}
