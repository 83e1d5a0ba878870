use hkelab::conditions::*;
use hkelab::cutoff::*;
use hkelab::energy::*;
use hkelab::space::*;
use hkelab::HkeError;

fn generator(g: &MetricMeasureGraph<f64>) -> Generator<f64> {
    assemble_generator(&EnergyForm::dirichlet(g)).unwrap()
}

fn gasket_beta() -> f64 {
    5f64.ln() / 2f64.ln()
}

#[test]
fn path_annulus_is_a_linear_ramp() {
    let g = build_path::<f64>(20, 1.0).unwrap();
    // inner = {0, 1, 2}, outer = {0..7}: six edges from the last 1 to the first 0
    let inner = ball(&g, 0, 3.0).unwrap();
    let outer = ball(&g, 0, 8.0).unwrap();
    let c = harmonic_cutoff(&g, &inner, &outer).unwrap();
    assert!((c.energy - 1.0 / 6.0).abs() < 1e-12);
    for i in 2..=8 {
        assert!((c.values[i] - (8 - i) as f64 / 6.0).abs() < 1e-12);
    }
    assert!(c.values[9..].iter().all(|&v| v == 0.0));

    // two-sided annulus: two ramps of five edges
    let inner = ball(&g, 10, 2.0).unwrap();
    let outer = ball(&g, 10, 6.0).unwrap();
    let c = harmonic_cutoff(&g, &inner, &outer).unwrap();
    assert!((c.energy - 0.4).abs() < 1e-12);
}

#[test]
fn harmonic_cutoff_rejections() {
    let g = build_path::<f64>(10, 1.0).unwrap();
    let inner = ball(&g, 0, 2.0).unwrap();
    let whole = ball(&g, 0, 100.0).unwrap();
    assert!(matches!(harmonic_cutoff(&g, &inner, &whole), Err(HkeError::InvalidParameter(_))));
    let same = ball(&g, 0, 1.5).unwrap();
    assert!(matches!(harmonic_cutoff(&g, &inner, &same), Err(HkeError::Degenerate(_))));
    let elsewhere = ball(&g, 9, 3.0).unwrap();
    assert!(harmonic_cutoff(&g, &inner, &elsewhere).is_err());
}

#[test]
fn gasket_nested_balls() {
    let g = build_gasket::<f64>(3).unwrap();
    let inner = ball(&g, 0, 0.2).unwrap();
    let outer = ball(&g, 0, 0.5).unwrap();
    let c = harmonic_cutoff(&g, &inner, &outer).unwrap();
    assert!(c.energy > 0.0);
    assert!(c.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    c.validate(&g).unwrap();
    // harmonic in the annulus: zero generator away from the boundary data
    let gen = generator(&g);
    let mut lf = vec![0.0; g.n()];
    gen.apply(&c.values, &mut lf);
    for v in 0..g.n() {
        if outer.contains(v) && !inner.contains(v) {
            assert!(lf[v].abs() < 1e-9, "not harmonic at {v}: {}", lf[v]);
        }
    }
    let direct = energy(&EnergyForm::dirichlet(&g), &c.values, &c.values).unwrap();
    assert!((direct - c.energy).abs() < 1e-12 * direct.max(1.0));
}

#[test]
fn constant_source_gives_half() {
    // φ ≡ 1 gives h = G_λ 1 = 1/λ = Ψ(R0), so K = min h/(2Ψ) = 1/2
    let g = build_path::<f64>(40, 1.0).unwrap();
    let gen = generator(&g);
    let psi = ScaleFunction::power(2.0).unwrap();
    let c = resolvent_cutoff_from_source(&g, &gen, 20, 10.0, &psi, 0.5, &vec![1.0; 40]).unwrap();
    let p = c.params.unwrap();
    assert!((p.k - 0.5).abs() < 1e-9);
    assert!((p.lambda - 0.01).abs() < 1e-15);
}

#[test]
fn path_resolvent_cutoff_is_unimodal() {
    let g = build_path::<f64>(200, 1.0).unwrap();
    let gen = generator(&g);
    let psi = ScaleFunction::power(2.0).unwrap();
    let c = resolvent_cutoff(&g, &gen, 100, 25.0, &psi, 1.0).unwrap();
    c.validate(&g).unwrap();
    assert_eq!(c.values[100], 1.0);
    assert_eq!(c.values[0], 0.0);
    assert_eq!(c.values[199], 0.0);
    for i in 100..199 {
        assert!(c.values[i + 1] <= c.values[i], "not monotone at {i}");
    }
    for i in 1..=100 {
        assert!(c.values[i - 1] <= c.values[i], "not monotone at {i}");
    }
    assert!(c.energy > 0.0);
    assert!(!c.params.unwrap().localization_failed);
}

#[test]
fn gasket_resolvent_cutoffs_localize() {
    let g = build_gasket::<f64>(4).unwrap();
    let gen = generator(&g);
    let psi = ScaleFunction::power(gasket_beta()).unwrap();
    for (x0, r0) in [(0, 0.25), (20, 0.25), (61, 0.25), (20, 0.125), (102, 0.125)] {
        let c = resolvent_cutoff(&g, &gen, x0, r0, &psi, DEFAULT_KAPPA).unwrap();
        c.validate(&g).unwrap();
        let p = c.params.unwrap();
        assert!(p.sigma <= 8.0, "σ = {} at ({x0}, {r0})", p.sigma);
        assert!(p.k > 0.0);
        assert!(c.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn resolvent_cutoff_rejections() {
    let g = build_path::<f64>(30, 1.0).unwrap();
    let gen = generator(&g);
    let psi = ScaleFunction::power(2.0).unwrap();
    assert!(resolvent_cutoff(&g, &gen, 15, 0.0, &psi, 0.5).is_err());
    assert!(resolvent_cutoff(&g, &gen, 15, 100.0, &psi, 0.5).is_err());
    assert!(resolvent_cutoff(&g, &gen, 15, 5.0, &psi, 1.5).is_err());
    assert!(resolvent_cutoff(&g, &gen, 99, 5.0, &psi, 0.5).is_err());
}

#[test]
fn holder_examples() {
    let g = build_path::<f64>(33, 1.0).unwrap();
    let ramp: Vec<f64> = (0..33).map(|i| i as f64 / 32.0).collect();
    let h = holder_report(&g, &ramp, 32.0).unwrap();
    assert!((h.exponent - 1.0).abs() < 1e-9, "α = {}", h.exponent);
    assert!((h.constant - 1.0).abs() < 1e-9);

    let step: Vec<f64> = (0..33).map(|i| if i >= 16 { 1.0 } else { 0.0 }).collect();
    let h = holder_report(&g, &step, 32.0).unwrap();
    assert!(h.exponent < 0.05, "α = {}", h.exponent);
    assert!(h.flags.iter().any(|f| f.contains("jump")));

    let h = holder_report(&g, &[0.3; 33], 32.0).unwrap();
    assert!(h.exponent.is_infinite());
    assert_eq!(h.constant, 0.0);
    assert!(h.flags.iter().any(|f| f.contains("constant")));
}

#[test]
fn holder_bound_holds_on_every_pair() {
    let g = build_gasket::<f64>(3).unwrap();
    let gen = generator(&g);
    let psi = ScaleFunction::power(gasket_beta()).unwrap();
    let c = resolvent_cutoff(&g, &gen, 7, 0.5, &psi, DEFAULT_KAPPA).unwrap();
    let r = 1.0;
    let h = holder_report(&g, &c.values, r).unwrap();
    for y in 0..g.n() {
        for z in 0..g.n() {
            let d = g.dist(y, z).unwrap();
            if d > 0.0 && d <= r {
                let lhs = (c.values[y] - c.values[z]).abs();
                assert!(lhs <= h.constant * (d / r).powf(h.exponent) * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}

#[test]
fn sharp_maximal_properties() {
    let g = build_path::<f64>(40, 1.0).unwrap();
    let m = sharp_maximal(&g, &[2.0; 40], 2.0, 1.0, 10.0).unwrap();
    assert!(m.values.iter().all(|&v| v == 0.0));

    let f: Vec<f64> = (0..40).map(|i| ((i as f64) * 0.3).sin()).collect();
    let m = sharp_maximal(&g, &f, 2.0, 1.0, 10.0).unwrap();
    let scaled: Vec<f64> = f.iter().map(|v| -3.0 * v).collect();
    let ms = sharp_maximal(&g, &scaled, 2.0, 1.0, 10.0).unwrap();
    for (a, b) in m.values.iter().zip(&ms.values) {
        assert!((b - 9.0 * a).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let shifted: Vec<f64> = f.iter().map(|v| v + 5.0).collect();
    let mt = sharp_maximal(&g, &shifted, 2.0, 1.0, 10.0).unwrap();
    for (a, b) in m.values.iter().zip(&mt.values) {
        assert!((b - a).abs() <= 1e-9 * a.abs().max(1.0));
    }
    let wide = sharp_maximal(&g, &f, 2.0, 1.0, 20.0).unwrap();
    assert!(m.values.iter().zip(&wide.values).all(|(a, b)| b >= a));
    assert!(m.values.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!(sharp_maximal(&g, &f, 0.5, 1.0, 10.0).is_err());
}

fn two_point_on(g: &MetricMeasureGraph<f64>, x0: usize, r0: f64, psi: &ScaleFunction) {
    let gen = generator(g);
    let form = EnergyForm::dirichlet(g);
    let xi = resolvent_cutoff(g, &gen, x0, r0, psi, DEFAULT_KAPPA).unwrap();
    let ce = check_ce(&form, &xi, x0, r0, psi).unwrap();
    let delta = ce.get("delta").unwrap();
    assert!(delta > 0.0);
    let diam = g.diameter().unwrap();
    let m = sharp_maximal(g, &xi.values, 2.0, delta, diam).unwrap();
    let t = two_point_check(g, &xi.values, &m).unwrap();
    assert!(t.pairs > 0);
    assert!(t.holds, "fitted {} > bound {}", t.fitted_constant, t.bound);
    assert!(t.fitted_constant <= t.bound);
}

#[test]
fn two_point_estimate_on_path() {
    let g = build_path::<f64>(64, 1.0).unwrap();
    two_point_on(&g, 32, 16.0, &ScaleFunction::power(2.0).unwrap());
}

#[test]
fn two_point_estimate_on_gasket() {
    let g = build_gasket::<f64>(3).unwrap();
    two_point_on(&g, 7, 0.25, &ScaleFunction::power(gasket_beta()).unwrap());
}

#[test]
fn exact_doubling_constant_of_the_path() {
    let g = build_path::<f64>(64, 1.0).unwrap();
    let d = exact_doubling_constant(&g).unwrap();
    assert!(d >= 1.0 && d <= 4.0, "D = {d}");
}

#[test]
fn energy_maximal_is_finite() {
    let g = build_gasket::<f64>(3).unwrap();
    let gen = generator(&g);
    let psi = ScaleFunction::power(gasket_beta()).unwrap();
    let xi = resolvent_cutoff(&g, &gen, 7, 0.5, &psi, DEFAULT_KAPPA).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let m = energy_maximal(&form, &xi.values, &psi, &Theta::one(), 1.0).unwrap();
    assert_eq!(m.values.len(), g.n());
    assert!(m.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(m.values.iter().any(|&v| v > 0.0));
    let z = energy_maximal(&form, &vec![1.0; g.n()], &psi, &Theta::one(), 1.0).unwrap();
    assert!(z.values.iter().all(|&v| v == 0.0));
}
