use hkelab::energy::*;
use hkelab::space::*;
use hkelab::spectral::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn generator(g: &MetricMeasureGraph<f64>) -> Generator<f64> {
    assemble_generator(&EnergyForm::dirichlet(g)).unwrap()
}

fn spectrum(g: &MetricMeasureGraph<f64>) -> Spectrum<f64> {
    eigendecompose(&generator(g), &SpectralOptions::default()).unwrap()
}

#[test]
fn path2_spectrum_and_kernel() {
    let g = build_path::<f64>(2, 1.0).unwrap();
    let s = spectrum(&g);
    assert!(s.eigenvalues[0].abs() < 1e-14);
    assert!((s.eigenvalues[1] - 2.0).abs() < 1e-14);
    for t in [0.1, 1.0, 3.0] {
        let p = heat_kernel(&s, t, 0, 0).unwrap();
        assert!((p - (0.5 + 0.5 * (-2.0 * t).exp())).abs() < 1e-14);
    }
    assert!(heat_kernel(&s, 0.0, 0, 0).is_err());
}

#[test]
fn path_cosine_spectrum() {
    for n in [4usize, 64] {
        let s = spectrum(&build_path(n, 1.0).unwrap());
        for k in 0..n {
            let exact = 2.0 * (1.0 - (k as f64 * std::f64::consts::PI / n as f64).cos());
            assert!((s.eigenvalues[k] - exact).abs() < 1e-8, "n={n} k={k}");
        }
    }
}

#[test]
fn spectrum_invariants() {
    for g in [build_gasket::<f64>(3).unwrap(), build_vicsek(2).unwrap(), build_lattice2d(6).unwrap()] {
        let s = spectrum(&g);
        assert_eq!(s.method, SpectrumMethod::Dense);
        assert!(s.eigenvalues[0].abs() < 1e-8);
        assert!(s.eigenvalues[1] > 1e-8);
        let c = g.total_measure().powf(-0.5);
        assert!(s.eigenvectors[0].iter().all(|v| (v - c).abs() < 1e-8));
        for (k, r) in s.residuals.iter().enumerate() {
            assert!(*r <= 1e-8, "k={k} residual {r}");
        }
        for j in [0, 1, 5] {
            for k in [0, 1, 5, g.n() - 1] {
                let ip: f64 = (0..g.n()).map(|x| s.eigenvectors[j][x] * s.eigenvectors[k][x] * g.mu()[x]).sum();
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn iterative_matches_dense() {
    let g = build_gasket::<f64>(3).unwrap();
    let gen = generator(&g);
    let dense = eigendecompose(&gen, &SpectralOptions::default()).unwrap();
    let opts = SpectralOptions { dense_cap: 10, k: Some(6), tol: 1e-10 };
    let it = eigendecompose(&gen, &opts).unwrap();
    assert_eq!(it.method, SpectrumMethod::Iterative);
    for k in 0..6 {
        assert!((it.eigenvalues[k] - dense.eigenvalues[k]).abs() < 1e-8);
        assert!(it.residuals[k] < 1e-8);
    }
    let no_k = SpectralOptions { dense_cap: 10, k: None, tol: 1e-10 };
    assert!(eigendecompose(&gen, &no_k).is_err());
}

#[test]
fn heat_kernel_properties() {
    let g = build_gasket::<f64>(3).unwrap();
    let s = spectrum(&g);
    let hk = HeatKernel::new(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let t = rng.gen_range(0.01..5.0);
        let u = rng.gen_range(0.01..5.0);
        let x = rng.gen_range(0..g.n());
        let y = rng.gen_range(0..g.n());
        assert_eq!(hk.p(t, x, y).unwrap(), hk.p(t, y, x).unwrap());
        let rx = hk.row(t, x).unwrap();
        let ry = hk.row(u, y).unwrap();
        let conv: f64 = (0..g.n()).map(|z| rx[z] * ry[z] * g.mu()[z]).sum();
        let direct = hk.p(t + u, x, y).unwrap();
        assert!((conv - direct).abs() <= 1e-8 * direct.abs().max(1.0));
        let mass: f64 = rx.iter().zip(g.mu()).map(|(p, m)| p * m).sum();
        assert!((mass - 1.0).abs() < 1e-10);
        assert!(rx.iter().all(|&p| p > -1e-10));
    }
    let late = hk.p(1e6, 0, 7).unwrap();
    assert!((late - 1.0 / g.total_measure()).abs() < 1e-10);
    let d = hk.diag(0.3).unwrap();
    assert!((d[5] - hk.p(0.3, 5, 5).unwrap()).abs() < 1e-14);
}

#[test]
fn resolvent_examples() {
    let g = build_path::<f64>(3, 1.0).unwrap();
    let gen = generator(&g);
    let h = resolvent_solve(&gen, 1.0, &[0.0, 1.0, 0.0]).unwrap();
    // (L + I) = [[2,-1,0],[-1,3,-1],[0,-1,2]]; inverse column 1 = (1,2,1)/4
    for (a, b) in h.iter().zip([0.25, 0.5, 0.25]) {
        assert!((a - b).abs() < 1e-12);
    }
    let h = resolvent_solve(&gen, 0.5, &[1.0; 3]).unwrap();
    assert!(h.iter().all(|v| (v - 2.0).abs() < 1e-12));
    assert_eq!(resolvent_solve(&gen, 2.0, &[0.0; 3]).unwrap(), vec![0.0; 3]);
    assert!(resolvent_solve(&gen, 0.0, &[1.0; 3]).is_err());
}

#[test]
fn resolvent_identity_and_positivity() {
    let g = build_gasket::<f64>(3).unwrap();
    let gen = generator(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for lambda in [1e-3, 0.1, 10.0] {
        let phi: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sol = resolvent_solve_with(&gen, lambda, &phi, Default::default()).unwrap();
        assert!(sol.relative_residual <= 1e-10);
        assert!(sol.h.iter().all(|&v| v >= 0.0));
        for _ in 0..5 {
            let gf: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = resolvent_identity_check(&gen, lambda, &phi, &sol.h, &gf).unwrap();
            assert!(r.residual <= 1e-9 * r.scale.max(1.0), "{r:?}");
        }
        let ones = vec![1.0; g.n()];
        let r = resolvent_identity_check(&gen, lambda, &phi, &sol.h, &ones).unwrap();
        assert!(r.lhs.abs() < 1e-9);
        assert!(r.residual <= 1e-9 * r.scale);
    }
}

#[test]
fn resolvent_is_laplace_transform_of_semigroup() {
    let g = build_gasket::<f64>(3).unwrap();
    let gen = generator(&g);
    let s = eigendecompose(&gen, &SpectralOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let phi: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(0.0..1.0)).collect();
    for lambda in [0.01, 1.0, 50.0] {
        let h = resolvent_solve(&gen, lambda, &phi).unwrap();
        let q = laplace_resolvent(&s, lambda, &phi).unwrap();
        for (a, b) in h.iter().zip(&q) {
            assert!((a - b).abs() <= 1e-6 * a.abs(), "lambda={lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn harmonic_extension_examples() {
    let m = 10;
    let g = build_path::<f64>(m + 1, 1.0).unwrap();
    let gen = generator(&g);
    let u = harmonic_extension(&gen, &[(0, 1.0), (m, 0.0)]).unwrap();
    for (i, v) in u.iter().enumerate() {
        assert!((v - (1.0 - i as f64 / m as f64)).abs() < 1e-12);
    }
    assert!((gen.form(&u, &u) - 1.0 / m as f64).abs() < 1e-12);

    let g = build_gasket::<f64>(2).unwrap();
    let gen = generator(&g);
    let u = harmonic_extension(&gen, &[(0, 0.7), (1, 0.7), (2, 0.7)]).unwrap();
    assert!(u.iter().all(|v| (v - 0.7).abs() < 1e-12));
    assert!(gen.form(&u, &u).abs() < 1e-12);
    assert!(harmonic_extension(&gen, &[]).is_err());

    // tree: a path 0-1-2-3 with leaves 4 (on 1) and 5 (on 2)
    let edges = [(0, 1), (1, 2), (2, 3), (1, 4), (2, 5)]
        .iter()
        .map(|&(u, v)| Edge { u, v, conductance: 1.0, length: 1.0 })
        .collect();
    let t = MetricMeasureGraph::new(6, edges, vec![1.0; 6], None, Family::Custom).unwrap();
    let gen = generator(&t);
    let u = harmonic_extension(&gen, &[(0, 1.0), (3, 0.0)]).unwrap();
    assert!((u[4] - u[1]).abs() < 1e-12 && (u[5] - u[2]).abs() < 1e-12);
    let mut lu = vec![0.0; 6];
    gen.apply(&u, &mut lu);
    for v in [1, 2, 4, 5] {
        assert!(lu[v].abs() < 1e-10);
    }
}

#[test]
fn harmonic_extension_maximum_principle() {
    let g = build_vicsek::<f64>(2).unwrap();
    let gen = generator(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bnd: Vec<(usize, f64)> = (0..g.n()).step_by(7).map(|v| (v, rng.gen_range(-1.0..1.0))).collect();
    let lo = bnd.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
    let hi = bnd.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
    let u = harmonic_extension(&gen, &bnd).unwrap();
    assert!(u.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
}

#[test]
fn decomposition_is_deterministic() {
    let g = build_gasket::<f64>(3).unwrap();
    let a = spectrum(&g);
    let b = spectrum(&g);
    assert_eq!(a.eigenvalues, b.eigenvalues);
    assert_eq!(a.eigenvectors, b.eigenvectors);
}

