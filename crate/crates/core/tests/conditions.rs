use hkelab::conditions::*;
use hkelab::cutoff::*;
use hkelab::energy::*;
use hkelab::space::*;
use hkelab::spectral::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exhaustive(g: &MetricMeasureGraph<f64>) -> SweepPlan<f64> {
    let plan = plan_sweep(g, &SweepOptions::default()).unwrap();
    assert_eq!(plan.mode, SweepMode::Exhaustive);
    plan
}

fn spectrum(g: &MetricMeasureGraph<f64>) -> Spectrum<f64> {
    let gen = assemble_generator(&EnergyForm::dirichlet(g)).unwrap();
    eigendecompose(&gen, &SpectralOptions::default()).unwrap()
}

fn gasket_psi() -> ScaleFunction {
    ScaleFunction::power(5f64.ln() / 2f64.ln()).unwrap()
}

fn custom(n: usize, edges: &[(usize, usize, f64)]) -> MetricMeasureGraph<f64> {
    let edges = edges
        .iter()
        .map(|&(u, v, c)| Edge {
            u,
            v,
            conductance: c,
            length: 1.0,
        })
        .collect();
    MetricMeasureGraph::new(n, edges, vec![1.0; n], None, Family::Custom).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

// ---------- brute-force PI oracle ----------

fn centered_mass(g: &MetricMeasureGraph<f64>, b: &[usize], f: &[f64]) -> f64 {
    let m: f64 = b.iter().map(|&v| g.mu()[v]).sum();
    let mean = b.iter().map(|&v| g.mu()[v] * f[v]).sum::<f64>() / m;
    b.iter().map(|&v| g.mu()[v] * (f[v] - mean).powi(2)).sum()
}

fn ratio(g: &MetricMeasureGraph<f64>, form: &EnergyForm<'_, f64>, b: &[usize], sb: &[usize], f: &[f64]) -> f64 {
    let den = p_energy_measure(form, f).unwrap().mass(sb);
    if den <= 1e-300 {
        return 0.0;
    }
    centered_mass(g, b, f) / den
}

/// Random search over 10⁵ functions, then exact coordinate line maximisation
/// of the quotient from the best starts.
fn brute_force_sup(g: &MetricMeasureGraph<f64>, b: &[usize], sb: &[usize], rng: &mut ChaCha8Rng) -> f64 {
    let form = EnergyForm::dirichlet(g);
    let n = g.n();
    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    for _ in 0..100_000 {
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = ratio(g, &form, b, sb, &f);
        if starts.len() < 8 || r > starts[starts.len() - 1].0 {
            starts.push((r, f));
            starts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            starts.truncate(8);
        }
    }
    let quad = |f: &[f64], i: usize, eval: &dyn Fn(&[f64]) -> f64| {
        let mut h = f.to_vec();
        let f0 = eval(&h);
        h[i] = f[i] + 1.0;
        let fp = eval(&h);
        h[i] = f[i] - 1.0;
        let fm = eval(&h);
        (f0, (fp - fm) / 4.0, (fp + fm) / 2.0 - f0)
    };
    let num = |f: &[f64]| centered_mass(g, b, f);
    let den = |f: &[f64]| p_energy_measure(&form, f).unwrap().mass(sb);
    let mut best = 0.0f64;
    for (_, mut f) in starts {
        for _ in 0..400 {
            for i in 0..n {
                let (nn, a, aa) = quad(&f, i, &num);
                let (d, bb, bq) = quad(&f, i, &den);
                // stationary points of (N + 2at + At²)/(D + 2bt + Bt²)
                let (c2, c1, c0) = (aa * bb - a * bq, aa * d - nn * bq, a * d - nn * bb);
                let mut cands = vec![0.0];
                if c2.abs() > 1e-300 {
                    let disc = c1 * c1 - 4.0 * c2 * c0;
                    if disc >= 0.0 {
                        cands.push((-c1 + disc.sqrt()) / (2.0 * c2));
                        cands.push((-c1 - disc.sqrt()) / (2.0 * c2));
                    }
                } else if c1.abs() > 1e-300 {
                    cands.push(-c0 / c1);
                }
                let val = |t: f64| {
                    let q = d + 2.0 * bb * t + bq * t * t;
                    if q <= 1e-300 {
                        0.0
                    } else {
                        (nn + 2.0 * a * t + aa * t * t) / q
                    }
                };
                let t = cands.into_iter().fold(0.0, |acc, t| if val(t) > val(acc) { t } else { acc });
                f[i] += t;
            }
            // keep the iterate bounded
            let s = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if s > 0.0 {
                f.iter_mut().for_each(|v| *v /= s);
            }
        }
        best = best.max(ratio(g, &form, b, sb, &f));
    }
    best
}

#[test]
fn pi_pencil_matches_brute_force_on_small_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let graphs = vec![
        build_path::<f64>(12, 1.0).unwrap(),
        build_lattice2d::<f64>(3).unwrap(),
        build_gasket::<f64>(1).unwrap(),
        custom(7, &[(0, 1, 2.0), (1, 2, 0.5), (2, 0, 1.0), (2, 3, 3.0), (3, 4, 1.0), (4, 5, 0.25), (5, 6, 1.0), (6, 3, 2.0)]),
    ];
    for g in &graphs {
        let form = EnergyForm::dirichlet(g);
        let diam = g.diameter().unwrap();
        let cases = [(0, diam * 0.6, 1.0), (g.n() / 2, diam * 0.4, 2.0), (g.n() - 1, diam * 2.0, 1.0)];
        for (x, r, sigma) in cases {
            let b = ball(g, x, r).unwrap();
            let sb = ball(g, x, r * sigma).unwrap();
            if b.members.len() < 2 {
                continue;
            }
            let (exact, _) = pi_ball_sup(&form, sigma, x, r, None).unwrap().unwrap();
            let brute = brute_force_sup(g, &b.members, &sb.members, &mut rng);
            assert!(rel(exact, brute) < 1e-6, "{:?} x={x} r={r}: pencil {exact} brute {brute}", g.family());
        }
    }
}

#[test]
fn pi_examples() {
    let g = build_path::<f64>(2, 1.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let (v, _) = pi_ball_sup(&form, 1.0, 0, 5.0, None).unwrap().unwrap();
    assert!((v - 0.5).abs() < 1e-14);
    for n in [5usize, 16, 40] {
        let g = build_path::<f64>(n, 1.0).unwrap();
        let form = EnergyForm::dirichlet(&g);
        let (v, _) = pi_ball_sup(&form, 1.0, 0, 10.0 * n as f64, None).unwrap().unwrap();
        let l1 = 2.0 * (1.0 - (std::f64::consts::PI / n as f64).cos());
        assert!(rel(v, 1.0 / l1) < 1e-9, "n = {n}");
    }
    // singleton balls: nothing to deflate against
    let g = build_path::<f64>(6, 1.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    assert_eq!(pi_ball_sup(&form, 1.0, 2, 0.5, None).unwrap().unwrap().0, 0.0);
    assert!(pi_ball_sup(&form, 0.5, 2, 3.0, None).is_err());
}

#[test]
fn pi_report_and_witness() {
    let g = build_gasket::<f64>(3).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let psi = gasket_psi();
    let plan = exhaustive(&g);
    let rep = check_pi(&form, &psi, 1.0, &plan, None).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    assert_eq!(rep.mode, Some(SweepMode::Exhaustive));
    let c = rep.get("C_PI").unwrap();
    assert!(c > 0.0 && c.is_finite());
    let w = rep.worst_witness.clone().unwrap();
    let (x, r) = w.balls[0];
    let again = pi_ball_constant(&form, &psi, 1.0, x, r, None).unwrap().unwrap();
    assert!(rel(c, again) < 1e-9);
    assert!(rep.rows.iter().all(|row| row.ratio <= c));
}

#[test]
fn pi_gasket_levels_stay_in_a_band() {
    let psi = gasket_psi();
    let cs: Vec<f64> = (2..=4)
        .map(|l| {
            let g = build_gasket::<f64>(l).unwrap();
            let rep = check_pi(&EnergyForm::dirichlet(&g), &psi, 1.0, &exhaustive(&g), None).unwrap();
            rep.get("C_PI").unwrap()
        })
        .collect();
    let hi = cs.iter().copied().fold(0.0, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(hi / lo < 3.0, "{cs:?}");
}

#[test]
fn pi_with_p_not_two_is_fitted() {
    let g = build_path::<f64>(16, 1.0).unwrap();
    let gen = assemble_generator(&EnergyForm::dirichlet(&g)).unwrap();
    let spec = spectrum(&g);
    let suite = TestSuite::standard(&g, &gen, Some(&spec), &SuiteOptions::default()).unwrap();
    let form = EnergyForm::new(&g, 3.0).unwrap();
    let rep = check_pi(&form, &ScaleFunction::power(3.0).unwrap(), 1.0, &exhaustive(&g), Some(&suite)).unwrap();
    assert_eq!(rep.verdict, Verdict::Fitted);
    assert!(rep.get("C_PI").unwrap() > 0.0);
    assert!(rep.worst_witness.unwrap().function.is_some());
    assert!(check_pi(&form, &ScaleFunction::power(3.0).unwrap(), 1.0, &exhaustive(&g), None).is_err());
}

#[test]
fn capacity_is_series_resistance_on_paths() {
    let g = build_path::<f64>(30, 1.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    // B(0, 3) = {0, 1, 2}; B(0, 9) = {0..8}; boundary at 9: seven edges
    assert!((capacity(&form, 0, 3.0, 3.0).unwrap() - 1.0 / 7.0).abs() < 1e-12);
    // two arms in parallel around an interior center
    assert!((capacity(&form, 15, 2.0, 3.0).unwrap() - 2.0 / 5.0).abs() < 1e-12);
    // unequal conductances in series: the outer ball B(0, 3.5) ends at vertex 3
    let g = custom(5, &[(0, 1, 2.0), (1, 2, 1.0), (2, 3, 4.0), (3, 4, 1.0)]);
    let form = EnergyForm::dirichlet(&g);
    let c = capacity(&form, 0, 0.5, 7.0).unwrap();
    assert!((c - 1.0 / (0.5 + 1.0 + 0.25 + 1.0)).abs() < 1e-12, "{c}");
}

#[test]
fn capacity_is_parallel_resistance_on_trees() {
    // star with arms of 2, 3 and 4 edges; the 2-arm lies inside the outer ball
    let mut edges = Vec::new();
    let mut next = 1;
    for len in [2usize, 3, 4] {
        let mut prev = 0;
        for _ in 0..len {
            edges.push((prev, next, 1.0));
            prev = next;
            next += 1;
        }
    }
    let g = custom(next, &edges);
    let form = EnergyForm::dirichlet(&g);
    let c = capacity(&form, 0, 0.5, 6.0).unwrap();
    assert!((c - 2.0 / 3.0).abs() < 1e-12, "{c}");
    // binary tree of depth 3 from the root: 2, 4, 8 parallel branches
    let mut edges = Vec::new();
    for v in 1..15 {
        edges.push(((v - 1) / 2, v, 1.0));
    }
    let g = custom(15, &edges);
    let form = EnergyForm::dirichlet(&g);
    // inner {0}, boundary at depth 3: R = 1/2 + 1/4 + 1/8
    let c = capacity(&form, 0, 0.5, 5.0).unwrap();
    assert!((c - 1.0 / (0.5 + 0.25 + 0.125)).abs() < 1e-12, "{c}");
}

#[test]
fn capacity_upper_report() {
    let g = build_path::<f64>(40, 1.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let psi = ScaleFunction::power(2.0).unwrap();
    let rep = check_cap_upper(&form, &psi, 2.0, &exhaustive(&g)).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    let c = rep.get("C_cap").unwrap();
    assert!(c.is_finite() && c > 0.0);
    assert!(rep.flags.iter().any(|f| f.contains("whole graph")));
    assert!(check_cap_upper(&form, &psi, 1.0, &exhaustive(&g)).is_err());
}

fn ce_setup(g: &MetricMeasureGraph<f64>, x0: usize, r0: f64, psi: &ScaleFunction) -> (CutoffFunction<f64>, ConditionReport) {
    let gen = assemble_generator(&EnergyForm::dirichlet(g)).unwrap();
    let xi = resolvent_cutoff(g, &gen, x0, r0, psi, DEFAULT_KAPPA).unwrap();
    let rep = check_ce(&EnergyForm::dirichlet(g), &xi, x0, r0, psi).unwrap();
    (xi, rep)
}

#[test]
fn ce_on_path_and_gasket() {
    let g = build_path::<f64>(128, 1.0).unwrap();
    let psi = ScaleFunction::power(2.0).unwrap();
    let (_, rep) = ce_setup(&g, 64, 32.0, &psi);
    assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.constants);
    assert!(rep.get("delta").unwrap() > 0.0);

    let g = build_gasket::<f64>(4).unwrap();
    let (xi, rep) = ce_setup(&g, 20, 0.25, &gasket_psi());
    assert_eq!(rep.verdict, Verdict::Pass);
    let delta = rep.get("delta").unwrap();
    assert!(delta > 0.0);
    let w = rep.worst_witness.clone().unwrap();
    let again = ce_witness_value(&EnergyForm::dirichlet(&g), &xi.values, &gasket_psi(), 0.25, delta, &w).unwrap();
    assert!(rel(again, rep.get("C").unwrap()) < 1e-9);
    for row in &rep.rows {
        if row.ratio > 0.0 {
            assert!(row.ratio <= rep.get("C").unwrap() * (row.r / 0.25).powf(delta) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn ce_excludes_locally_constant_samples() {
    let g = build_path::<f64>(64, 1.0).unwrap();
    let psi = ScaleFunction::power(2.0).unwrap();
    let (_, rep) = ce_setup(&g, 32, 16.0, &psi);
    assert!(rep.rows.iter().any(|r| r.lhs == 0.0));
    assert!(rep.flags.iter().any(|f| f.contains("excluded")));
    assert!(rep.passed());
}

#[test]
fn ce_implies_cs_and_constant_function_reproduces_ce() {
    let g = build_gasket::<f64>(3).unwrap();
    let psi = gasket_psi();
    let form = EnergyForm::dirichlet(&g);
    let gen = assemble_generator(&form).unwrap();
    let spec = spectrum(&g);
    let suite = TestSuite::standard(&g, &gen, Some(&spec), &SuiteOptions::default()).unwrap();
    for (x0, r0) in [(7usize, 0.25f64), (21, 0.125)] {
        let (xi, ce) = ce_setup(&g, x0, r0, &psi);
        assert!(ce.passed());
        let delta = ce.get("delta").unwrap();
        let cs = check_cs(&form, &xi, x0, r0, &psi, delta, &suite).unwrap();
        assert!(cs.passed());
        assert!(cs.get("C_CS").unwrap().is_finite());

        // f ≡ 1: the CS left side is Γ⟨ξ⟩(B) and its maximal ratio to the CE
        // right side is the CE constant
        let one = vec![1.0; g.n()];
        let mut best = 0.0f64;
        for row in &ce.rows {
            let (lhs, _) = cs_sample(&form, &xi.values, &one, &psi, r0, delta, row.y, row.r).unwrap();
            assert!((lhs - row.lhs).abs() <= 1e-14 * row.lhs.max(1.0));
            if lhs > 0.0 {
                best = best.max(lhs / ((row.r / r0).powf(delta) * row.rhs));
            }
        }
        assert!(rel(best, ce.get("C").unwrap()) < 1e-12);
    }
}

#[test]
fn t1_examples() {
    let g = build_path::<f64>(32, 1.0).unwrap();
    let psi = ScaleFunction::power(2.0).unwrap();
    let plan = exhaustive(&g);
    let rep = sp_t1(&g, &BorelMeasure::zero(32), &Theta::one(), &psi, 2.0, 2.0, &plan).unwrap();
    assert_eq!(rep.get("K").unwrap(), 0.0);
    let mu = BorelMeasure::new(g.mu().to_vec()).unwrap();
    let rep = sp_t1(&g, &mu, &Theta::psi_root(2.0), &psi, 2.0, 2.0, &plan).unwrap();
    assert!((rep.get("K").unwrap() - 1.0).abs() < 1e-14);

    let g = build_path::<f64>(64, 1.0).unwrap();
    let rep = sp_t1(
        &g,
        &BorelMeasure::dirac(64, 20).unwrap(),
        &Theta::psi_over_volume(2.0),
        &psi,
        2.0,
        2.0,
        &exhaustive(&g),
    )
    .unwrap();
    assert!(rep.passed());
    assert!(rep.get("K").unwrap().is_finite());
    let zero_theta = Theta {
        coefficient: 0.0,
        ..Theta::one()
    };
    assert!(sp_t1(&g, &BorelMeasure::zero(64), &zero_theta, &psi, 2.0, 2.0, &exhaustive(&g)).is_err());
}

#[test]
fn t2_with_volume_measure_is_the_poincare_constant() {
    let g = build_gasket::<f64>(3).unwrap();
    let psi = gasket_psi();
    let form = EnergyForm::dirichlet(&g);
    let plan = exhaustive(&g);
    let mu = BorelMeasure::new(g.mu().to_vec()).unwrap();
    let t2 = sp_t2(&form, &mu, &Theta::psi_root(2.0), &psi, 2.0, 1.0, &plan, None).unwrap();
    let pi = check_pi(&form, &psi, 1.0, &plan, None).unwrap();
    let c = t2.get("C").unwrap();
    assert!(rel(c * c, pi.get("C_PI").unwrap()) < 1e-9);
    let sp = sobolev_poincare_q(&form, &psi, 2.0, 1.0, 1.585, &plan, None).unwrap();
    assert!(rel(sp.get("C").unwrap(), c) < 1e-12);
}

#[test]
fn dirac_t2_grows_on_lattices() {
    let psi = ScaleFunction::power(2.0).unwrap();
    let mut ks = Vec::new();
    let mut cs = Vec::new();
    for n in [4usize, 8] {
        let g = build_lattice2d::<f64>(n).unwrap();
        let x = (n / 2) * n + n / 2;
        let nu = BorelMeasure::dirac(n * n, x).unwrap();
        let plan = exhaustive(&g);
        let p = sp_equivalence_probe(&EnergyForm::dirichlet(&g), &nu, &Theta::one(), &psi, 2.0, 1.0, &plan, None).unwrap();
        ks.push(p.t1.get("K").unwrap());
        cs.push(p.t2.get("C").unwrap());
    }
    assert!(ks.iter().all(|k| k.is_finite()) && ks[1] < 1.5 * ks[0], "{ks:?}");
    assert!(cs[1] > cs[0], "{cs:?}");
}

#[test]
fn morrey_on_path_is_the_dirac_t2_maximum() {
    let g = build_path::<f64>(16, 1.0).unwrap();
    let psi = ScaleFunction::power(2.0).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let plan = exhaustive(&g);
    let m = morrey_check(&form, &psi, 1.0, &plan, None).unwrap();
    assert_eq!(m.verdict, Verdict::Pass);
    let cm = m.get("C_M").unwrap();
    let mut best = 0.0f64;
    for z in 0..16 {
        let nu = BorelMeasure::dirac(16, z).unwrap();
        let t2 = sp_t2(&form, &nu, &Theta::psi_over_volume(2.0), &psi, 2.0, 1.0, &plan, None).unwrap();
        best = best.max(t2.get("C").unwrap());
    }
    assert!(rel(cm, best) < 1e-9, "Morrey {cm} vs Dirac T2 {best}");
}

#[test]
fn morrey_is_inapplicable_on_lattices() {
    let g = build_lattice2d::<f64>(8).unwrap();
    let m = morrey_check(&EnergyForm::dirichlet(&g), &ScaleFunction::power(2.0).unwrap(), 1.0, &exhaustive(&g), None)
        .unwrap();
    assert_eq!(m.verdict, Verdict::Inapplicable);
}

#[test]
fn balance_examples() {
    let g = build_gasket::<f64>(3).unwrap();
    let plan = exhaustive(&g);
    let vol = ScaleFunction::volume(&g).unwrap();
    let mu = BorelMeasure::new(g.mu().to_vec()).unwrap();
    let rep = check_balance(&g, &mu, &vol, 2.0, 4.0, 2.0, &plan).unwrap();
    assert!(rep.passed());
    let k = rep.get("K_bal").unwrap();
    assert!(k.is_finite() && k > 0.0);
    let w = rep.worst_witness.clone().unwrap();
    assert!(rel(balance_ratio(&g, &mu, &vol, 2.0, 4.0, &w).unwrap(), k) < 1e-9);

    let rep = check_balance(&g, &BorelMeasure::dirac(g.n(), 0).unwrap(), &gasket_psi(), 2.0, 4.0, 2.0, &plan).unwrap();
    assert!(rep.flags.iter().any(|f| f.contains("Dirac")));

    let g = build_gasket::<f64>(4).unwrap();
    let gen = assemble_generator(&EnergyForm::dirichlet(&g)).unwrap();
    let xi = resolvent_cutoff(&g, &gen, 20, 0.25, &gasket_psi(), DEFAULT_KAPPA).unwrap();
    let nu = BorelMeasure::from_energy(&p_energy_measure(&EnergyForm::dirichlet(&g), &xi.values).unwrap());
    let plan = plan_sweep(&g, &SweepOptions { budget: 2000, per_decade: 4, ..SweepOptions::default() }).unwrap();
    let rep = check_balance(&g, &nu, &gasket_psi(), 2.0, 4.0, 2.0, &plan).unwrap();
    assert!(rep.get("K_bal").unwrap().is_finite());
    assert!(check_balance(&g, &nu, &gasket_psi(), 2.0, 2.0, 1.0, &plan).is_err());
}

#[test]
fn sobolev_exponent_threshold() {
    assert!(sobolev_exponent(2.0, 1.0, 2.0).is_infinite());
    assert!(sobolev_exponent(2.0, 1.585, 2.3219).is_infinite());
    assert!((sobolev_exponent(2.0, 3.0, 2.0) - 6.0).abs() < 1e-15);
    let g = build_lattice2d::<f64>(4).unwrap();
    let form = EnergyForm::dirichlet(&g);
    let psi = ScaleFunction::power(2.0).unwrap();
    let plan = exhaustive(&g);
    assert!(sobolev_poincare_q(&form, &psi, 6.0, 1.0, 3.0, &plan, None).is_err());
    let r = sobolev_poincare_q(&form, &psi, 1.5, 1.0, 3.0, &plan, None).unwrap();
    assert!(r.flags.iter().any(|f| f.contains("q < p")));
}

#[test]
fn walk_dimension_fits() {
    let b = |g: &MetricMeasureGraph<f64>| fit_walk_dimension(g, &spectrum(g), 1.0).unwrap().get("beta").unwrap();
    let path = b(&build_path::<f64>(256, 1.0).unwrap());
    assert!((path - 2.0).abs() <= 0.1, "path {path}");
    let gasket = b(&build_gasket::<f64>(5).unwrap());
    assert!((gasket - 5f64.ln() / 2f64.ln()).abs() <= 0.15, "gasket {gasket}");
    let small = build_gasket::<f64>(3).unwrap();
    assert!(matches!(fit_walk_dimension(&small, &spectrum(&small), 1.0), Err(hkelab::HkeError::NotApplicable(_))));
}

#[test]
fn walk_dimension_is_invariant_under_time_rescaling() {
    let g = build_gasket::<f64>(4).unwrap();
    let beta = fit_walk_dimension(&g, &spectrum(&g), 1.0).unwrap().get("beta").unwrap();
    for a in [0.5, 4.0] {
        // conductances / a slow the walk down by a
        let slow = g.rescaled(1.0 / a, 1.0, 1.0).unwrap();
        let b = fit_walk_dimension(&slow, &spectrum(&slow), a).unwrap().get("beta").unwrap();
        assert_eq!(b, beta);
    }
}

#[test]
fn heat_kernel_check_on_path() {
    let g = build_path::<f64>(256, 1.0).unwrap();
    let rep = check_hke(&g, &spectrum(&g), 2.0, 1.0, 1.0).unwrap();
    assert!(rep.passed());
    let slope = rep.get("tail_slope").unwrap();
    assert!((slope + 0.25).abs() <= 0.3 * 0.25, "slope {slope}");
    assert!(rep.get("c_near").unwrap() > 0.0);
    assert!(check_hke(&g, &spectrum(&g), 1.0, 1.0, 1.0).is_err());
}

#[test]
fn heat_kernel_check_on_gasket() {
    let g = build_gasket::<f64>(5).unwrap();
    let rep = check_hke(&g, &spectrum(&g), 5f64.ln() / 2f64.ln(), 1.0, 1.0).unwrap();
    assert!(rep.passed());
    assert!(rep.get("c_near").unwrap() > 0.0);
}

#[test]
fn phi_closed_form_matches_numeric() {
    for beta in [2.0, 2.3219, 3.0] {
        let psi = ScaleFunction::power(beta).unwrap();
        for s in [0.01, 0.3, 1.0, 4.0, 20.0] {
            let a = psi.phi(s);
            let b = psi.phi_numeric(s);
            assert!(rel(a, b) < 1e-6, "β = {beta}, s = {s}: {a} vs {b}");
        }
    }
}

#[test]
fn pipeline_on_gasket_and_path() {
    let rep = main_theorem_pipeline(&build_gasket::<f64>(4).unwrap(), &gasket_psi(), &PipelineConfig::default()).unwrap();
    assert!(rep.analytic_side);
    assert_eq!(rep.heat_kernel_side, Some(true));
    assert_eq!(rep.consistent, Some(true));
    assert!(rep.ce_runs.len() >= 5);

    let rep = main_theorem_pipeline(&build_gasket::<f64>(3).unwrap(), &gasket_psi(), &PipelineConfig::default()).unwrap();
    assert!(rep.analytic_side);
    assert_eq!(rep.hke.verdict, Verdict::Inapplicable);
    assert_eq!(rep.heat_kernel_side, None);

    let rep = main_theorem_pipeline(
        &build_path::<f64>(128, 1.0).unwrap(),
        &ScaleFunction::power(2.0).unwrap(),
        &PipelineConfig::default(),
    )
    .unwrap();
    assert!(rep.analytic_side);
    assert_eq!(rep.consistent, Some(true));
}

#[test]
fn report_csv_columns() {
    let g = build_path::<f64>(8, 1.0).unwrap();
    let rep = check_pi(&EnergyForm::dirichlet(&g), &ScaleFunction::power(2.0).unwrap(), 1.0, &exhaustive(&g), None).unwrap();
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "y,r,lhs,rhs,ratio");
    assert_eq!(text.lines().count(), rep.rows.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn measure_scaling(a in 0.01f64..100.0, x in 0usize..24, q in prop::sample::select(vec![2.0f64, 3.0])) {
        let g = build_path::<f64>(24, 1.0).unwrap();
        let psi = ScaleFunction::power(2.0).unwrap();
        let plan = exhaustive(&g);
        let gen = assemble_generator(&EnergyForm::dirichlet(&g)).unwrap();
        let suite = TestSuite::standard(&g, &gen, Some(&spectrum(&g)), &SuiteOptions::default()).unwrap();
        let form = EnergyForm::dirichlet(&g);
        let mut w: Vec<f64> = (0..24).map(|v| 1.0 + (v % 3) as f64).collect();
        w[x] += 2.0;
        let nu = BorelMeasure::new(w).unwrap();
        let theta = Theta::psi_root(2.0);
        let base = sp_equivalence_probe(&form, &nu, &theta, &psi, q, 1.0, &plan, Some(&suite)).unwrap();
        let scaled = sp_equivalence_probe(&form, &nu.scaled(a), &theta, &psi, q, 1.0, &plan, Some(&suite)).unwrap();
        let f = a.powf(1.0 / q);
        prop_assert!(rel(scaled.t1.get("K").unwrap(), f * base.t1.get("K").unwrap()) < 1e-12);
        prop_assert!(rel(scaled.t2.get("C").unwrap(), f * base.t2.get("C").unwrap()) < 1e-12);
        prop_assert_eq!(scaled.t1.verdict, base.t1.verdict);
        prop_assert_eq!(scaled.t2.verdict, base.t2.verdict);
    }

    #[test]
    fn pi_witness_reproduces_constant(l in 1u32..4, sigma in prop::sample::select(vec![1.0f64, 2.0, 3.0])) {
        let g = build_gasket::<f64>(l).unwrap();
        let form = EnergyForm::dirichlet(&g);
        let psi = gasket_psi();
        let rep = check_pi(&form, &psi, sigma, &exhaustive(&g), None).unwrap();
        let c = rep.get("C_PI").unwrap();
        let (x, r) = rep.worst_witness.unwrap().balls[0];
        let again = pi_ball_constant(&form, &psi, sigma, x, r, None).unwrap().unwrap();
        prop_assert!(rel(c, again) < 1e-9);
    }
}
