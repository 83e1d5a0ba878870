//! Executes the steps of a config and writes reports, CSVs, plot data and
//! the manifest.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context as _, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use hkelab::conditions::*;
use hkelab::cutoff::{holder_report, resolvent_cutoff, sharp_maximal, two_point_check, DEFAULT_KAPPA};
use hkelab::energy::{assemble_generator, p_energy_measure, EnergyForm, Generator};
use hkelab::space::*;
use hkelab::spectral::{eigendecompose, HeatKernel, SpectralOptions, Spectrum};
use hkelab::Graph;

use crate::config::{ConditionKind, ConditionSpec, ExperimentConfig, FamilySpec, MeasureSpec, PsiSpec, ThetaSpec};
use crate::manifest::{self, FileEntry, GraphInfo, RunManifest, Status, StepEntry};

const WALK_TOLERANCE: f64 = 0.15;
const PLOT_POINTS: usize = 64;

pub fn build_graph(cfg: &ExperimentConfig) -> Result<Graph> {
    let s = &cfg.graph;
    let opts = FractalOptions {
        renormalized: s.renormalized,
        ..FractalOptions::default()
    };
    let g = match s.family {
        FamilySpec::Path => build_path(s.size.unwrap_or(0), s.edge_length.unwrap_or(1.0))?,
        FamilySpec::Lattice2d => build_lattice2d(s.size.unwrap_or(0))?,
        FamilySpec::Gasket => build_gasket_with(s.level.unwrap_or(0), opts)?,
        FamilySpec::Vicsek => build_vicsek_with(s.level.unwrap_or(0), opts)?,
        FamilySpec::File => {
            let path = s.file.as_deref().ok_or_else(|| anyhow!("graph.file is missing"))?;
            let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_graph(std::io::BufReader::new(f)).with_context(|| format!("graph file {}", path.display()))?
        }
    };
    Ok(g)
}

/// Everything the steps share, computed once before they run.
struct Shared {
    g: Graph,
    gen: Generator<f64>,
    psi: ScaleFunction,
    /// Walk fit behind `Ψ = fit`.
    fitted_beta: Option<f64>,
    spectrum: Option<std::result::Result<Spectrum<f64>, String>>,
    doubling: DoublingReport,
    suite: Option<TestSuite<f64>>,
    diam: f64,
}

impl Shared {
    fn spectrum(&self) -> Result<&Spectrum<f64>> {
        match &self.spectrum {
            Some(Ok(s)) => Ok(s),
            Some(Err(e)) => Err(anyhow!("spectrum unavailable: {e}")),
            None => Err(anyhow!("spectrum was not computed")),
        }
    }

    fn hke_beta(&self) -> f64 {
        self.psi
            .power_beta()
            .unwrap_or(0.5 * (self.psi.beta_lower + self.psi.beta_upper))
    }
}

fn prepare(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<Shared> {
    let g = build_graph(cfg)?;
    let diam = g.diameter()?;
    let steps = cfg.steps();
    let gen = assemble_generator(&EnergyForm::dirichlet(&g))?;
    let fit_psi = matches!(cfg.psi, PsiSpec::Fit);
    let suite_needed = steps.iter().any(|s| s.uses_suite());
    let needs_spectrum = fit_psi
        || (suite_needed && cfg.suite.eigenvectors > 0)
        || steps.iter().any(|s| matches!(s.kind, ConditionKind::Walk | ConditionKind::Hke));
    let spectrum = needs_spectrum.then(|| eigendecompose(&gen, &SpectralOptions::default()).map_err(|e| e.to_string()));
    let (psi, fitted_beta) = match cfg.scale_function()? {
        Some(p) => (p, None),
        None => {
            let spec = match &spectrum {
                Some(Ok(s)) => s,
                Some(Err(e)) => return Err(anyhow!("Ψ = fit needs the spectrum: {e}")),
                None => unreachable!(),
            };
            let walk = fit_walk_dimension(&g, spec, cfg.solver.time_scale).context("Ψ = fit")?;
            let beta = walk.get("beta").ok_or_else(|| anyhow!("walk fit returned no β"))?;
            (ScaleFunction::power(beta)?, Some(beta))
        }
    };
    let doubling = doubling_report(&g, &radius_grid(&g)?)?;
    let suite = if suite_needed {
        let opts = SuiteOptions {
            eigenvectors: cfg.suite.eigenvectors,
            harmonic_cutoffs: cfg.suite.harmonic_cutoffs,
            random: cfg.suite.random,
            smoothed_indicators: cfg.suite.smoothed_indicators,
            seed: seed.unwrap_or(0),
        };
        let spec = match &spectrum {
            Some(Ok(s)) => Some(s),
            _ => None,
        };
        Some(TestSuite::standard(&g, &gen, spec, &opts)?)
    } else {
        None
    };
    Ok(Shared {
        g,
        gen,
        psi,
        fitted_beta,
        spectrum,
        doubling,
        suite,
        diam,
    })
}

/// A finished step before anything is written.
struct StepOutput {
    status: Status,
    report: ConditionReport,
    runs: Vec<ConditionReport>,
    details: Option<Value>,
    /// `(file suffix, contents)`.
    plots: Vec<(String, String)>,
}

fn plan(sh: &Shared, cfg: &ExperimentConfig, spec: &ConditionSpec) -> Result<SweepPlan<f64>> {
    Ok(plan_sweep(
        &sh.g,
        &SweepOptions {
            budget: cfg.solver.sweep_budget,
            per_decade: spec.per_decade.unwrap_or(cfg.solver.per_decade),
            center_stride: cfg.solver.center_stride,
            ..SweepOptions::default()
        },
    )?)
}

fn measure(sh: &Shared, spec: &ConditionSpec) -> Result<BorelMeasure<f64>> {
    let n = sh.g.n();
    let x = spec.vertex.unwrap_or(n / 2);
    Ok(match spec.measure.unwrap_or(MeasureSpec::Volume) {
        MeasureSpec::Volume => BorelMeasure::new(sh.g.mu().to_vec())?,
        MeasureSpec::Dirac => BorelMeasure::dirac(n, x)?,
        MeasureSpec::CutoffEnergy => {
            let xi = resolvent_cutoff(&sh.g, &sh.gen, x, 0.25 * sh.diam, &sh.psi, DEFAULT_KAPPA)?;
            BorelMeasure::from_energy(&p_energy_measure(&EnergyForm::dirichlet(&sh.g), &xi.values)?)
        }
    })
}

fn theta(spec: &ConditionSpec) -> Theta {
    match spec.theta.unwrap_or(ThetaSpec::One) {
        ThetaSpec::One => Theta::one(),
        ThetaSpec::PsiRoot => Theta::psi_root(spec.p()),
        ThetaSpec::PsiOverVolume => Theta::psi_over_volume(spec.p()),
    }
}

fn status_of(rep: &ConditionReport) -> Status {
    match rep.verdict {
        Verdict::Pass | Verdict::Fitted => Status::Pass,
        Verdict::Fail => Status::Fail,
        Verdict::Inapplicable => Status::Inapplicable,
    }
}

fn simple(report: ConditionReport) -> StepOutput {
    StepOutput {
        status: status_of(&report),
        report,
        runs: Vec::new(),
        details: None,
        plots: Vec::new(),
    }
}

/// `(log r/R0, log ρ)` with `ρ` the envelope over centers of a CE run.
fn ce_profile(run: &ConditionReport) -> String {
    let r0 = run.get("R0").unwrap_or(1.0);
    let mut env: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for row in &run.rows {
        let e = env.entry(row.r.to_bits()).or_insert((row.r, f64::NEG_INFINITY));
        e.1 = e.1.max(row.ratio);
    }
    let mut pts: Vec<(f64, f64)> = env.into_values().filter(|p| p.1 > 0.0).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s = String::from("# log(r/R0) log(rho)\n");
    for (r, e) in pts {
        s.push_str(&format!("{:e} {:e}\n", (r / r0).ln(), e.ln()));
    }
    s
}

/// `(t, p_t(x,x))` on a log grid over the report's time window.
fn heat_diag(sh: &Shared, rep: &ConditionReport) -> Result<String> {
    let spec = sh.spectrum()?;
    let lam = &spec.eigenvalues;
    let (lo, hi) = match (rep.get("t_min"), rep.get("t_max")) {
        (Some(a), Some(b)) if a > 0.0 && b > a => (a, b),
        _ => {
            let top = lam.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
            let gap = spec.spectral_gap().unwrap_or(top).max(f64::MIN_POSITIVE);
            (0.1 / top, 10.0 / gap)
        }
    };
    let x = 0;
    let hk = HeatKernel::new(spec);
    let mut s = format!("# t p_t(x,x) at x = {x}\n");
    for i in 0..PLOT_POINTS {
        let t = lo * (hi / lo).powf(i as f64 / (PLOT_POINTS - 1) as f64);
        s.push_str(&format!("{:e} {:e}\n", t, hk.p(t, x, x)?));
    }
    Ok(s)
}

fn run_step(sh: &Shared, cfg: &ExperimentConfig, spec: &ConditionSpec) -> Result<StepOutput> {
    let g = &sh.g;
    let psi = &sh.psi;
    let p = spec.p();
    let form = EnergyForm::new(g, p)?;
    let suite = sh.suite.as_ref().filter(|_| spec.uses_suite());
    let out = match spec.kind {
        ConditionKind::Doubling => simple(doubling_condition(&sh.doubling)),
        ConditionKind::Pi => simple(check_pi(&form, psi, spec.sigma.unwrap_or(1.0), &plan(sh, cfg, spec)?, suite)?),
        ConditionKind::Cap => simple(check_cap_upper(&form, psi, spec.kappa.unwrap_or(2.0), &plan(sh, cfg, spec)?)?),
        ConditionKind::Ce => {
            let sw = ce_sweep(g, &sh.gen, psi, spec.cutoffs.unwrap_or(6), spec.kappa.unwrap_or(DEFAULT_KAPPA))?;
            let plots = sw
                .runs
                .iter()
                .enumerate()
                .map(|(k, r)| (format!("{k}_profile.dat"), ce_profile(r)))
                .collect();
            StepOutput {
                status: status_of(&sw.aggregate),
                report: sw.aggregate,
                runs: sw.runs,
                details: None,
                plots,
            }
        }
        ConditionKind::Cs => cs_step(sh, spec)?,
        ConditionKind::T1 => simple(sp_t1(g, &measure(sh, spec)?, &theta(spec), psi, p, spec.q.unwrap_or(2.0), &plan(sh, cfg, spec)?)?),
        ConditionKind::T2 => simple(sp_t2(
            &form,
            &measure(sh, spec)?,
            &theta(spec),
            psi,
            spec.q.unwrap_or(2.0),
            spec.sigma.unwrap_or(1.0),
            &plan(sh, cfg, spec)?,
            suite,
        )?),
        ConditionKind::Balance => simple(check_balance(
            g,
            &measure(sh, spec)?,
            psi,
            p,
            spec.q.unwrap_or(4.0),
            spec.t.unwrap_or(2.0),
            &plan(sh, cfg, spec)?,
        )?),
        ConditionKind::Morrey => simple(morrey_check(&form, psi, spec.sigma.unwrap_or(1.0), &plan(sh, cfg, spec)?, suite)?),
        ConditionKind::Sobolev => {
            let q_upper = sh.doubling.q_upper;
            let p_star = sobolev_exponent(p, q_upper, psi.beta_lower);
            let q = spec.q.unwrap_or(if p_star.is_finite() { 0.5 * (p + p_star) } else { 2.0 * p });
            simple(sobolev_poincare_q(&form, psi, q, spec.sigma.unwrap_or(1.0), q_upper, &plan(sh, cfg, spec)?, suite)?)
        }
        ConditionKind::Walk => {
            let rep = or_inapplicable(ConditionTag::Walk, fit_walk_dimension(g, sh.spectrum()?, cfg.solver.time_scale))?;
            let mut status = status_of(&rep);
            let mut details = None;
            if let (Some(target), Some(beta)) = (psi.power_beta().filter(|_| sh.fitted_beta.is_none()), rep.get("beta")) {
                let tol = spec.tolerance.unwrap_or(WALK_TOLERANCE);
                status = if (beta - target).abs() <= tol { Status::Pass } else { Status::Fail };
                details = Some(json!({ "target_beta": target, "tolerance": tol }));
            }
            let mut plots = Vec::new();
            if rep.verdict != Verdict::Inapplicable {
                plots.push(("heat_diag.dat".to_string(), heat_diag(sh, &rep)?));
            }
            StepOutput {
                status,
                report: rep,
                runs: Vec::new(),
                details,
                plots,
            }
        }
        ConditionKind::Hke => {
            let rep = or_inapplicable(
                ConditionTag::Hke,
                check_hke(g, sh.spectrum()?, sh.hke_beta(), spec.kappa.unwrap_or(1.0), cfg.solver.time_scale),
            )?;
            let mut out = simple(rep);
            if out.report.verdict != Verdict::Inapplicable {
                out.plots.push(("heat_diag.dat".to_string(), heat_diag(sh, &out.report)?));
            }
            out
        }
        ConditionKind::Holder => holder_step(sh, spec)?,
    };
    Ok(out)
}

/// CS at each cutoff's CE exponent (or the configured `δ`).
fn cs_step(sh: &Shared, spec: &ConditionSpec) -> Result<StepOutput> {
    let suite = sh.suite.as_ref().ok_or_else(|| anyhow!("the CS step needs the test suite"))?;
    let form = EnergyForm::dirichlet(&sh.g);
    let sw = ce_sweep(&sh.g, &sh.gen, &sh.psi, spec.cutoffs.unwrap_or(20), spec.kappa.unwrap_or(DEFAULT_KAPPA))?;
    let mut runs = Vec::new();
    let mut c_max = 0.0f64;
    let mut ce_pass = 0usize;
    let mut all = true;
    for (ce, xi) in sw.runs.iter().zip(&sw.cutoffs) {
        if !ce.passed() && spec.delta.is_none() {
            continue;
        }
        ce_pass += usize::from(ce.passed());
        let delta = match spec.delta.or(ce.get("delta")) {
            Some(d) if d > 0.0 => d,
            _ => continue,
        };
        let x0 = ce.get("x0").unwrap_or(0.0) as usize;
        let r0 = ce.get("R0").ok_or_else(|| anyhow!("CE run without R0"))?;
        let cs = check_cs(&form, xi, x0, r0, &sh.psi, delta, suite)?;
        all &= cs.passed() && cs.get("C_CS").is_some_and(f64::is_finite);
        c_max = c_max.max(cs.get("C_CS").unwrap_or(f64::INFINITY));
        runs.push(cs);
    }
    let mut rep = ConditionReport::new(ConditionTag::Cs);
    rep.set("C_CS", c_max)
        .set("cutoffs", sw.runs.len() as f64)
        .set("ce_passing", ce_pass as f64)
        .set("checked", runs.len() as f64);
    rep.verdict = if all && !runs.is_empty() { Verdict::Pass } else { Verdict::Fail };
    if runs.is_empty() {
        rep.flag("no CE-passing cutoff to check");
    }
    Ok(StepOutput {
        status: status_of(&rep),
        report: rep,
        runs,
        details: None,
        plots: Vec::new(),
    })
}

/// Hölder exponent against `δ̂/2 − 0.1` and the sharp-maximal two-point
/// estimate, on every CE-passing cutoff.
fn holder_step(sh: &Shared, spec: &ConditionSpec) -> Result<StepOutput> {
    let sw = ce_sweep(&sh.g, &sh.gen, &sh.psi, spec.cutoffs.unwrap_or(20), spec.kappa.unwrap_or(DEFAULT_KAPPA))?;
    let mut rows = Vec::new();
    let (mut alpha_min, mut margin_min, mut tp_ratio) = (f64::INFINITY, f64::INFINITY, 0.0f64);
    let mut all = true;
    for (ce, xi) in sw.runs.iter().zip(&sw.cutoffs) {
        if !ce.passed() {
            continue;
        }
        let (Some(delta), Some(r0)) = (ce.get("delta"), ce.get("R0")) else {
            continue;
        };
        let h = holder_report(&sh.g, &xi.values, r0)?;
        let need = delta / 2.0 - 0.1;
        let m = sharp_maximal(&sh.g, &xi.values, 2.0, delta, sh.diam)?;
        let tp = two_point_check(&sh.g, &xi.values, &m)?;
        let ok = h.exponent >= need && tp.holds;
        all &= ok;
        alpha_min = alpha_min.min(h.exponent);
        margin_min = margin_min.min(h.exponent - need);
        tp_ratio = tp_ratio.max(tp.fitted_constant / tp.bound);
        rows.push(json!({
            "x0": ce.get("x0"),
            "R0": r0,
            "delta": delta,
            "alpha": h.exponent,
            "required": need,
            "holder_constant": h.constant,
            "two_point_constant": tp.fitted_constant,
            "two_point_bound": tp.bound,
            "two_point_pairs": tp.pairs,
            "pass": ok,
        }));
    }
    let mut rep = ConditionReport::new(ConditionTag::Holder);
    rep.set("alpha_min", alpha_min)
        .set("margin_min", margin_min)
        .set("two_point_ratio", tp_ratio)
        .set("checked", rows.len() as f64);
    rep.verdict = if all && !rows.is_empty() { Verdict::Pass } else { Verdict::Fail };
    if rows.is_empty() {
        rep.flag("no CE-passing cutoff to check");
    }
    Ok(StepOutput {
        status: status_of(&rep),
        report: rep,
        runs: Vec::new(),
        details: Some(Value::Array(rows)),
        plots: Vec::new(),
    })
}

#[derive(Serialize)]
struct StepFile<'a> {
    name: &'a str,
    kind: ConditionKind,
    params: &'a ConditionSpec,
    status: Status,
    report: Option<&'a ConditionReport>,
    runs: &'a [ConditionReport],
    details: Option<&'a Value>,
    error: Option<&'a str>,
}

/// Serialized writes into the output directory, indexed for the manifest.
struct Writer<'a> {
    dir: &'a Path,
    files: Vec<FileEntry>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: manifest::sha256_hex(bytes),
        });
        Ok(())
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs every step of a validated config. A step's error is recorded in its
/// report and the manifest; the other steps still run.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let started = now();
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let sh = prepare(cfg, cfg.seed)?;
    let steps = cfg.steps();
    let names = cfg.step_names();
    let outputs: Vec<Result<StepOutput>> = steps.par_iter().map(|s| run_step(&sh, cfg, s)).collect();

    let mut w = Writer { dir: out_dir, files: Vec::new() };
    let mut entries = Vec::new();
    for ((spec, name), out) in steps.iter().zip(&names).zip(&outputs) {
        let mut files = vec![format!("{name}.json")];
        let err = out.as_ref().err().map(|e| format!("{e:#}"));
        let file = StepFile {
            name,
            kind: spec.kind,
            params: spec,
            status: out.as_ref().map(|o| o.status).unwrap_or(Status::Error),
            report: out.as_ref().ok().map(|o| &o.report),
            runs: out.as_ref().map(|o| o.runs.as_slice()).unwrap_or(&[]),
            details: out.as_ref().ok().and_then(|o| o.details.as_ref()),
            error: err.as_deref(),
        };
        let mut body = serde_json::to_vec_pretty(&file)?;
        body.push(b'\n');
        w.write(&files[0], &body)?;
        if let Ok(o) = out {
            let with_rows: Vec<&ConditionReport> = std::iter::once(&o.report).chain(&o.runs).filter(|r| !r.rows.is_empty()).collect();
            for (k, r) in with_rows.iter().enumerate() {
                let fname = if with_rows.len() == 1 { format!("{name}.csv") } else { format!("{name}_{k}.csv") };
                let mut buf = Vec::new();
                r.write_csv(&mut buf)?;
                w.write(&fname, &buf)?;
                files.push(fname);
            }
            for (suffix, text) in &o.plots {
                let fname = format!("{name}_{suffix}");
                w.write(&fname, text.as_bytes())?;
                files.push(fname);
            }
        }
        entries.push(StepEntry {
            name: name.clone(),
            kind: spec.kind,
            status: file.status,
            verdict: out.as_ref().ok().map(|o| o.report.verdict),
            constants: out
                .as_ref()
                .map(|o| o.report.constants.iter().map(|(k, v)| (k.clone(), v.is_finite().then_some(*v))).collect())
                .unwrap_or_default(),
            error: err,
            files,
        });
    }

    let m = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: manifest::config_hash(cfg)?,
        compat_hash: manifest::compat_hash(cfg)?,
        seed: cfg.seed,
        graph: GraphInfo {
            family: sh.g.family().to_string(),
            level: cfg.graph.level,
            size: cfg.graph.size,
            renormalized: cfg.graph.renormalized,
            vertices: sh.g.n(),
            edges: sh.g.edges().len(),
        },
        psi_beta: sh.psi.power_beta(),
        started_unix: started,
        finished_unix: now(),
        steps: entries,
        files: w.files,
    };
    let mut body = serde_json::to_vec_pretty(&m)?;
    body.push(b'\n');
    std::fs::write(out_dir.join(manifest::MANIFEST_FILE), body)?;
    Ok(m)
}
