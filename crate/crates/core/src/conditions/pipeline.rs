use serde::{Deserialize, Serialize};

use super::ce::check_ce;
use super::heat::{check_hke, fit_walk_dimension};
use super::pi::check_pi;
use super::report::{ConditionReport, ConditionTag, Verdict, Witness};
use super::scale::ScaleFunction;
use super::suite::spread;
use crate::cutoff::{resolvent_cutoff, CutoffFunction, DEFAULT_KAPPA};
use crate::energy::{assemble_generator, EnergyForm, Generator};
use crate::error::{HkeError, Result};
use crate::space::{doubling_report, plan_sweep, radius_grid, DoublingReport, MetricMeasureGraph, SweepOptions};
use crate::spectral::{eigendecompose, SpectralOptions};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// PI dilation.
    pub sigma: f64,
    /// `κ` of the resolvent cutoffs.
    pub cutoff_kappa: f64,
    /// Number of resolvent cutoffs (centers × scales) fed to CE.
    pub cutoffs: usize,
    /// `κ` of the near-diagonal heat kernel bound.
    pub hke_kappa: f64,
    /// `a` in `Ψ(r) = a r^β` for the heat kernel fits.
    pub time_scale: f64,
    pub sweep_budget: usize,
    pub per_decade: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            cutoff_kappa: DEFAULT_KAPPA,
            cutoffs: 6,
            hke_kappa: 1.0,
            time_scale: 1.0,
            sweep_budget: 100_000,
            per_decade: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub doubling: ConditionReport,
    pub pi: ConditionReport,
    /// Aggregate over the resolvent cutoffs: smallest `δ̂`, largest `Ĉ`.
    pub ce: ConditionReport,
    pub ce_runs: Vec<ConditionReport>,
    pub walk: ConditionReport,
    pub hke: ConditionReport,
    /// Doubling, PI and CE all pass.
    pub analytic_side: bool,
    /// The heat kernel estimates pass; `None` when the graph is too small
    /// for a diffusive window.
    pub heat_kernel_side: Option<bool>,
    /// Both sides agree.
    pub consistent: Option<bool>,
}

/// Volume doubling as a condition report.
pub fn doubling_condition(d: &DoublingReport) -> ConditionReport {
    let mut rep = ConditionReport::new(ConditionTag::Doubling);
    rep.set("D", d.d)
        .set("Q_L", d.q_lower)
        .set("Q_U", d.q_upper)
        .set("lambda_perf", d.lambda_perf);
    rep.worst_witness = Some(Witness::ball(d.d_witness.0, d.d_witness.1));
    rep.verdict = if d.d.is_finite() && d.lambda_perf > 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    rep
}

/// Runs doubling, PI, CE over resolvent cutoffs, the walk-dimension fit and
/// the heat kernel check, and reports both sides of the equivalence.
pub fn main_theorem_pipeline<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    psi: &ScaleFunction,
    cfg: &PipelineConfig,
) -> Result<PipelineReport> {
    if cfg.cutoffs == 0 {
        return Err(HkeError::InvalidParameter("the pipeline needs at least one cutoff".into()));
    }
    let form = EnergyForm::dirichlet(g);
    let grid = radius_grid(g)?;
    let dr = doubling_report(g, &grid)?;
    let doubling = doubling_condition(&dr);

    let plan = plan_sweep(
        g,
        &SweepOptions {
            budget: cfg.sweep_budget,
            per_decade: cfg.per_decade,
            ..SweepOptions::default()
        },
    )?;
    let pi = check_pi(&form, psi, cfg.sigma, &plan, None)?;

    let gen = assemble_generator(&form)?;
    let CeSweep { aggregate: ce, runs: ce_runs, .. } = ce_sweep(g, &gen, psi, cfg.cutoffs, cfg.cutoff_kappa)?;

    let spec = eigendecompose(&gen, &SpectralOptions::default())?;
    let walk = or_inapplicable(ConditionTag::Walk, fit_walk_dimension(g, &spec, cfg.time_scale))?;
    let beta = match psi.power_beta() {
        Some(b) => b,
        None => walk.get("beta").unwrap_or(2.0),
    };
    let hke = or_inapplicable(ConditionTag::Hke, check_hke(g, &spec, beta, cfg.hke_kappa, cfg.time_scale))?;

    let analytic_side = doubling.passed() && pi.passed() && ce.passed();
    let heat_kernel_side = (hke.verdict != Verdict::Inapplicable).then(|| hke.passed());
    Ok(PipelineReport {
        doubling,
        pi,
        ce,
        ce_runs,
        walk,
        hke,
        analytic_side,
        heat_kernel_side,
        consistent: heat_kernel_side.map(|h| h == analytic_side),
    })
}

/// Resolvent cutoffs and their CE reports.
#[derive(Debug, Clone)]
pub struct CeSweep<T: Scalar> {
    /// Smallest `δ̂`, largest `Ĉ`; passes when every run passes.
    pub aggregate: ConditionReport,
    pub runs: Vec<ConditionReport>,
    pub cutoffs: Vec<CutoffFunction<T>>,
}

/// CE over `count` resolvent cutoffs at scales `diam/4` and `diam/8`, the
/// centers spread over the vertex ids.
pub fn ce_sweep<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    gen: &Generator<T>,
    psi: &ScaleFunction,
    count: usize,
    kappa: f64,
) -> Result<CeSweep<T>> {
    if count == 0 {
        return Err(HkeError::InvalidParameter("the CE sweep needs at least one cutoff".into()));
    }
    let form = EnergyForm::dirichlet(g);
    let diam = g.diameter()?;
    let scales = [0.25, 0.125];
    let per_scale = count.div_ceil(scales.len());
    let mut runs = Vec::with_capacity(count);
    let mut cutoffs = Vec::with_capacity(count);
    'outer: for &s in &scales {
        for x0 in spread(g.n(), per_scale) {
            if runs.len() == count {
                break 'outer;
            }
            let r0 = diam * T::lit(s);
            let xi = resolvent_cutoff(g, gen, x0, r0, psi, kappa)?;
            runs.push(check_ce(&form, &xi, x0, r0, psi)?);
            cutoffs.push(xi);
        }
    }
    let mut agg = ConditionReport::new(ConditionTag::Ce);
    let delta_min = runs.iter().filter_map(|r| r.get("delta")).fold(f64::INFINITY, f64::min);
    let (c_max, worst) = runs.iter().fold((0.0f64, None), |(c, w), r| {
        let v = r.get("C").unwrap_or(0.0);
        if v > c {
            (v, r.worst_witness.clone())
        } else {
            (c, w)
        }
    });
    agg.set("delta", delta_min).set("C", c_max).set("cutoffs", runs.len() as f64);
    agg.worst_witness = worst;
    agg.residual = runs.iter().filter_map(|r| r.residual).reduce(f64::max);
    agg.verdict = if runs.iter().all(|r| r.passed()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(CeSweep {
        aggregate: agg,
        runs,
        cutoffs,
    })
}

/// Maps a `NotApplicable` error (an empty diffusive window) to an
/// `Inapplicable` report; other errors pass through.
pub fn or_inapplicable(tag: ConditionTag, r: Result<ConditionReport>) -> Result<ConditionReport> {
    match r {
        Err(HkeError::NotApplicable(msg)) => {
            let mut rep = ConditionReport::new(tag);
            rep.verdict = Verdict::Inapplicable;
            rep.flag(msg);
            Ok(rep)
        }
        other => other,
    }
}
