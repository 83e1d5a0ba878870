//! Checkers and constant fitters for the functional inequalities: Poincaré,
//! upper capacity, cutoff energy and cutoff Sobolev conditions, the
//! two-measure Sobolev–Poincaré pair, balance, Morrey and heat kernel bounds.
//!
//! Every reported constant is a maximum over explicit samples, and the
//! sample attaining it is stored as the report's witness.

mod ce;
mod heat;
pub(crate) mod pencil;
mod pi;
mod pipeline;
mod report;
mod scale;
mod sobolev;
mod suite;

pub use ce::{ce_density, ce_witness_value, check_ce, check_cs, cs_sample, CE_RESIDUAL_THRESHOLD};
pub use heat::{check_hke, fit_walk_dimension};
pub use pi::{capacity, check_cap_upper, check_pi, pi_ball_constant, pi_ball_sup};
pub use pipeline::{
    ce_sweep, doubling_condition, main_theorem_pipeline, or_inapplicable, CeSweep, PipelineConfig, PipelineReport,
};
pub use report::{BorelMeasure, ConditionReport, ConditionTag, SweepRow, Verdict, Witness};
pub use scale::{ScaleFunction, ScaleKind, ScaleTable, Theta};
pub use sobolev::{
    balance_ratio, check_balance, morrey_check, morrey_check_gated, sobolev_exponent, sobolev_poincare_q, sp_equivalence_probe,
    sp_t1, sp_t2, EquivalenceProbe, MORREY_MARGIN,
};
pub use suite::{SuiteOptions, TestSuite};

use crate::error::Result;
use crate::space::MetricMeasureGraph;
use crate::Scalar;

/// A ball as a prefix of its center's distance order; every ball equal to
/// the whole graph shares one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct BallKey {
    pub center: usize,
    pub count: usize,
}

pub(crate) fn ball_key<T: Scalar>(g: &MetricMeasureGraph<T>, x: usize, r: T) -> Result<BallKey> {
    let m = g.metric()?;
    let count = g.ball_count(m, x, r);
    let center = if count == g.n() { 0 } else { x };
    Ok(BallKey { center, count })
}

/// Sorted members of a keyed ball.
pub(crate) fn members_of<T: Scalar>(g: &MetricMeasureGraph<T>, k: BallKey) -> Result<Vec<usize>> {
    let m = g.metric()?;
    let mut v: Vec<usize> = g.ball_prefix(m, k.center, k.count).iter().map(|&i| i as usize).collect();
    v.sort_unstable();
    Ok(v)
}

pub(crate) fn key_mass<T: Scalar>(g: &MetricMeasureGraph<T>, k: BallKey) -> Result<f64> {
    let m = g.metric()?;
    Ok(g.ball_mass(m, k.center, k.count).as_f64())
}
