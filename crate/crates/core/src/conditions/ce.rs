use super::report::{Argmax, ConditionReport, ConditionTag, SweepRow, Verdict, Witness};
use super::scale::ScaleFunction;
use super::suite::TestSuite;
use crate::cutoff::CutoffFunction;
use crate::energy::{p_energy_measure, EnergyForm};
use crate::error::{HkeError, Result};
use crate::fit::{linear_fit, spacing_weights};
use crate::space::{radius_grid, MetricMeasureGraph, SweepMode};
use crate::Scalar;

/// Largest rms log-residual of the envelope fit for a CE pass.
pub const CE_RESIDUAL_THRESHOLD: f64 = 1.0;

fn check_r0<T: Scalar>(g: &MetricMeasureGraph<T>, x0: usize, r0: T) -> Result<()> {
    if x0 >= g.n() {
        return Err(HkeError::VertexOutOfRange(x0));
    }
    if !(r0 > T::zero()) {
        return Err(HkeError::InvalidParameter(format!("R0 must be positive, got {r0}")));
    }
    Ok(())
}

/// Grid radii up to `3R0`.
fn ce_radii<T: Scalar>(g: &MetricMeasureGraph<T>, r0: T) -> Result<Vec<T>> {
    let top = r0 * T::lit(3.0);
    Ok(radius_grid(g)?.into_iter().filter(|&r| r <= top).collect())
}

/// Cumulative sums of `w` along the distance order from `y`.
fn prefix_sums<T: Scalar>(g: &MetricMeasureGraph<T>, y: usize, w: &[f64]) -> Result<(Vec<T>, Vec<f64>)> {
    let row = g.dist_row(y)?;
    let mut idx: Vec<usize> = (0..g.n()).collect();
    idx.sort_by(|&a, &b| crate::scalar::total_cmp(&row[a], &row[b]).then(a.cmp(&b)));
    let dists: Vec<T> = idx.iter().map(|&v| row[v]).collect();
    let mut acc = 0.0;
    let sums = idx
        .iter()
        .map(|&v| {
            acc += w[v];
            acc
        })
        .collect();
    Ok((dists, sums))
}

fn prefix_at<T: Scalar>(dists: &[T], sums: &[f64], r: T) -> f64 {
    let c = dists.partition_point(|&d| d < r);
    if c == 0 {
        0.0
    } else {
        sums[c - 1]
    }
}

/// `ρ(y, r) = Γ⟨ξ⟩(B(y, r)) Ψ(r) / μ(B(y, r))`.
pub fn ce_density<T: Scalar>(
    form: &EnergyForm<'_, T>,
    xi: &[T],
    psi: &ScaleFunction,
    y: usize,
    r: T,
) -> Result<f64> {
    let g = form.graph();
    let gamma = p_energy_measure(form, xi)?;
    let b = crate::space::ball(g, y, r)?;
    let e: f64 = b.members.iter().map(|&v| gamma.weights[v].as_f64()).sum();
    let m: f64 = b.members.iter().map(|&v| g.mu()[v].as_f64()).sum();
    Ok(e * psi.eval_at(y, r.as_f64()) / m)
}

/// Cutoff energy condition: fits `ρ(y, r) ≤ Ĉ (r/R0)^δ̂` over every vertex
/// `y` and grid radius `r ≤ 3R0`. The slope comes from a least-squares fit
/// of the per-radius envelope `max_y ρ` on `[2·min edge, 3R0]`, the constant
/// is lifted so that every sample satisfies the bound.
pub fn check_ce<T: Scalar>(
    form: &EnergyForm<'_, T>,
    xi: &CutoffFunction<T>,
    x0: usize,
    r0: T,
    psi: &ScaleFunction,
) -> Result<ConditionReport> {
    let g = form.graph();
    check_r0(g, x0, r0)?;
    xi.validate(g)?;
    let radii = ce_radii(g, r0)?;
    let gamma = p_energy_measure(form, &xi.values)?;
    let gw: Vec<f64> = gamma.weights.iter().map(|v| v.as_f64()).collect();
    let mw: Vec<f64> = g.mu().iter().map(|v| v.as_f64()).collect();
    let r0f = r0.as_f64();
    let mut rep = ConditionReport::new(ConditionTag::Ce);
    rep.mode = Some(SweepMode::Exhaustive);
    let mut envelope = vec![0.0f64; radii.len()];
    let mut zeros = 0usize;
    for y in 0..g.n() {
        let (dists, gsum) = prefix_sums(g, y, &gw)?;
        let (_, msum) = prefix_sums(g, y, &mw)?;
        for (i, &r) in radii.iter().enumerate() {
            let e = prefix_at(&dists, &gsum, r);
            let m = prefix_at(&dists, &msum, r);
            let rf = r.as_f64();
            let psi_r = psi.eval_at(y, rf);
            let rho = e * psi_r / m;
            if rho <= 0.0 {
                zeros += 1;
            }
            envelope[i] = envelope[i].max(rho);
            rep.rows.push(SweepRow {
                y,
                r: rf,
                lhs: e,
                rhs: m / psi_r,
                ratio: rho,
            });
        }
    }
    let lo = 2.0 * g.min_edge_length().as_f64();
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&envelope)
        .map(|(r, &e)| (r.as_f64(), e))
        .filter(|&(r, e)| e > 0.0 && r >= lo)
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 / r0f).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let w = spacing_weights(&xs);
    let (delta, rms) = match linear_fit(&xs, &ys, Some(&w)) {
        Some(f) => (f.slope, f.rms),
        None => {
            rep.flag("fewer than two positive envelope radii in the fit window");
            (0.0, f64::INFINITY)
        }
    };
    let mut arg = Argmax::new();
    for row in &rep.rows {
        if row.ratio > 0.0 {
            arg.offer(row.ratio / (row.r / r0f).powf(delta), row.y, row.r, None);
        }
    }
    if zeros > 0 {
        rep.flag(format!("{zeros} samples with Γ⟨ξ⟩(B) = 0 excluded from the fit"));
    }
    let c = if arg.key.is_some() { arg.value } else { 0.0 };
    rep.set("C", c).set("delta", delta).set("R0", r0f).set("x0", x0 as f64);
    if let Some(p) = xi.params {
        rep.set("sigma", p.sigma).set("K", p.k).set("kappa", p.kappa);
        if p.localization_failed {
            rep.flag("cutoff localization failed: h exceeds KΨ(R0) out to the graph boundary");
        }
    }
    rep.residual = Some(rms);
    rep.worst_witness = arg.witness();
    rep.verdict = if delta > 0.0 && rms <= CE_RESIDUAL_THRESHOLD {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(rep)
}

/// One cutoff Sobolev sample: `lhs = ∫_{B(y,r)} f² dΓ⟨ξ⟩` and
/// `rhs = (r/R0)^δ (Γ⟨f⟩(B(y,2r)) + Ψ(r)^{-1} ∫_{B(y,2r)} f² dμ)`.
pub fn cs_sample<T: Scalar>(
    form: &EnergyForm<'_, T>,
    xi: &[T],
    f: &[T],
    psi: &ScaleFunction,
    r0: T,
    delta: f64,
    y: usize,
    r: T,
) -> Result<(f64, f64)> {
    let g = form.graph();
    let gx = p_energy_measure(form, xi)?;
    let gf = p_energy_measure(form, f)?;
    let b = crate::space::ball(g, y, r)?;
    let b2 = crate::space::ball(g, y, r + r)?;
    let lhs: f64 = b.members.iter().map(|&v| (f[v] * f[v] * gx.weights[v]).as_f64()).sum();
    let e: f64 = b2.members.iter().map(|&v| gf.weights[v].as_f64()).sum();
    let m: f64 = b2.members.iter().map(|&v| (f[v] * f[v] * g.mu()[v]).as_f64()).sum();
    let rf = r.as_f64();
    let rhs = (rf / r0.as_f64()).powf(delta) * (e + m / psi.eval_at(y, rf));
    Ok((lhs, rhs))
}

/// Cutoff Sobolev constant `C_CS = max lhs/rhs` over the suite and every
/// vertex `y` and grid radius `r ≤ 3R0`.
pub fn check_cs<T: Scalar>(
    form: &EnergyForm<'_, T>,
    xi: &CutoffFunction<T>,
    x0: usize,
    r0: T,
    psi: &ScaleFunction,
    delta: f64,
    suite: &TestSuite<T>,
) -> Result<ConditionReport> {
    let g = form.graph();
    check_r0(g, x0, r0)?;
    xi.validate(g)?;
    if !(delta > 0.0) {
        return Err(HkeError::InvalidParameter(format!("CS needs δ > 0, got {delta}")));
    }
    if suite.is_empty() {
        return Err(HkeError::InvalidParameter("empty test suite".into()));
    }
    let radii = ce_radii(g, r0)?;
    let gx = p_energy_measure(form, &xi.values)?;
    let r0f = r0.as_f64();
    let mut rep = ConditionReport::new(ConditionTag::Cs);
    rep.mode = Some(SweepMode::Exhaustive);
    let mut arg = Argmax::new();
    for (name, f) in &suite.functions {
        let gf = p_energy_measure(form, f)?;
        let lw: Vec<f64> = (0..g.n()).map(|v| (f[v] * f[v] * gx.weights[v]).as_f64()).collect();
        let ew: Vec<f64> = gf.weights.iter().map(|v| v.as_f64()).collect();
        let mw: Vec<f64> = (0..g.n()).map(|v| (f[v] * f[v] * g.mu()[v]).as_f64()).collect();
        for y in 0..g.n() {
            let (dists, ls) = prefix_sums(g, y, &lw)?;
            let (_, es) = prefix_sums(g, y, &ew)?;
            let (_, ms) = prefix_sums(g, y, &mw)?;
            for &r in &radii {
                let rf = r.as_f64();
                let lhs = prefix_at(&dists, &ls, r);
                let e = prefix_at(&dists, &es, r + r);
                let m = prefix_at(&dists, &ms, r + r);
                let rhs = (rf / r0f).powf(delta) * (e + m / psi.eval_at(y, rf));
                if rhs <= 0.0 {
                    if lhs > 0.0 {
                        return Err(HkeError::Precondition(format!(
                            "CS sample with rhs = 0 and lhs > 0 at y = {y}, r = {rf}: locality violated"
                        )));
                    }
                    continue;
                }
                let ratio = lhs / rhs;
                arg.offer(ratio, y, rf, Some(name));
            }
        }
    }
    rep.set("C_CS", arg.value.max(0.0)).set("delta", delta).set("R0", r0f).set("x0", x0 as f64);
    rep.worst_witness = arg.witness();
    rep.verdict = if arg.value.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(rep)
}

/// Re-evaluates a CE witness: `ρ(y, r)/(r/R0)^δ`.
pub fn ce_witness_value<T: Scalar>(
    form: &EnergyForm<'_, T>,
    xi: &[T],
    psi: &ScaleFunction,
    r0: T,
    delta: f64,
    w: &Witness,
) -> Result<f64> {
    let (y, r) = *w.balls.first().ok_or_else(|| HkeError::InvalidParameter("empty witness".into()))?;
    Ok(ce_density(form, xi, psi, y, T::lit(r))? / (r / r0.as_f64()).powf(delta))
}
