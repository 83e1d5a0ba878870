use super::report::{ConditionReport, ConditionTag, Verdict, Witness};
use crate::error::{HkeError, Result};
use crate::fit::linear_fit;
use crate::space::MetricMeasureGraph;
use crate::spectral::{HeatKernel, Spectrum};
use crate::Scalar;

const BETA_MIN: f64 = 1.2;
const BETA_MAX: f64 = 4.0;
const BETA_STEP: f64 = 0.0025;
/// At most this many centers enter the heat-kernel sweeps.
const MAX_CENTERS: usize = 128;
/// Largest `z = (d^β/t)^{1/(β−1)}` kept in the tail regression.
const TAIL_Z_MAX: f64 = 8.0;

/// Space-time scaling `Ψ(r) = a r^β`: the diffusive window and the radius
/// `Ψ^{-1}(t) = (t/a)^{1/β}` attached to a time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_min: f64,
    pub t_max: f64,
}

fn window<T: Scalar>(g: &MetricMeasureGraph<T>, beta: f64, a: f64) -> Result<Window> {
    let lo = 2.0 * g.min_edge_length().as_f64();
    let hi = g.diameter()?.as_f64() / 4.0;
    let w = Window {
        t_min: a * lo.powf(beta),
        t_max: a * hi.powf(beta),
    };
    if !(w.t_min < w.t_max) {
        return Err(HkeError::NotApplicable(format!(
            "diffusive window is empty: diameter/4 = {hi} does not exceed twice the smallest edge {lo}; \
             use a graph with diameter above 8 edge lengths"
        )));
    }
    Ok(w)
}

fn log_grid(w: Window, k: usize) -> Vec<f64> {
    let (a, b) = (w.t_min.ln(), w.t_max.ln());
    (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
}

fn centers(n: usize) -> Vec<usize> {
    let stride = n.div_ceil(MAX_CENTERS).max(1);
    (0..n).step_by(stride).collect()
}

fn check_time_scale(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(HkeError::InvalidParameter(format!("time scale must be positive, got {a}")));
    }
    Ok(())
}

/// `β̂` minimising the dispersion over `t` of the center-averaged
/// `log[p_t(x,x) μ(B̄(x, r))]` with `t = a r^β`, `B̄` the closed ball. The
/// radii are the distinct distances between `2·min edge` and `diam/4`, so
/// every volume is read at a jump of `r ↦ μ(B̄(x, r))` and the window does not
/// move with `β`.
pub fn fit_walk_dimension<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    spec: &Spectrum<T>,
    time_scale: f64,
) -> Result<ConditionReport> {
    check_time_scale(time_scale)?;
    if spec.n() != g.n() {
        return Err(HkeError::InvalidParameter("spectrum does not belong to the graph".into()));
    }
    window(g, 2.0, time_scale)?;
    let lo = 2.0 * g.min_edge_length().as_f64();
    let hi = g.diameter()?.as_f64() / 4.0;
    let distinct: Vec<T> = g.distinct_distances()?.to_vec();
    // radius in the window paired with the next distinct distance, so that
    // the open ball at the latter is the closed ball at the former
    let pairs: Vec<(f64, Option<T>)> = distinct
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_f64(), distinct.get(i + 1).copied()))
        .filter(|&(d, _)| d >= lo * (1.0 - 1e-12) && d <= hi * (1.0 + 1e-12))
        .collect();
    if pairs.len() < 2 {
        return Err(HkeError::NotApplicable(format!(
            "fewer than two distinct distances in [{lo}, {hi}]"
        )));
    }
    let radii: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let xs = centers(g.n());
    let total = g.total_measure().as_f64();
    let log_vol: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(_, next)| {
            xs.iter()
                .map(|&x| {
                    let v = match next {
                        Some(nd) => g.ball_measure(x, nd)?.as_f64(),
                        None => total,
                    };
                    Ok(v.ln())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let lam: Vec<f64> = spec.eigenvalues.iter().map(|l| l.as_f64()).collect();
    // squared eigenvector entries at the centers, mode-major
    let sq: Vec<Vec<f64>> = spec
        .eigenvectors
        .iter()
        .map(|phi| xs.iter().map(|&x| phi[x].as_f64().powi(2)).collect())
        .collect();
    let products = |beta: f64| -> Vec<Vec<f64>> {
        radii
            .iter()
            .zip(&log_vol)
            .map(|(&r, lv)| {
                let t = time_scale * r.powf(beta);
                let mut diag = vec![0.0; xs.len()];
                for (l, s) in lam.iter().zip(&sq) {
                    let w = (-l * t).exp();
                    for (d, v) in diag.iter_mut().zip(s) {
                        *d += w * v;
                    }
                }
                diag.iter().zip(lv).map(|(d, v)| d.ln() + v).collect()
            })
            .collect()
    };
    let spread_of = |beta: f64| -> f64 {
        let means: Vec<f64> = products(beta)
            .iter()
            .map(|row| row.iter().sum::<f64>() / row.len() as f64)
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / means.len() as f64).sqrt()
    };
    let steps = ((BETA_MAX - BETA_MIN) / BETA_STEP).round() as usize;
    let (spread, beta) = (0..=steps)
        .map(|s| BETA_MIN + BETA_STEP * s as f64)
        .map(|b| (spread_of(b), b))
        .fold((f64::INFINITY, BETA_MIN), |a, c| if c.0 < a.0 { c } else { a });
    let all = products(beta).concat();
    let c = all.iter().copied().fold(f64::INFINITY, f64::min).exp();
    let big_c = all.iter().copied().fold(f64::NEG_INFINITY, f64::max).exp();
    let mut rep = ConditionReport::new(ConditionTag::Walk);
    rep.set("beta", beta)
        .set("c", c)
        .set("C", big_c)
        .set("t_min", time_scale * radii[0].powf(beta))
        .set("t_max", time_scale * radii[radii.len() - 1].powf(beta))
        .set("radii", radii.len() as f64)
        .set("time_scale", time_scale);
    rep.residual = Some(spread);
    rep.verdict = Verdict::Fitted;
    Ok(rep)
}

/// Sub-Gaussian heat kernel check at walk dimension `β`: the near-diagonal
/// lower constant `c = min p_t(x,y) μ(B(x, r_t))` over `d(x,y) ≤ κ r_t`, and
/// the tail slope of `log[p_t(x,y) μ(B(x, r_t))]` against
/// `z = (d^β/t)^{1/(β−1)}`, with `r_t = (t/a)^{1/β}`.
pub fn check_hke<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    spec: &Spectrum<T>,
    beta: f64,
    kappa: f64,
    time_scale: f64,
) -> Result<ConditionReport> {
    if !(beta > 1.0) || !beta.is_finite() {
        return Err(HkeError::InvalidParameter(format!("walk dimension must exceed 1, got {beta}")));
    }
    if !(kappa > 0.0) {
        return Err(HkeError::InvalidParameter(format!("κ must be positive, got {kappa}")));
    }
    check_time_scale(time_scale)?;
    if spec.n() != g.n() {
        return Err(HkeError::InvalidParameter("spectrum does not belong to the graph".into()));
    }
    let hk = HeatKernel::new(spec);
    let w = window(g, beta, time_scale)?;
    let times = log_grid(w, 24);
    let xs = centers(g.n());
    let mut near = (f64::INFINITY, Witness::default());
    let mut on_diag_max = 0.0f64;
    let mut zs = Vec::new();
    let mut ls = Vec::new();
    let mut samples = Vec::new();
    for &t in &times {
        let rt = (t / time_scale).powf(1.0 / beta);
        for &x in &xs {
            let row = hk.row(T::lit(t), x)?;
            let vol = g.ball_measure(x, T::lit(rt))?.as_f64();
            let dist = g.dist_row(x)?;
            for y in 0..g.n() {
                let d = dist[y].as_f64();
                let v = row[y].as_f64() * vol;
                if y == x {
                    on_diag_max = on_diag_max.max(v);
                }
                if d <= kappa * rt && v < near.0 {
                    near = (
                        v,
                        Witness {
                            balls: vec![(x, rt)],
                            vertex: Some(y),
                            time: Some(t),
                            function: None,
                        },
                    );
                }
                let z = (d.powf(beta) / t).powf(1.0 / (beta - 1.0));
                if d > 0.0 && z <= TAIL_Z_MAX && v > 0.0 {
                    zs.push(z);
                    ls.push(v.ln());
                    samples.push((z, v));
                }
            }
        }
    }
    let mut rep = ConditionReport::new(ConditionTag::Hke);
    let fit = linear_fit(&zs, &ls, None);
    let slope = fit.map_or(f64::NAN, |f| f.slope);
    // envelope constant of p μ(B) ≤ C exp(slope · z)
    let c_upper = samples
        .iter()
        .map(|&(z, v)| v / (slope * z).exp())
        .fold(on_diag_max, f64::max);
    let phi_unit = (beta - 1.0) * beta.powf(-beta / (beta - 1.0));
    rep.set("beta", beta)
        .set("kappa", kappa)
        .set("c_near", near.0)
        .set("C_on_diag", on_diag_max)
        .set("tail_slope", slope)
        .set("tail_slope_phi", slope / phi_unit)
        .set("C_tail", c_upper)
        .set("t_min", w.t_min)
        .set("t_max", w.t_max);
    rep.residual = fit.map(|f| f.rms);
    rep.worst_witness = Some(near.1);
    let near_ok = near.0 > 0.0 && near.0.is_finite();
    let tail_ok = slope < 0.0 && c_upper.is_finite();
    if !near_ok {
        rep.flag("near-diagonal lower bound fails");
    }
    if !tail_ok {
        rep.flag("tail regression does not decay");
    }
    rep.verdict = if near_ok && tail_ok { Verdict::Pass } else { Verdict::Fail };
    Ok(rep)
}
