use serde::{Deserialize, Serialize};

use super::graph::MetricMeasureGraph;
use crate::error::{HkeError, Result};
use crate::fit::linear_fit;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// `max μ(B(x,2r)) / μ(B(x,r))` over the sampled balls.
    pub d: f64,
    /// `(x, r)` attaining `d`.
    pub d_witness: (usize, f64),
    pub q_lower: f64,
    pub q_upper: f64,
    /// `min diam(B(x,r)) / r` over sampled `r` strictly between the smallest
    /// edge and the diameter.
    pub lambda_perf: f64,
    pub lambda_witness: (usize, f64),
    pub radii_grid: Vec<f64>,
    /// Scale factors `s = R/r` and the envelopes of `μ(B(x,sr))/μ(B(x,r))`.
    pub scale_factors: Vec<f64>,
    pub upper_envelope: Vec<f64>,
    pub lower_envelope: Vec<f64>,
}

/// Doubling constant, volume exponents and uniform-perfectness constant.
///
/// The exponents are least-squares slopes of the log envelopes of
/// `μ(B(x,sr))/μ(B(y,r))` (`y ∈ B(x,sr)`) against `log s`, `s = 2, 4, 8, …`.
/// The window `r > 2·d_min`, `sr ≤ diam/2` keeps lattice-scale and
/// finite-size saturation out of the fit; it is widened on small graphs.
pub fn doubling_report<T: Scalar>(g: &MetricMeasureGraph<T>, radii: &[T]) -> Result<DoublingReport> {
    let diam = g.diameter()?;
    let radii: Vec<T> = radii
        .iter()
        .copied()
        .filter(|&r| r > T::zero() && r <= diam)
        .collect();
    if radii.is_empty() {
        return Err(HkeError::InvalidParameter(
            "radius grid has no point in (0, diam]".into(),
        ));
    }
    let m = g.metric()?;
    let n = g.n();
    let two = T::lit(2.0);
    let d1 = g.distinct_distances()?.first().copied().unwrap_or(T::one());

    let mut d_best = T::one();
    let mut d_wit = (0usize, radii[0]);
    for x in 0..n {
        for &r in &radii {
            let a = g.ball_mass(m, x, g.ball_count(m, x, r));
            let b = g.ball_mass(m, x, g.ball_count(m, x, two * r));
            let ratio = b / a;
            if ratio > d_best {
                d_best = ratio;
                d_wit = (x, r);
            }
        }
    }

    // uniform perfectness: running diameter of each center's distance prefix
    let mut lam = T::lit(2.0);
    let mut lam_wit = (0usize, radii[0]);
    let perf_radii: Vec<T> = radii.iter().copied().filter(|&r| r > d1 && r < diam).collect();
    if !perf_radii.is_empty() {
        let mut prefix_diam = vec![T::zero(); n];
        for x in 0..n {
            let order = g.ball_prefix(m, x, n);
            let mut cur = T::zero();
            for k in 0..n {
                let v = order[k] as usize;
                let row = &m.dist[v * n..(v + 1) * n];
                for &u in &order[..k] {
                    cur = cur.max(row[u as usize]);
                }
                prefix_diam[k] = cur;
            }
            for &r in &perf_radii {
                let c = g.ball_count(m, x, r);
                let ratio = prefix_diam[c - 1] / r;
                if ratio < lam {
                    lam = ratio;
                    lam_wit = (x, r);
                }
            }
        }
    }

    // volume exponents from the two-center ratio μ(B(x,sr))/μ(B(y,r)), y ∈ B(x,sr)
    let mut window = None;
    for (lo, hi) in [(two, T::lit(0.5)), (T::one(), T::lit(0.5)), (T::one(), T::one()), (T::lit(0.5), T::one())] {
        let w = volume_envelopes(g, m, &radii, lo * d1, hi * diam);
        let enough = w.0.len() >= 2;
        if window.as_ref().map_or(true, |b: &Envelopes<T>| w.0.len() > b.0.len()) {
            window = Some(w);
        }
        if enough {
            break;
        }
    }
    let (factors, upper, lower) = window.unwrap_or_default();
    let (q_lower, q_upper) = if factors.len() >= 2 {
        let lx: Vec<T> = factors.iter().map(|s| s.ln()).collect();
        let lu: Vec<T> = upper.iter().map(|u| u.ln()).collect();
        let ll: Vec<T> = lower.iter().map(|u| u.ln()).collect();
        let fu = linear_fit(&lx, &lu, None).map(|f| f.slope).unwrap_or(T::nan());
        let fl = linear_fit(&lx, &ll, None).map(|f| f.slope).unwrap_or(T::nan());
        (fl.min(fu), fu.max(fl))
    } else if factors.len() == 1 {
        let a = lower[0].ln() / factors[0].ln();
        let b = upper[0].ln() / factors[0].ln();
        (a.min(b), a.max(b))
    } else {
        return Err(HkeError::InvalidParameter(
            "graph too small to fit volume exponents".into(),
        ));
    };

    Ok(DoublingReport {
        d: d_best.as_f64(),
        d_witness: (d_wit.0, d_wit.1.as_f64()),
        q_lower: q_lower.as_f64(),
        q_upper: q_upper.as_f64(),
        lambda_perf: lam.as_f64(),
        lambda_witness: (lam_wit.0, lam_wit.1.as_f64()),
        radii_grid: radii.iter().map(|r| r.as_f64()).collect(),
        scale_factors: factors.iter().map(|r| r.as_f64()).collect(),
        upper_envelope: upper.iter().map(|r| r.as_f64()).collect(),
        lower_envelope: lower.iter().map(|r| r.as_f64()).collect(),
    })
}

type Envelopes<T> = (Vec<T>, Vec<T>, Vec<T>);

/// Upper and lower envelopes of `μ(B(x,sr))/μ(B(y,r))` over `y ∈ B(x,sr)`,
/// for `s = 2, 4, 8, …`, `r > r_min` and `sr ≤ r_max`.
fn volume_envelopes<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    m: &super::graph::MetricTable<T>,
    radii: &[T],
    r_min: T,
    r_max: T,
) -> Envelopes<T> {
    let n = g.n();
    let two = T::lit(2.0);
    let base: Vec<T> = radii.iter().copied().filter(|&r| r > r_min).collect();
    let mut factors = Vec::new();
    let mut s = two;
    while base.first().is_some_and(|&r| s * r <= r_max) {
        factors.push(s);
        s *= two;
    }
    let mut upper = vec![T::zero(); factors.len()];
    let mut lower = vec![T::infinity(); factors.len()];
    let mut small = vec![T::zero(); n];
    let mut run_min = vec![T::zero(); n];
    let mut run_max = vec![T::zero(); n];
    for &r in &base {
        if two * r > r_max {
            break;
        }
        for (y, v) in small.iter_mut().enumerate() {
            *v = g.ball_mass(m, y, g.ball_count(m, y, r));
        }
        for x in 0..n {
            let order = g.ball_prefix(m, x, n);
            let mut lo = T::infinity();
            let mut hi = T::zero();
            for (k, &v) in order.iter().enumerate() {
                lo = lo.min(small[v as usize]);
                hi = hi.max(small[v as usize]);
                run_min[k] = lo;
                run_max[k] = hi;
            }
            for (i, &s) in factors.iter().enumerate() {
                if s * r > r_max {
                    break;
                }
                let c = g.ball_count(m, x, s * r);
                let big = g.ball_mass(m, x, c);
                upper[i] = upper[i].max(big / run_min[c - 1]);
                lower[i] = lower[i].min(big / run_max[c - 1]);
            }
        }
    }
    (factors, upper, lower)
}
