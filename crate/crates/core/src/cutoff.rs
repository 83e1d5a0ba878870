//! Cutoff functions between nested balls, built either as equilibrium
//! potentials or by truncating a resolvent, and their regularity.

use serde::{Deserialize, Serialize};

use crate::conditions::{ScaleFunction, Theta};
use crate::energy::{assemble_generator, check_vertex_fn, p_energy_measure, EnergyForm, Generator};
use crate::error::{HkeError, Result};
use crate::fit::linear_fit;
use crate::space::{ball, Ball, MetricMeasureGraph};
use crate::spectral::{harmonic_extension, resolvent_solve};
use crate::Scalar;

/// Default `κ` of the resolvent construction.
pub const DEFAULT_KAPPA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Harmonic,
    Resolvent,
    /// Supplied from outside (e.g. read from a file).
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventParams {
    pub x0: usize,
    pub r0: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub k: f64,
    /// Smallest `σ` with `h ≤ KΨ(R0)` outside `B(x0, σR0)`.
    pub sigma: f64,
    pub localization_failed: bool,
    /// The source was an indicator because the `κ/16`–`κ/8` annulus was degenerate.
    pub indicator_source: bool,
}

/// `values` is 1 on `inner`, 0 off `outer` and in `[0, 1]` everywhere.
#[derive(Debug, Clone)]
pub struct CutoffFunction<T: Scalar> {
    pub values: Vec<T>,
    pub inner: Ball<T>,
    pub outer: Ball<T>,
    pub construction: Construction,
    pub params: Option<ResolventParams>,
    /// `𝓔(values, values)`; the capacity for a harmonic cutoff.
    pub energy: T,
}

impl<T: Scalar> CutoffFunction<T> {
    /// Wraps an arbitrary vertex function after checking the invariants.
    pub fn from_values(g: &MetricMeasureGraph<T>, values: Vec<T>, inner: Ball<T>, outer: Ball<T>) -> Result<Self> {
        let energy = dirichlet_energy(g, &values);
        let c = Self {
            values,
            inner,
            outer,
            construction: Construction::External,
            params: None,
            energy,
        };
        c.validate(g)?;
        Ok(c)
    }

    pub fn validate(&self, g: &MetricMeasureGraph<T>) -> Result<()> {
        check_vertex_fn(g, &self.values)?;
        for (v, &x) in self.values.iter().enumerate() {
            if !(x >= T::zero() && x <= T::one()) {
                return Err(HkeError::Precondition(format!("cutoff value {x} at {v} is outside [0, 1]")));
            }
            if self.inner.contains(v) && x != T::one() {
                return Err(HkeError::Precondition(format!("cutoff is {x} at inner vertex {v}")));
            }
            if !self.outer.contains(v) && x != T::zero() {
                return Err(HkeError::Precondition(format!("cutoff is {x} at {v}, outside the outer ball")));
            }
        }
        Ok(())
    }
}

fn dirichlet_energy<T: Scalar>(g: &MetricMeasureGraph<T>, f: &[T]) -> T {
    g.edges()
        .iter()
        .map(|e| {
            let d = f[e.u] - f[e.v];
            e.conductance * d * d
        })
        .sum()
}

/// Equilibrium potential of `inner` relative to `outer`.
pub fn harmonic_cutoff<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    inner: &Ball<T>,
    outer: &Ball<T>,
) -> Result<CutoffFunction<T>> {
    let gen = assemble_generator(&EnergyForm::dirichlet(g))?;
    harmonic_cutoff_with(g, &gen, inner, outer)
}

/// [`harmonic_cutoff`] reusing an assembled generator.
pub fn harmonic_cutoff_with<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    gen: &Generator<T>,
    inner: &Ball<T>,
    outer: &Ball<T>,
) -> Result<CutoffFunction<T>> {
    let n = g.n();
    if outer.len() >= n {
        return Err(HkeError::InvalidParameter(
            "outer ball is the whole graph: no Dirichlet boundary".into(),
        ));
    }
    if let Some(&v) = inner.members.iter().find(|&&v| !outer.contains(v)) {
        return Err(HkeError::InvalidParameter(format!("inner vertex {v} is not in the outer ball")));
    }
    if inner.len() == outer.len() {
        return Err(HkeError::Degenerate("inner and outer balls coincide".into()));
    }
    let mut boundary: Vec<(usize, T)> = inner.members.iter().map(|&v| (v, T::one())).collect();
    let in_outer = outer.mask(n);
    boundary.extend((0..n).filter(|&v| !in_outer[v]).map(|v| (v, T::zero())));
    let mut values = harmonic_extension(gen, &boundary)?;
    // solver rounding only; the maximum principle keeps the exact values in [0, 1]
    for v in values.iter_mut() {
        *v = v.max(T::zero()).min(T::one());
    }
    let energy = dirichlet_energy(g, &values);
    Ok(CutoffFunction {
        values,
        inner: inner.clone(),
        outer: outer.clone(),
        construction: Construction::Harmonic,
        params: None,
        energy,
    })
}

/// Truncated resolvent `ξ = (h/(KΨ(R0)) − 1)⁺ ∧ 1` with `h = G_λ φ`,
/// `λ = 1/Ψ(R0)` and `φ` the harmonic cutoff for `B(x0, κR0/16) ⊆ B(x0, κR0/8)`.
pub fn resolvent_cutoff<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    gen: &Generator<T>,
    x0: usize,
    r0: T,
    psi: &ScaleFunction,
    kappa: f64,
) -> Result<CutoffFunction<T>> {
    check_resolvent_args(g, x0, r0, kappa)?;
    let k = T::lit(kappa);
    let a = ball(g, x0, k * r0 / T::lit(16.0))?;
    let b = ball(g, x0, k * r0 / T::lit(8.0))?;
    let (phi, indicator) = match harmonic_cutoff_with(g, gen, &a, &b) {
        Ok(c) => (c.values, false),
        Err(HkeError::Degenerate(_)) | Err(HkeError::InvalidParameter(_)) => {
            let mut v = vec![T::zero(); g.n()];
            for &m in &a.members {
                v[m] = T::one();
            }
            (v, true)
        }
        Err(e) => return Err(e),
    };
    let mut c = resolvent_cutoff_from_source(g, gen, x0, r0, psi, kappa, &phi)?;
    if let Some(p) = c.params.as_mut() {
        p.indicator_source = indicator;
    }
    Ok(c)
}

fn check_resolvent_args<T: Scalar>(g: &MetricMeasureGraph<T>, x0: usize, r0: T, kappa: f64) -> Result<()> {
    if x0 >= g.n() {
        return Err(HkeError::VertexOutOfRange(x0));
    }
    let diam = g.diameter()?;
    if !(r0 > T::zero() && r0 < diam) {
        return Err(HkeError::InvalidParameter(format!("R0 must lie in (0, {diam}), got {r0}")));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(HkeError::InvalidParameter(format!("κ must lie in (0, 1], got {kappa}")));
    }
    Ok(())
}

/// The resolvent construction with a caller-supplied source `φ`.
pub fn resolvent_cutoff_from_source<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    gen: &Generator<T>,
    x0: usize,
    r0: T,
    psi: &ScaleFunction,
    kappa: f64,
    phi: &[T],
) -> Result<CutoffFunction<T>> {
    check_resolvent_args(g, x0, r0, kappa)?;
    check_vertex_fn(g, phi)?;
    let psi_r0 = T::lit(psi.eval_at(x0, r0.as_f64()));
    let lambda = psi_r0.recip();
    let h = resolvent_solve(gen, lambda, phi)?;
    let inner = ball(g, x0, T::lit(kappa) * r0)?;
    let hmin = inner.members.iter().map(|&v| h[v]).fold(T::infinity(), |a, b| a.min(b));
    let k = hmin / (T::lit(2.0) * psi_r0);
    assert!(k > T::zero(), "resolvent of a nonnegative nonzero source must be positive");
    let level = k * psi_r0;
    let mut values: Vec<T> = h
        .iter()
        .map(|&v| (v / level - T::one()).max(T::zero()).min(T::one()))
        .collect();
    for &v in &inner.members {
        // h ≥ 2KΨ(R0) there by the choice of K; remove rounding below 1
        values[v] = T::one();
    }
    // σ: the next distinct distance beyond the farthest vertex with h > KΨ(R0)
    let row = g.dist_row(x0)?;
    let far = (0..g.n())
        .filter(|&v| h[v] > level)
        .map(|v| row[v])
        .fold(T::zero(), |a, b| a.max(b));
    let next = row.iter().copied().filter(|&d| d > far).fold(T::infinity(), |a, b| a.min(b));
    let (sigma, failed, outer_radius) = if next.is_finite() {
        (next / r0, false, next)
    } else {
        let beyond = far * T::lit(2.0) + g.min_edge_length();
        (beyond / r0, true, beyond)
    };
    let outer = ball(g, x0, outer_radius)?;
    for v in 0..g.n() {
        if !outer.contains(v) {
            values[v] = T::zero();
        }
    }
    let energy = dirichlet_energy(g, &values);
    Ok(CutoffFunction {
        values,
        inner,
        outer,
        construction: Construction::Resolvent,
        params: Some(ResolventParams {
            x0,
            r0: r0.as_f64(),
            kappa,
            lambda: lambda.as_f64(),
            k: k.as_f64(),
            sigma: sigma.as_f64(),
            localization_failed: failed,
            indicator_source: false,
        }),
        energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    /// `α`; `+∞` for a constant function.
    pub exponent: f64,
    pub constant: f64,
    pub scale: f64,
    /// `R²` of the log–log fit.
    pub fit_residual: f64,
    /// Distances `s ≤ R` with their envelope `sup_{d(y,z)=s} |f(y) − f(z)|`.
    pub grid: Vec<f64>,
    pub envelope: Vec<f64>,
    pub flags: Vec<String>,
}

/// Fits `|f(y) − f(z)| ≤ C (d(y,z)/R)^α` over all pairs with `d ≤ R`.
pub fn holder_report<T: Scalar>(g: &MetricMeasureGraph<T>, f: &[T], r: T) -> Result<HolderReport> {
    check_vertex_fn(g, f)?;
    if !(r > T::zero()) {
        return Err(HkeError::InvalidParameter(format!("scale must be positive, got {r}")));
    }
    let n = g.n();
    let distinct = g.distinct_distances()?;
    let grid: Vec<T> = distinct.iter().copied().filter(|&d| d <= r).collect();
    let mut env = vec![T::zero(); grid.len()];
    for y in 0..n {
        let row = g.dist_row(y)?;
        for z in (y + 1)..n {
            let d = row[z];
            if d > r {
                continue;
            }
            let i = grid.partition_point(|&s| s < d);
            let diff = (f[y] - f[z]).abs();
            if i < grid.len() && diff > env[i] {
                env[i] = diff;
            }
        }
    }
    let mut report = HolderReport {
        exponent: f64::INFINITY,
        constant: 0.0,
        scale: r.as_f64(),
        fit_residual: 1.0,
        grid: grid.iter().map(|v| v.as_f64()).collect(),
        envelope: env.iter().map(|v| v.as_f64()).collect(),
        flags: Vec::new(),
    };
    let pts: Vec<(f64, f64)> = report
        .grid
        .iter()
        .zip(&report.envelope)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&s, &e)| (s, e))
        .collect();
    if pts.is_empty() {
        report.flags.push("constant on the scale: α = ∞, C = 0".into());
        return Ok(report);
    }
    let rf = report.scale;
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 / rf).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let alpha = match linear_fit(&xs, &ys, None) {
        Some(fit) => {
            report.fit_residual = fit.r2;
            fit.slope.max(0.0)
        }
        None => {
            report.flags.push("single distance scale: α set to 0".into());
            0.0
        }
    };
    report.exponent = alpha;
    report.constant = pts
        .iter()
        .map(|&(s, e)| e / (s / rf).powf(alpha))
        .fold(0.0, f64::max);
    if alpha < 0.05 {
        report.flags.push("no decay at the smallest scale: jump".into());
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalFunction {
    pub values: Vec<f64>,
    pub p: f64,
    pub delta: f64,
    pub radius: f64,
}

/// The distinct balls around `x` with radius at most `r_max`, as
/// `(effective radius, next distance, prefix length)`. The ball is produced by
/// every radius in `(effective, next]`; the effective radius is the largest
/// distance from `x` to a member.
fn distinct_balls<T: Scalar>(g: &MetricMeasureGraph<T>, x: usize, r_max: T) -> Result<Vec<(T, T, usize)>> {
    let n = g.n();
    let row = g.dist_row(x)?;
    let mut d: Vec<(T, usize)> = (0..n).map(|v| (row[v], v)).collect();
    d.sort_by(|a, b| crate::scalar::total_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && d[j].0 == d[i].0 {
            j += 1;
        }
        let r_eff = d[i].0;
        if r_eff > r_max {
            break;
        }
        let next = if j < n { d[j].0 } else { T::infinity() };
        out.push((r_eff, next, j));
        i = j;
    }
    Ok(out)
}

fn sorted_row<T: Scalar>(g: &MetricMeasureGraph<T>, x: usize) -> Result<Vec<usize>> {
    let row = g.dist_row(x)?;
    let mut v: Vec<usize> = (0..g.n()).collect();
    v.sort_by(|&a, &b| crate::scalar::total_cmp(&row[a], &row[b]).then(a.cmp(&b)));
    Ok(v)
}

/// `M(x) = sup_{B ∋ x, r(B) ≤ R} r^{−δ} ⨍_B |f − f_B|^p dμ`, exact over the
/// distinct balls. A ball is charged its effective radius.
pub fn sharp_maximal<T: Scalar>(g: &MetricMeasureGraph<T>, f: &[T], p: f64, delta: f64, r: T) -> Result<MaximalFunction> {
    check_vertex_fn(g, f)?;
    if !(p >= 1.0) || !(delta > 0.0) || !(r > T::zero()) {
        return Err(HkeError::InvalidParameter("sharp maximal function needs p ≥ 1, δ > 0, R > 0".into()));
    }
    let n = g.n();
    let mu: Vec<f64> = g.mu().iter().map(|v| v.as_f64()).collect();
    let fv: Vec<f64> = f.iter().map(|v| v.as_f64()).collect();
    let mut m = vec![0.0f64; n];
    for x in 0..n {
        let order = sorted_row(g, x)?;
        for (r_eff, _, count) in distinct_balls(g, x, r)? {
            if count < 2 {
                continue;
            }
            let members = &order[..count];
            let mass: f64 = members.iter().map(|&v| mu[v]).sum();
            let mean = members.iter().map(|&v| mu[v] * fv[v]).sum::<f64>() / mass;
            let osc = members
                .iter()
                .map(|&v| mu[v] * (fv[v] - mean).abs().powf(p))
                .sum::<f64>()
                / mass;
            let val = osc / r_eff.as_f64().powf(delta);
            for &v in members {
                if val > m[v] {
                    m[v] = val;
                }
            }
        }
    }
    Ok(MaximalFunction {
        values: m,
        p,
        delta,
        radius: r.as_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointCheck {
    /// Smallest `C` making the two-point estimate hold on every pair.
    pub fitted_constant: f64,
    /// `D·4^{δ/p}(S + D)` with `S = 1/(1 − 2^{−δ/p})`.
    pub bound: f64,
    pub doubling: f64,
    pub pairs: usize,
    pub worst_pair: Option<(usize, usize)>,
    pub holds: bool,
}

/// `|f(x) − f(y)| ≤ C d^{δ/p}(M(x)^{1/p} + M(y)^{1/p})` on all pairs with
/// `d(x, y) ≤ R/4`, against the chaining bound.
pub fn two_point_check<T: Scalar>(g: &MetricMeasureGraph<T>, f: &[T], m: &MaximalFunction) -> Result<TwoPointCheck> {
    check_vertex_fn(g, f)?;
    let n = g.n();
    if m.values.len() != n {
        return Err(HkeError::InvalidParameter("maximal function length mismatch".into()));
    }
    let e = m.delta / m.p;
    let roots: Vec<f64> = m.values.iter().map(|v| v.powf(1.0 / m.p)).collect();
    let mut best = 0.0f64;
    let mut worst = None;
    let mut pairs = 0;
    for x in 0..n {
        let row = g.dist_row(x)?;
        for y in (x + 1)..n {
            let d = row[y].as_f64();
            if d > m.radius / 4.0 {
                continue;
            }
            pairs += 1;
            let num = (f[x] - f[y]).abs().as_f64();
            if num == 0.0 {
                continue;
            }
            let den = d.powf(e) * (roots[x] + roots[y]);
            let ratio = if den > 0.0 { num / den } else { f64::INFINITY };
            if ratio > best {
                best = ratio;
                worst = Some((x, y));
            }
        }
    }
    let doubling = exact_doubling_constant(g)?;
    let s = 1.0 / (1.0 - 2f64.powf(-e));
    let bound = doubling * 4f64.powf(e) * (s + doubling);
    Ok(TwoPointCheck {
        fitted_constant: best,
        bound,
        doubling,
        pairs,
        worst_pair: worst,
        holds: best <= bound,
    })
}

/// `sup_{x, r > 0} μ(B(x, 2r))/μ(B(x, r))` over every radius, using that the
/// ratio only changes where `r` or `2r` crosses a distance from `x`.
pub fn exact_doubling_constant<T: Scalar>(g: &MetricMeasureGraph<T>) -> Result<f64> {
    let mut d = 1.0f64;
    for x in 0..g.n() {
        let mut row: Vec<f64> = g.dist_row(x)?.iter().map(|v| v.as_f64()).collect();
        row.sort_by(f64::total_cmp);
        row.dedup();
        let mut cuts: Vec<f64> = row.iter().flat_map(|&v| [v, 0.5 * v]).filter(|&v| v > 0.0).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        // one radius strictly inside each interval between consecutive cuts
        let mut probes: Vec<f64> = cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        if let Some(&first) = cuts.first() {
            probes.push(0.5 * first);
        }
        for r in probes {
            let a = g.ball_measure(x, T::lit(r))?.as_f64();
            let b = g.ball_measure(x, T::lit(2.0 * r))?.as_f64();
            d = d.max(b / a);
        }
    }
    Ok(d)
}

/// `M_E(x) = sup_{B ∋ x, r(B) ≤ R} Γ_p⟨f⟩(B) Ψ(r) / (Θ^p μ(B))` over the
/// distinct balls; each is evaluated at both ends of its radius interval.
pub fn energy_maximal<T: Scalar>(
    form: &EnergyForm<'_, T>,
    f: &[T],
    psi: &ScaleFunction,
    theta: &Theta,
    r: T,
) -> Result<MaximalFunction> {
    theta.validate()?;
    let g = form.graph();
    let gamma = p_energy_measure(form, f)?;
    let p = form.p().as_f64();
    let n = g.n();
    let mut m = vec![0.0f64; n];
    for x in 0..n {
        let order = sorted_row(g, x)?;
        let mut acc_mu = 0.0;
        let mut acc_g = 0.0;
        let mut done = 0;
        for (r_eff, next, count) in distinct_balls(g, x, r)? {
            for &v in &order[done..count] {
                acc_mu += g.mu()[v].as_f64();
                acc_g += gamma.weights[v].as_f64();
            }
            done = count;
            let hi = next.min(r).as_f64();
            let lo = r_eff.as_f64();
            let at = |rr: f64| acc_g * psi.eval_at(x, rr) / (theta.eval(psi, x, rr, acc_mu).powf(p) * acc_mu);
            let val = if lo > 0.0 { at(lo).max(at(hi)) } else { at(hi) };
            for &v in &order[..count] {
                if val > m[v] {
                    m[v] = val;
                }
            }
        }
    }
    Ok(MaximalFunction {
        values: m,
        p,
        delta: 0.0,
        radius: r.as_f64(),
    })
}
