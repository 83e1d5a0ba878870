use std::collections::HashMap;

use rayon::prelude::*;

use super::pencil::{mass_pencil, reduce};
use super::report::{Argmax, ConditionReport, ConditionTag, SweepRow, Verdict};
use super::scale::ScaleFunction;
use super::suite::TestSuite;
use super::{ball_key, members_of, BallKey};
use crate::cutoff::harmonic_cutoff_with;
use crate::energy::{assemble_generator, p_energy_measure, EnergyForm, EnergyMeasure};
use crate::error::{HkeError, Result};
use crate::space::{ball, MetricMeasureGraph, SweepPlan};
use crate::Scalar;

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 1.0) || !sigma.is_finite() {
        return Err(HkeError::InvalidParameter(format!("dilation σ must be ≥ 1, got {sigma}")));
    }
    Ok(())
}

/// `sup_f ∫_B |f − f_B|^p dμ / Γ_p⟨f⟩(σB)` for `B = B(x, r)`: exact for
/// `p = 2`, the suite maximum otherwise (with the maximising function's
/// name). `None` when the energy vanishes on a non-constant function of `σB`.
pub fn pi_ball_sup<T: Scalar>(
    form: &EnergyForm<'_, T>,
    sigma: f64,
    x: usize,
    r: T,
    suite: Option<&TestSuite<T>>,
) -> Result<Option<(f64, Option<String>)>> {
    check_sigma(sigma)?;
    let g = form.graph();
    let b = ball(g, x, r)?;
    let sb = ball(g, x, r * T::lit(sigma))?;
    if form.is_quadratic() {
        return Ok(exact_sup(g, &b.members, &sb.members)?.map(|v| (v, None)));
    }
    let suite = suite.ok_or_else(|| HkeError::InvalidParameter("p ≠ 2 needs a test suite".into()))?;
    let gammas = suite
        .functions
        .iter()
        .map(|(_, f)| p_energy_measure(form, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(suite_sup(g, form.p().as_f64(), &b.members, &sb.members, suite, &gammas)))
}

/// The PI constant of one ball, `sup / Ψ(x, r)`.
pub fn pi_ball_constant<T: Scalar>(
    form: &EnergyForm<'_, T>,
    psi: &ScaleFunction,
    sigma: f64,
    x: usize,
    r: T,
    suite: Option<&TestSuite<T>>,
) -> Result<Option<f64>> {
    Ok(pi_ball_sup(form, sigma, x, r, suite)?.map(|(v, _)| v / psi.eval_at(x, r.as_f64())))
}

fn exact_sup<T: Scalar>(g: &MetricMeasureGraph<T>, b: &[usize], sb: &[usize]) -> Result<Option<f64>> {
    if b.len() < 2 {
        return Ok(Some(0.0));
    }
    let bf = reduce(g, b, sb)?;
    let mu: Vec<T> = b.iter().map(|&v| g.mu()[v]).collect();
    Ok(mass_pencil(&bf, &mu)?.map(|v| v.as_f64()))
}

fn suite_sup<T: Scalar>(
    g: &MetricMeasureGraph<T>,
    p: f64,
    b: &[usize],
    sb: &[usize],
    suite: &TestSuite<T>,
    gammas: &[EnergyMeasure<T>],
) -> (f64, Option<String>) {
    let mut best = 0.0f64;
    let mut name = None;
    let mass: f64 = b.iter().map(|&v| g.mu()[v].as_f64()).sum();
    for ((fname, f), gamma) in suite.functions.iter().zip(gammas) {
        let mean = b.iter().map(|&v| g.mu()[v].as_f64() * f[v].as_f64()).sum::<f64>() / mass;
        let num: f64 = b
            .iter()
            .map(|&v| g.mu()[v].as_f64() * (f[v].as_f64() - mean).abs().powf(p))
            .sum();
        let den = gamma.mass(sb).as_f64();
        if den > 0.0 && num / den > best {
            best = num / den;
            name = Some(fname.clone());
        }
    }
    (best, name)
}

/// Poincaré constant `C_PI = max_B sup_f ∫_B |f − f_B|^p dμ / (Ψ(r) Γ_p⟨f⟩(σB))`.
pub fn check_pi<T: Scalar>(
    form: &EnergyForm<'_, T>,
    psi: &ScaleFunction,
    sigma: f64,
    plan: &SweepPlan<T>,
    suite: Option<&TestSuite<T>>,
) -> Result<ConditionReport> {
    check_sigma(sigma)?;
    let g = form.graph();
    let exact = form.is_quadratic();
    if !exact && suite.map_or(true, |s| s.is_empty()) {
        return Err(HkeError::InvalidParameter("p ≠ 2 needs a nonempty test suite".into()));
    }
    let gammas: Vec<EnergyMeasure<T>> = match suite {
        Some(s) if !exact => s.functions.iter().map(|(_, f)| p_energy_measure(form, f)).collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let s = T::lit(sigma);
    let mut samples: Vec<(usize, T, BallKey, BallKey)> = Vec::with_capacity(plan.len());
    for &x in &plan.centers {
        for &r in &plan.radii {
            samples.push((x, r, ball_key(g, x, r)?, ball_key(g, x, r * s)?));
        }
    }
    let mut index: HashMap<(BallKey, BallKey), usize> = HashMap::new();
    let mut unique: Vec<(BallKey, BallKey)> = Vec::new();
    for &(_, _, kb, ks) in &samples {
        index.entry((kb, ks)).or_insert_with(|| {
            unique.push((kb, ks));
            unique.len() - 1
        });
    }
    let p = form.p().as_f64();
    let values: Vec<Result<Option<(f64, Option<String>)>>> = unique
        .par_iter()
        .map(|&(kb, ks)| {
            let b = members_of(g, kb)?;
            let sb = members_of(g, ks)?;
            if exact {
                Ok(exact_sup(g, &b, &sb)?.map(|v| (v, None)))
            } else {
                Ok(Some(suite_sup(g, p, &b, &sb, suite.expect("checked"), &gammas)))
            }
        })
        .collect();
    let values: Vec<Option<(f64, Option<String>)>> = values.into_iter().collect::<Result<_>>()?;

    let mut rep = ConditionReport::new(ConditionTag::Pi);
    rep.mode = Some(plan.mode);
    let mut arg = Argmax::new();
    let mut skipped = 0usize;
    for &(x, r, kb, ks) in &samples {
        let Some((sup, fname)) = &values[index[&(kb, ks)]] else {
            skipped += 1;
            continue;
        };
        let rf = r.as_f64();
        let psi_r = psi.eval_at(x, rf);
        let ratio = sup / psi_r;
        rep.rows.push(SweepRow {
            y: x,
            r: rf,
            lhs: *sup,
            rhs: psi_r,
            ratio,
        });
        arg.offer(ratio, x, rf, fname.as_deref());
    }
    if skipped > 0 {
        rep.flag(format!("{skipped} balls skipped: energy vanishes on a non-constant function of σB"));
    }
    rep.set("C_PI", arg.value.max(0.0)).set("sigma", sigma).set("p", p);
    rep.worst_witness = arg.witness();
    rep.verdict = if !exact {
        Verdict::Fitted
    } else if arg.value.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(rep)
}

/// Energy of the harmonic cutoff for `B(x, r) ⊆ B(x, κr)` (its `p`-energy
/// when `p ≠ 2`, an upper bound for the `p`-capacity).
pub fn capacity<T: Scalar>(form: &EnergyForm<'_, T>, x: usize, r: T, kappa: f64) -> Result<f64> {
    let g = form.graph();
    let gen = assemble_generator(&EnergyForm::dirichlet(g))?;
    let inner = ball(g, x, r)?;
    let outer = ball(g, x, r * T::lit(kappa))?;
    let c = harmonic_cutoff_with(g, &gen, &inner, &outer)?;
    if form.is_quadratic() {
        Ok(c.energy.as_f64())
    } else {
        Ok(p_energy_measure(form, &c.values)?.total.as_f64())
    }
}

/// Upper capacity constant `C_cap = max cap(B(x,r), B(x,κr)) Ψ(r) / μ(B(x,r))`.
pub fn check_cap_upper<T: Scalar>(
    form: &EnergyForm<'_, T>,
    psi: &ScaleFunction,
    kappa: f64,
    plan: &SweepPlan<T>,
) -> Result<ConditionReport> {
    if !(kappa > 1.0) || !kappa.is_finite() {
        return Err(HkeError::InvalidParameter(format!("capacity ratio κ must exceed 1, got {kappa}")));
    }
    let g = form.graph();
    let n = g.n();
    let gen = assemble_generator(&EnergyForm::dirichlet(g))?;
    let k = T::lit(kappa);
    let mut samples = Vec::with_capacity(plan.len());
    for &x in &plan.centers {
        for &r in &plan.radii {
            samples.push((x, r, ball_key(g, x, r)?, ball_key(g, x, r * k)?));
        }
    }
    let mut index: HashMap<(BallKey, BallKey), usize> = HashMap::new();
    let mut unique = Vec::new();
    for &(_, _, kb, ko) in &samples {
        index.entry((kb, ko)).or_insert_with(|| {
            unique.push((kb, ko));
            unique.len() - 1
        });
    }
    enum Cap {
        Value(f64, f64),
        NoBoundary,
        Degenerate,
    }
    let values: Vec<Result<Cap>> = unique
        .par_iter()
        .map(|&(kb, ko)| {
            if ko.count >= n {
                return Ok(Cap::NoBoundary);
            }
            if kb.count == ko.count {
                return Ok(Cap::Degenerate);
            }
            let b = members_of(g, kb)?;
            let o = members_of(g, ko)?;
            let inner = crate::space::Ball {
                center: kb.center,
                radius: T::zero(),
                members: b,
            };
            let outer = crate::space::Ball {
                center: ko.center,
                radius: T::zero(),
                members: o,
            };
            let c = harmonic_cutoff_with(g, &gen, &inner, &outer)?;
            let e = if form.is_quadratic() {
                c.energy.as_f64()
            } else {
                p_energy_measure(form, &c.values)?.total.as_f64()
            };
            Ok(Cap::Value(e, inner.measure(g).as_f64()))
        })
        .collect();
    let values: Vec<Cap> = values.into_iter().collect::<Result<_>>()?;
    let mut rep = ConditionReport::new(ConditionTag::Cap);
    rep.mode = Some(plan.mode);
    let mut arg = Argmax::new();
    let (mut no_boundary, mut degenerate) = (0usize, 0usize);
    for &(x, r, kb, ko) in &samples {
        match values[index[&(kb, ko)]] {
            Cap::NoBoundary => no_boundary += 1,
            Cap::Degenerate => degenerate += 1,
            Cap::Value(cap, vol) => {
                let rf = r.as_f64();
                let psi_r = psi.eval_at(x, rf);
                let ratio = cap * psi_r / vol;
                rep.rows.push(SweepRow {
                    y: x,
                    r: rf,
                    lhs: cap,
                    rhs: vol / psi_r,
                    ratio,
                });
                arg.offer(ratio, x, rf, None);
            }
        }
    }
    if no_boundary > 0 {
        rep.flag(format!("{no_boundary} samples skipped: B(x, κr) is the whole graph"));
    }
    if degenerate > 0 {
        rep.flag(format!("{degenerate} samples skipped: degenerate annulus B(x, r) = B(x, κr)"));
    }
    if !form.is_quadratic() {
        rep.flag("p ≠ 2: energies of the quadratic equilibrium potentials");
    }
    rep.set("C_cap", arg.value.max(0.0)).set("kappa", kappa);
    rep.worst_witness = arg.witness();
    rep.verdict = if arg.key.is_none() {
        rep.flag("no admissible sample");
        Verdict::Inapplicable
    } else {
        Verdict::Pass
    };
    Ok(rep)
}
