use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cutoff::harmonic_cutoff_with;
use crate::energy::Generator;
use crate::error::Result;
use crate::space::{ball, MetricMeasureGraph};
use crate::spectral::{resolvent_solve, Spectrum};
use crate::Scalar;

/// What goes into a [`TestSuite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Nonconstant eigenvectors taken from the spectrum.
    pub eigenvectors: usize,
    pub harmonic_cutoffs: usize,
    pub random: usize,
    pub smoothed_indicators: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            eigenvectors: 8,
            harmonic_cutoffs: 4,
            random: 8,
            smoothed_indicators: 4,
            seed: 0,
        }
    }
}

/// Named test functions for the suprema that have no exact characterisation.
#[derive(Debug, Clone)]
pub struct TestSuite<T> {
    pub functions: Vec<(String, Vec<T>)>,
}

impl<T: Scalar> TestSuite<T> {
    pub fn new() -> Self {
        Self { functions: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, f: Vec<T>) {
        self.functions.push((name.into(), f));
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.functions.iter().find(|(n, _)| n == name).map(|(_, f)| f.as_slice())
    }

    /// Eigenvectors, coordinates, distance functions, harmonic cutoffs,
    /// resolvent-smoothed ball indicators and seeded uniform noise.
    pub fn standard(
        g: &MetricMeasureGraph<T>,
        gen: &Generator<T>,
        spectrum: Option<&Spectrum<T>>,
        opts: &SuiteOptions,
    ) -> Result<Self> {
        let n = g.n();
        let mut s = Self::new();
        if let Some(spec) = spectrum {
            for k in 1..spec.len().min(opts.eigenvectors + 1) {
                s.push(format!("eig{k}"), spec.eigenvectors[k].clone());
            }
        }
        if let Some(c) = g.coords() {
            s.push("coord_x", c.iter().map(|p| p[0]).collect());
            s.push("coord_y", c.iter().map(|p| p[1]).collect());
        }
        let diam = g.diameter()?;
        for (name, x) in [("dist_first", 0), ("dist_mid", n / 2)] {
            s.push(name, g.dist_row(x)?.to_vec());
        }
        let centers = spread(n, opts.harmonic_cutoffs.max(opts.smoothed_indicators));
        for (i, &x) in centers.iter().take(opts.harmonic_cutoffs).enumerate() {
            let r = diam * T::lit(0.125 * (1 + i % 2) as f64);
            let inner = ball(g, x, r)?;
            let outer = ball(g, x, r + r)?;
            if let Ok(c) = harmonic_cutoff_with(g, gen, &inner, &outer) {
                s.push(format!("harmonic{x}"), c.values);
            }
        }
        for &x in centers.iter().take(opts.smoothed_indicators) {
            let r = diam * T::lit(0.125);
            let b = ball(g, x, r)?;
            let mut ind = vec![T::zero(); n];
            for &v in &b.members {
                ind[v] = T::one();
            }
            let lambda = (r * r).recip();
            s.push(format!("smoothed{x}"), resolvent_solve(gen, lambda, &ind)?);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for k in 0..opts.random {
            s.push(format!("random{k}"), (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect());
        }
        Ok(s)
    }
}

impl<T: Scalar> Default for TestSuite<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// `k` vertex ids spread evenly over `0..n`.
pub(crate) fn spread(n: usize, k: usize) -> Vec<usize> {
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let mut v: Vec<usize> = (0..k).map(|i| (2 * i + 1) * n / (2 * k)).collect();
    v.dedup();
    v
}
