//! Experiment configuration: TOML with `[graph]`, `[psi]`, `[solver]`,
//! `[suite]`, `[output]` sections and a `[[conditions]]` list.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use hkelab::conditions::{ScaleFunction, ScaleTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub graph: GraphSpec,
    pub psi: PsiSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub suite: SuiteSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Empty means the default pipeline: doubling, pi, ce, walk, hke.
    #[serde(default)]
    pub conditions: Vec<ConditionSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilySpec {
    Path,
    Lattice2d,
    Gasket,
    Vicsek,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub family: FamilySpec,
    /// Fractal level (gasket, vicsek).
    pub level: Option<u32>,
    /// Vertex count (path) or side length (lattice2d).
    pub size: Option<usize>,
    pub edge_length: Option<f64>,
    #[serde(default = "yes")]
    pub renormalized: bool,
    pub file: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PsiSpec {
    Power { beta: f64 },
    /// `Ψ = r^β̂` with `β̂` from the walk-dimension fit.
    Fit,
    /// Two columns `r Ψ(r)`, strictly increasing.
    Table { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub sweep_budget: usize,
    pub per_decade: usize,
    pub center_stride: usize,
    /// `a` in `t = a r^β`.
    pub time_scale: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            sweep_budget: 100_000,
            per_decade: 16,
            center_stride: 1,
            time_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub eigenvectors: usize,
    pub harmonic_cutoffs: usize,
    pub random: usize,
    pub smoothed_indicators: usize,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            eigenvectors: 8,
            harmonic_cutoffs: 4,
            random: 8,
            smoothed_indicators: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Doubling,
    Pi,
    Cap,
    Ce,
    Cs,
    T1,
    T2,
    Balance,
    Morrey,
    Sobolev,
    Walk,
    Hke,
    Holder,
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpec {
    Volume,
    Dirac,
    CutoffEnergy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSpec {
    One,
    PsiRoot,
    PsiOverVolume,
}

/// One step. Parameters a kind does not use are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    pub name: Option<String>,
    pub sigma: Option<f64>,
    pub kappa: Option<f64>,
    pub delta: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub t: Option<f64>,
    pub cutoffs: Option<usize>,
    pub per_decade: Option<usize>,
    pub measure: Option<MeasureSpec>,
    pub vertex: Option<usize>,
    pub theta: Option<ThetaSpec>,
    /// Allowed `|β̂ − β_Ψ|` for the walk step.
    pub tolerance: Option<f64>,
}

impl ConditionSpec {
    pub fn of(kind: ConditionKind) -> Self {
        Self {
            kind,
            name: None,
            sigma: None,
            kappa: None,
            delta: None,
            p: None,
            q: None,
            t: None,
            cutoffs: None,
            per_decade: None,
            measure: None,
            vertex: None,
            theta: None,
            tolerance: None,
        }
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(2.0)
    }

    /// Whether the step draws on the test suite (and so on its random part).
    pub fn uses_suite(&self) -> bool {
        match self.kind {
            ConditionKind::Cs => true,
            ConditionKind::Pi | ConditionKind::T2 | ConditionKind::Morrey | ConditionKind::Sobolev => self.p() != 2.0,
            _ => false,
        }
    }

    fn allowed(&self) -> &'static [&'static str] {
        use ConditionKind::*;
        match self.kind {
            Doubling => &[],
            Pi => &["sigma", "p", "per_decade"],
            Cap => &["kappa", "per_decade"],
            Ce => &["kappa", "cutoffs"],
            Cs => &["kappa", "cutoffs", "delta"],
            T1 => &["p", "q", "measure", "vertex", "theta", "per_decade"],
            T2 => &["p", "q", "sigma", "measure", "vertex", "theta", "per_decade"],
            Balance => &["p", "q", "t", "measure", "vertex", "per_decade"],
            Morrey => &["sigma", "p", "per_decade"],
            Sobolev => &["sigma", "p", "q", "per_decade"],
            Walk => &["tolerance"],
            Hke => &["kappa"],
            Holder => &["kappa", "cutoffs"],
        }
    }

    fn set_fields(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut mark = |name, set: bool| {
            if set {
                v.push(name)
            }
        };
        mark("sigma", self.sigma.is_some());
        mark("kappa", self.kappa.is_some());
        mark("delta", self.delta.is_some());
        mark("p", self.p.is_some());
        mark("q", self.q.is_some());
        mark("t", self.t.is_some());
        mark("cutoffs", self.cutoffs.is_some());
        mark("per_decade", self.per_decade.is_some());
        mark("measure", self.measure.is_some());
        mark("vertex", self.vertex.is_some());
        mark("theta", self.theta.is_some());
        mark("tolerance", self.tolerance.is_some());
        v
    }

    fn validate(&self) -> Result<()> {
        let allowed = self.allowed();
        for f in self.set_fields() {
            if !allowed.contains(&f) {
                bail!("`{f}` is not a parameter of {}", self.kind);
            }
        }
        let pos = |name: &str, v: Option<f64>, lo: f64| -> Result<()> {
            match v {
                Some(x) if !(x >= lo) || !x.is_finite() => bail!("{name} = {x} must be a finite number ≥ {lo}"),
                _ => Ok(()),
            }
        };
        pos("sigma", self.sigma, 1.0)?;
        pos("p", self.p, 1.0)?;
        pos("q", self.q, 1.0)?;
        pos("t", self.t, 1.0)?;
        if let Some(d) = self.delta {
            if !(d > 0.0) || !d.is_finite() {
                bail!("delta = {d} must be positive");
            }
        }
        if let Some(k) = self.kappa {
            let ok = match self.kind {
                ConditionKind::Cap => k > 1.0,
                ConditionKind::Hke => k > 0.0,
                _ => k > 0.0 && k <= 1.0,
            };
            if !ok || !k.is_finite() {
                bail!("kappa = {k} is out of range for {}", self.kind);
            }
        }
        if self.cutoffs == Some(0) {
            bail!("cutoffs must be at least 1");
        }
        if self.per_decade == Some(0) {
            bail!("per_decade must be at least 1");
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                bail!("tolerance must be positive");
            }
        }
        if self.kind == ConditionKind::Balance {
            let (p, q) = (self.p(), self.q.unwrap_or(4.0));
            if !(q > p) {
                bail!("balance needs q > p");
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            match line {
                Some(l) => anyhow::anyhow!("config line {l}: {}", e.message()),
                None => anyhow::anyhow!("config: {}", e.message()),
            }
        })
    }

    /// Reads, parses and validates a config; relative paths inside it are
    /// resolved against its directory. A given seed replaces the config's.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        if seed.is_some() {
            cfg.seed = seed;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate().with_context(|| format!("in {}", path.display()))?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(f) = self.graph.file.as_mut() {
            fix(f);
        }
        if let PsiSpec::Table { file } = &mut self.psi {
            fix(file);
        }
        fix(&mut self.output.dir);
    }

    /// The steps to run: the declared conditions or the default pipeline.
    pub fn steps(&self) -> Vec<ConditionSpec> {
        if self.conditions.is_empty() {
            use ConditionKind::*;
            [Doubling, Pi, Ce, Walk, Hke].into_iter().map(ConditionSpec::of).collect()
        } else {
            self.conditions.clone()
        }
    }

    /// Step names, unique: the given name or the kind, suffixed on repeats.
    pub fn step_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for s in self.steps() {
            let base = s.name.clone().unwrap_or_else(|| s.kind.to_string());
            let mut name = base.clone();
            let mut k = 2;
            while names.contains(&name) {
                name = format!("{base}_{k}");
                k += 1;
            }
            names.push(name);
        }
        names
    }

    pub fn needs_seed(&self) -> bool {
        self.suite.random > 0 && self.steps().iter().any(|s| s.uses_suite())
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.graph;
        match g.family {
            FamilySpec::Path | FamilySpec::Lattice2d => {
                match g.size {
                    Some(n) if n >= 2 => {}
                    _ => bail!("graph.size (≥ 2) is required for {:?}", g.family),
                }
                if g.level.is_some() {
                    bail!("graph.level does not apply to {:?}; use graph.size", g.family);
                }
            }
            FamilySpec::Gasket | FamilySpec::Vicsek => {
                if g.level.is_none() {
                    bail!("graph.level is required for {:?}", g.family);
                }
                if g.size.is_some() {
                    bail!("graph.size does not apply to {:?}; use graph.level", g.family);
                }
            }
            FamilySpec::File => match &g.file {
                Some(f) if f.is_file() => {}
                Some(f) => bail!("graph file {} does not exist", f.display()),
                None => bail!("graph.file is required for family = \"file\""),
            },
        }
        if g.family != FamilySpec::File && g.file.is_some() {
            bail!("graph.file only applies to family = \"file\"");
        }
        if let Some(l) = g.edge_length {
            if g.family != FamilySpec::Path {
                bail!("graph.edge_length only applies to the path");
            }
            if !(l > 0.0) || !l.is_finite() {
                bail!("graph.edge_length must be positive");
            }
        }
        self.scale_function()?;
        let s = &self.solver;
        if s.sweep_budget == 0 || s.per_decade == 0 || s.center_stride == 0 {
            bail!("solver.sweep_budget, per_decade and center_stride must be positive");
        }
        if !(s.time_scale > 0.0) || !s.time_scale.is_finite() {
            bail!("solver.time_scale must be positive");
        }
        for (spec, name) in self.steps().iter().zip(self.step_names()) {
            spec.validate().with_context(|| format!("condition `{name}`"))?;
        }
        if self.needs_seed() && self.seed.is_none() {
            bail!("a seed is required: the test suite has {} random functions (set `seed` or pass --seed)", self.suite.random);
        }
        Ok(())
    }

    /// `Ψ` for every kind except `fit`, which needs the walk fit first.
    pub fn scale_function(&self) -> Result<Option<ScaleFunction>> {
        match &self.psi {
            PsiSpec::Power { beta } => Ok(Some(ScaleFunction::power(*beta)?)),
            PsiSpec::Fit => Ok(None),
            PsiSpec::Table { file } => {
                let text = std::fs::read_to_string(file).with_context(|| format!("reading Ψ table {}", file.display()))?;
                let table = ScaleTable::parse(&text).with_context(|| format!("Ψ table {}", file.display()))?;
                Ok(Some(ScaleFunction::tabulated(table)))
            }
        }
    }
}
