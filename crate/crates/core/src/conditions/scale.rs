use serde::{Deserialize, Serialize};

use crate::error::{HkeError, Result};
use crate::space::MetricMeasureGraph;
use crate::Scalar;

/// Piecewise log-log linear table `(r_i, Ψ(r_i))`, extended by the end slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleTable {
    pub r: Vec<f64>,
    pub psi: Vec<f64>,
}

impl ScaleTable {
    pub fn new(r: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        if r.len() != psi.len() || r.len() < 2 {
            return Err(HkeError::InvalidParameter("scale table needs at least two (r, Ψ) rows".into()));
        }
        for i in 0..r.len() {
            if !(r[i] > 0.0 && psi[i] > 0.0) || !r[i].is_finite() || !psi[i].is_finite() {
                return Err(HkeError::Parse {
                    line: i + 1,
                    message: "r and Ψ must be positive and finite".into(),
                });
            }
            if i > 0 && !(r[i] > r[i - 1] && psi[i] > psi[i - 1]) {
                return Err(HkeError::Parse {
                    line: i + 1,
                    message: "table must be strictly increasing in r and Ψ".into(),
                });
            }
        }
        Ok(Self { r, psi })
    }

    /// Parses `r psi` lines; `#` comments and blank lines are skipped and
    /// errors carry the line number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = Vec::new();
        let mut psi = Vec::new();
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let mut t = l.split_whitespace();
            let parse = |tok: Option<&str>, what: &str| -> Result<f64> {
                tok.and_then(|s| s.parse().ok()).ok_or_else(|| HkeError::Parse {
                    line: i + 1,
                    message: format!("cannot read {what}"),
                })
            };
            r.push(parse(t.next(), "r")?);
            psi.push(parse(t.next(), "Ψ")?);
            if t.next().is_some() {
                return Err(HkeError::Parse {
                    line: i + 1,
                    message: "expected two columns".into(),
                });
            }
            lines.push(i + 1);
        }
        Self::new(r, psi).map_err(|e| match e {
            HkeError::Parse { line, message } => HkeError::Parse {
                line: lines.get(line - 1).copied().unwrap_or(line),
                message,
            },
            other => other,
        })
    }

    fn slope(&self, i: usize) -> f64 {
        (self.psi[i + 1] / self.psi[i]).ln() / (self.r[i + 1] / self.r[i]).ln()
    }

    fn eval(&self, r: f64) -> f64 {
        let n = self.r.len();
        let i = match self.r.partition_point(|&x| x <= r) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        self.psi[i] * (r / self.r[i]).powf(self.slope(i))
    }

    fn inverse(&self, t: f64) -> f64 {
        let n = self.psi.len();
        let i = match self.psi.partition_point(|&x| x <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        self.r[i] * (t / self.psi[i]).powf(1.0 / self.slope(i))
    }

    fn exponents(&self) -> (f64, f64) {
        (0..self.r.len() - 1).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
            let s = self.slope(i);
            (lo.min(s), hi.max(s))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleKind {
    Power { beta: f64 },
    Tabulated { table: ScaleTable },
    /// `Ψ(x, r)` from one table per vertex.
    PerVertex { tables: Vec<ScaleTable> },
}

/// Scale function `Ψ` with certified lower/upper exponents: the table
/// interpolant satisfies `(R/r)^{β_L} ≤ Ψ(R)/Ψ(r) ≤ (R/r)^{β_U}` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleFunction {
    pub kind: ScaleKind,
    pub beta_lower: f64,
    pub beta_upper: f64,
}

impl ScaleFunction {
    pub fn power(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(HkeError::InvalidParameter(format!("power scale needs β > 0, got {beta}")));
        }
        Ok(Self {
            kind: ScaleKind::Power { beta },
            beta_lower: beta,
            beta_upper: beta,
        })
    }

    pub fn tabulated(table: ScaleTable) -> Self {
        let (lo, hi) = table.exponents();
        Self {
            kind: ScaleKind::Tabulated { table },
            beta_lower: lo,
            beta_upper: hi,
        }
    }

    pub fn per_vertex(tables: Vec<ScaleTable>) -> Result<Self> {
        if tables.is_empty() {
            return Err(HkeError::InvalidParameter("per-vertex scale needs at least one table".into()));
        }
        let (lo, hi) = tables.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), t| {
            let (a, b) = t.exponents();
            (lo.min(a), hi.max(b))
        });
        Ok(Self {
            kind: ScaleKind::PerVertex { tables },
            beta_lower: lo,
            beta_upper: hi,
        })
    }

    /// The conformal choice `Ψ(x, r) = μ(B(x, r))`, tabulated at the midpoints
    /// between consecutive distinct distances from `x` (one row per distinct ball).
    pub fn volume<T: Scalar>(g: &MetricMeasureGraph<T>) -> Result<Self> {
        let mut tables = Vec::with_capacity(g.n());
        for x in 0..g.n() {
            let mut d: Vec<f64> = g.dist_row(x)?.iter().map(|v| v.as_f64()).collect();
            d.sort_by(f64::total_cmp);
            d.dedup();
            let mut r = Vec::new();
            let mut psi = Vec::new();
            for w in d.windows(2) {
                let rad = 0.5 * (w[0] + w[1]);
                r.push(rad);
                psi.push(g.ball_measure(x, T::lit(rad))?.as_f64());
            }
            let last = *d.last().unwrap_or(&1.0);
            r.push(2.0 * last.max(f64::MIN_POSITIVE));
            psi.push(g.total_measure().as_f64() * 2.0);
            tables.push(ScaleTable::new(r, psi)?);
        }
        Self::per_vertex(tables)
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self.kind, ScaleKind::PerVertex { .. })
    }

    pub fn power_beta(&self) -> Option<f64> {
        match self.kind {
            ScaleKind::Power { beta } => Some(beta),
            _ => None,
        }
    }

    /// Radial `Ψ(r)`; for a per-vertex scale the first vertex's table is used.
    pub fn eval(&self, r: f64) -> f64 {
        self.eval_at(0, r)
    }

    pub fn eval_at(&self, x: usize, r: f64) -> f64 {
        match &self.kind {
            ScaleKind::Power { beta } => r.powf(*beta),
            ScaleKind::Tabulated { table } => table.eval(r),
            ScaleKind::PerVertex { tables } => tables[x.min(tables.len() - 1)].eval(r),
        }
    }

    /// `Ψ^{-1}(t)`.
    pub fn inverse(&self, t: f64) -> f64 {
        match &self.kind {
            ScaleKind::Power { beta } => t.powf(1.0 / beta),
            ScaleKind::Tabulated { table } => table.inverse(t),
            ScaleKind::PerVertex { tables } => tables[0].inverse(t),
        }
    }

    /// `Φ(s) = sup_{r>0} (s/r − 1/Ψ(r))`: closed form `(β−1)(s/β)^{β/(β−1)}`
    /// for a power scale with `β > 1`, numerical maximisation otherwise.
    pub fn phi(&self, s: f64) -> f64 {
        match self.kind {
            ScaleKind::Power { beta } if beta > 1.0 => (beta - 1.0) * (s / beta).powf(beta / (beta - 1.0)),
            _ => self.phi_numeric(s),
        }
    }

    /// Golden-section search on `log r` after a coarse bracket scan.
    pub fn phi_numeric(&self, s: f64) -> f64 {
        let f = |lr: f64| {
            let r = lr.exp();
            s / r - 1.0 / self.eval(r)
        };
        let (lo, hi, steps) = (-30.0f64, 30.0f64, 600usize);
        let h = (hi - lo) / steps as f64;
        let mut best = lo;
        for i in 0..=steps {
            let x = lo + h * i as f64;
            if f(x) > f(best) {
                best = x;
            }
        }
        let (mut a, mut b) = (best - h, best + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f(0.5 * (a + b)).max(f(best))
    }

    /// Worst constant `C` in `C^{-1}(R/r)^{β_L} ≤ Ψ(R)/Ψ(r) ≤ C(R/r)^{β_U}` on a grid.
    pub fn doubling_constant(&self, grid: &[f64]) -> f64 {
        let mut c = 1.0f64;
        for (i, &r) in grid.iter().enumerate() {
            for &big in &grid[i..] {
                if big <= r {
                    continue;
                }
                let q = self.eval(big) / self.eval(r);
                let s = big / r;
                c = c.max(q / s.powf(self.beta_upper)).max(s.powf(self.beta_lower) / q);
            }
        }
        c
    }
}

/// Weight `Θ(x, r) = c · (r/r0)^a · Ψ(x, r)^b · μ(B(x, r))^e` of the
/// two-measure inequalities; covers `Θ ≡ 1`, `Ψ^{1/p}` and `(Ψ/μ(B))^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub coefficient: f64,
    pub r0: f64,
    pub r_power: f64,
    pub psi_power: f64,
    pub volume_power: f64,
}

impl Theta {
    pub fn one() -> Self {
        Self {
            coefficient: 1.0,
            r0: 1.0,
            r_power: 0.0,
            psi_power: 0.0,
            volume_power: 0.0,
        }
    }

    /// `Ψ^{1/p}`.
    pub fn psi_root(p: f64) -> Self {
        Self {
            psi_power: 1.0 / p,
            ..Self::one()
        }
    }

    /// `(Ψ/μ(B))^{1/p}`.
    pub fn psi_over_volume(p: f64) -> Self {
        Self {
            psi_power: 1.0 / p,
            volume_power: -1.0 / p,
            ..Self::one()
        }
    }

    /// Multiplies by `(r/r0)^a`.
    pub fn relative(mut self, r0: f64, a: f64) -> Self {
        self.r0 = r0;
        self.r_power = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coefficient > 0.0 && self.r0 > 0.0) || !self.coefficient.is_finite() {
            return Err(HkeError::InvalidParameter("Θ must be positive everywhere".into()));
        }
        Ok(())
    }

    pub fn eval(&self, psi: &ScaleFunction, x: usize, r: f64, volume: f64) -> f64 {
        let mut v = self.coefficient;
        if self.r_power != 0.0 {
            v *= (r / self.r0).powf(self.r_power);
        }
        if self.psi_power != 0.0 {
            v *= psi.eval_at(x, r).powf(self.psi_power);
        }
        if self.volume_power != 0.0 {
            v *= volume.powf(self.volume_power);
        }
        v
    }
}
