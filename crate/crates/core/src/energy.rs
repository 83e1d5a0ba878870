//! Dirichlet form and p-energies on a weighted graph.
//!
//! Edge energy `c_uv |f(u) - f(v)|^p` is split half onto each endpoint, which
//! makes the energy measure additive over vertex partitions and the
//! product-rule identity exact.

use serde::{Deserialize, Serialize};

use crate::error::{HkeError, Result};
use crate::linalg::CsrMatrix;
use crate::space::MetricMeasureGraph;
use crate::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct EnergyForm<'g, T: Scalar> {
    graph: &'g MetricMeasureGraph<T>,
    p: T,
}

impl<'g, T: Scalar> EnergyForm<'g, T> {
    pub fn new(graph: &'g MetricMeasureGraph<T>, p: T) -> Result<Self> {
        if !(p >= T::one()) || !p.is_finite() {
            return Err(HkeError::InvalidParameter(format!("energy exponent must be >= 1, got {p}")));
        }
        Ok(Self { graph, p })
    }

    /// The `p = 2` Dirichlet form.
    pub fn dirichlet(graph: &'g MetricMeasureGraph<T>) -> Self {
        Self { graph, p: T::lit(2.0) }
    }

    pub fn graph(&self) -> &'g MetricMeasureGraph<T> {
        self.graph
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn is_quadratic(&self) -> bool {
        self.p == T::lit(2.0)
    }

    fn require_quadratic(&self, what: &str) -> Result<()> {
        if self.is_quadratic() {
            Ok(())
        } else {
            Err(HkeError::InvalidParameter(format!("{what} needs p = 2, form has p = {}", self.p)))
        }
    }

    pub(crate) fn check_fn(&self, f: &[T]) -> Result<()> {
        check_vertex_fn(self.graph, f)
    }

    /// `c |Δf|^p` on one edge.
    #[inline]
    pub(crate) fn edge_term(&self, c: T, diff: T) -> T {
        if self.is_quadratic() {
            c * diff * diff
        } else {
            c * diff.abs().powf(self.p)
        }
    }
}

pub(crate) fn check_vertex_fn<T: Scalar>(g: &MetricMeasureGraph<T>, f: &[T]) -> Result<()> {
    if f.len() != g.n() {
        return Err(HkeError::InvalidParameter(format!(
            "vertex function has length {}, graph has {} vertices",
            f.len(),
            g.n()
        )));
    }
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(HkeError::InvalidParameter(format!("vertex function is not finite at {i}")));
    }
    Ok(())
}

/// `𝓔(f, g) = Σ_edges c_uv (f(u)-f(v))(g(u)-g(v))`.
///
/// For `p ≠ 2` only the diagonal `𝓔_p(f) = Σ c_uv |f(u)-f(v)|^p` is defined;
/// passing two different functions is an error.
pub fn energy<T: Scalar>(form: &EnergyForm<'_, T>, f: &[T], g: &[T]) -> Result<T> {
    form.check_fn(f)?;
    form.check_fn(g)?;
    let edges = form.graph.edges();
    if form.is_quadratic() {
        Ok(edges
            .iter()
            .map(|e| e.conductance * (f[e.u] - f[e.v]) * (g[e.u] - g[e.v]))
            .sum())
    } else if f == g {
        Ok(edges.iter().map(|e| form.edge_term(e.conductance, f[e.u] - f[e.v])).sum())
    } else {
        Err(HkeError::InvalidParameter(format!(
            "the p = {} energy is not bilinear; pass the same function twice",
            form.p
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMeasure<T> {
    pub weights: Vec<T>,
    pub total: T,
}

impl<T: Scalar> EnergyMeasure<T> {
    /// Mass of a vertex set.
    pub fn mass(&self, set: &[usize]) -> T {
        set.iter().map(|&v| self.weights[v]).sum()
    }

    pub fn integrate(&self, phi: &[T]) -> T {
        self.weights.iter().zip(phi).map(|(&w, &p)| w * p).sum()
    }
}

/// `Γ_p⟨f⟩(x) = ½ Σ_y c_xy |f(x) - f(y)|^p`.
pub fn p_energy_measure<T: Scalar>(form: &EnergyForm<'_, T>, f: &[T]) -> Result<EnergyMeasure<T>> {
    form.check_fn(f)?;
    let half = T::lit(0.5);
    let mut weights = vec![T::zero(); form.graph.n()];
    for e in form.graph.edges() {
        let w = half * form.edge_term(e.conductance, f[e.u] - f[e.v]);
        weights[e.u] += w;
        weights[e.v] += w;
    }
    let total = weights.iter().copied().sum();
    Ok(EnergyMeasure { weights, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovCheck<T> {
    /// `𝓔(f⁺ ∧ 1, f⁺ ∧ 1)`.
    pub contracted: T,
    pub original: T,
    pub holds: bool,
}

pub fn check_markov<T: Scalar>(form: &EnergyForm<'_, T>, f: &[T]) -> Result<MarkovCheck<T>> {
    form.require_quadratic("the Markov check")?;
    let g: Vec<T> = f.iter().map(|&v| v.max(T::zero()).min(T::one())).collect();
    let contracted = energy(form, &g, &g)?;
    let original = energy(form, f, f)?;
    Ok(MarkovCheck {
        contracted,
        original,
        holds: contracted <= original,
    })
}

/// Returns `Γ⟨f⟩(region)`, which must vanish when `f` is constant on the
/// region and its neighbors. A varying `f` is refused rather than checked.
pub fn check_strong_locality<T: Scalar>(form: &EnergyForm<'_, T>, f: &[T], region: &[usize]) -> Result<T> {
    form.check_fn(f)?;
    let g = form.graph;
    let Some(&first) = region.first() else {
        return Ok(T::zero());
    };
    if let Some(&bad) = region.iter().find(|&&v| v >= g.n()) {
        return Err(HkeError::VertexOutOfRange(bad));
    }
    let value = f[first];
    for &x in region {
        let nbrs = g.neighbors(x).iter().map(|&(y, _)| y);
        for y in std::iter::once(x).chain(nbrs) {
            if f[y] != value {
                return Err(HkeError::Precondition(format!(
                    "f is not constant on the region and its neighbors (vertex {y})"
                )));
            }
        }
    }
    Ok(p_energy_measure(form, f)?.mass(region))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual<T> {
    /// `∫ φ dΓ⟨f⟩`.
    pub lhs: T,
    /// `𝓔(f, fφ) - ½ 𝓔(f², φ)`.
    pub rhs: T,
    pub residual: T,
    /// Sum of absolute values of the terms, the natural size for a relative test.
    pub scale: T,
}

pub fn energy_measure_identity_check<T: Scalar>(
    form: &EnergyForm<'_, T>,
    f: &[T],
    phi: &[T],
) -> Result<IdentityResidual<T>> {
    form.require_quadratic("the energy-measure identity")?;
    form.check_fn(phi)?;
    let gamma = p_energy_measure(form, f)?;
    let lhs = gamma.integrate(phi);
    let fphi: Vec<T> = f.iter().zip(phi).map(|(&a, &b)| a * b).collect();
    let f2: Vec<T> = f.iter().map(|&a| a * a).collect();
    let a = energy(form, f, &fphi)?;
    let b = energy(form, &f2, phi)?;
    let rhs = a - T::lit(0.5) * b;
    let scale = lhs.abs() + a.abs() + T::lit(0.5) * b.abs() + T::min_positive_value();
    Ok(IdentityResidual {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale,
    })
}

/// `(Lf)(x) = μ(x)^{-1} Σ_y c_xy (f(x) - f(y))`, stored with its stiffness
/// matrix `K = M L` so symmetric solvers can work on `K`.
#[derive(Debug, Clone)]
pub struct Generator<T> {
    pub matrix: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    pub mu: Vec<T>,
}

impl<T: Scalar> Generator<T> {
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn apply(&self, f: &[T], out: &mut [T]) {
        self.matrix.matvec(f, out);
    }

    pub fn apply_stiffness(&self, f: &[T], out: &mut [T]) {
        self.stiffness.matvec(f, out);
    }

    /// `⟨f, g⟩_μ`.
    pub fn inner(&self, f: &[T], g: &[T]) -> T {
        f.iter().zip(g).zip(&self.mu).map(|((&a, &b), &m)| a * b * m).sum()
    }

    /// `𝓔(f, g) = fᵀ K g`.
    pub fn form(&self, f: &[T], g: &[T]) -> T {
        let mut kg = vec![T::zero(); self.n()];
        self.stiffness.matvec(g, &mut kg);
        crate::linalg::dot(f, &kg)
    }
}

pub fn assemble_generator<T: Scalar>(form: &EnergyForm<'_, T>) -> Result<Generator<T>> {
    form.require_quadratic("the generator")?;
    let g = form.graph;
    let mut k = Vec::with_capacity(4 * g.edges().len());
    for e in g.edges() {
        let c = e.conductance;
        k.push((e.u, e.u, c));
        k.push((e.v, e.v, c));
        k.push((e.u, e.v, -c));
        k.push((e.v, e.u, -c));
    }
    let l: Vec<(usize, usize, T)> = k.iter().map(|&(i, j, c)| (i, j, c / g.mu()[i])).collect();
    Ok(Generator {
        matrix: CsrMatrix::from_triplets(g.n(), &l),
        stiffness: CsrMatrix::from_triplets(g.n(), &k),
        mu: g.mu().to_vec(),
    })
}
