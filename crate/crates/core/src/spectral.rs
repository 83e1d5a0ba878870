//! Spectral representation of the generator, heat kernel, resolvent and
//! harmonic extension.

use serde::{Deserialize, Serialize};

use crate::energy::Generator;
use crate::error::{HkeError, Result};
use crate::linalg::{
    cholesky, cholesky_solve, conjugate_gradient, lanczos_smallest, sym_eigen, CgOptions, DenseMatrix,
};
use crate::Scalar;

/// Largest graph decomposed densely by default.
pub const DENSE_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions<T> {
    pub dense_cap: usize,
    /// Number of eigenpairs for the iterative path (required above `dense_cap`).
    pub k: Option<usize>,
    /// Residual tolerance of the iterative path.
    pub tol: T,
}

impl<T: Scalar> Default for SpectralOptions<T> {
    fn default() -> Self {
        Self {
            dense_cap: DENSE_CAP,
            k: None,
            tol: T::lit(1e-10),
        }
    }
}

/// Eigenpairs of `L` with `μ`-orthonormal eigenvectors, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum<T> {
    pub eigenvalues: Vec<T>,
    /// `eigenvectors[k][x] = φ_k(x)`.
    pub eigenvectors: Vec<Vec<T>>,
    /// `‖Lφ_k − λ_k φ_k‖_μ`.
    pub residuals: Vec<T>,
    pub method: SpectrumMethod,
    pub mu: Vec<T>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Whether all `n` modes are present (the heat kernel is then exact).
    pub fn is_complete(&self) -> bool {
        self.len() == self.n()
    }

    pub fn spectral_gap(&self) -> Option<T> {
        self.eigenvalues.get(1).copied()
    }
}

/// Dense decomposition of `M^{-1/2} K M^{-1/2}` up to `dense_cap`, Lanczos
/// with full reorthogonalisation above it.
///
/// Sign convention: `φ_0 > 0`; for `k ≥ 1` the entry of largest modulus
/// (lowest vertex on ties) is positive.
pub fn eigendecompose<T: Scalar>(gen: &Generator<T>, opts: &SpectralOptions<T>) -> Result<Spectrum<T>> {
    let n = gen.n();
    let sqrt_mu: Vec<T> = gen.mu.iter().map(|m| m.sqrt()).collect();
    let sym_apply = |y: &[T], out: &mut [T]| {
        let x: Vec<T> = y.iter().zip(&sqrt_mu).map(|(&a, &s)| a / s).collect();
        gen.stiffness.matvec(&x, out);
        for (o, &s) in out.iter_mut().zip(&sqrt_mu) {
            *o /= s;
        }
    };
    let (values, sym_vectors, method) = if n <= opts.dense_cap && opts.k.map_or(true, |k| k >= n) {
        let mut a = DenseMatrix::zeros(n);
        for i in 0..n {
            for (j, v) in gen.stiffness.row(i) {
                a.set(i, j, v / (sqrt_mu[i] * sqrt_mu[j]));
            }
        }
        let eig = sym_eigen(&a, true)?;
        let vecs = (0..n).map(|k| eig.vector(k).expect("vectors requested")).collect();
        (eig.values, vecs, SpectrumMethod::Dense)
    } else {
        let k = opts.k.ok_or_else(|| {
            HkeError::InvalidParameter(format!(
                "graph has {n} vertices (dense cap {}); the iterative path needs an explicit k",
                opts.dense_cap
            ))
        })?;
        let out = lanczos_smallest(sym_apply, n, k.min(n), opts.tol)?;
        (out.values, out.vectors, SpectrumMethod::Iterative)
    };

    // constants span the kernel of a connected graph's generator; pin the
    // ground state to its exact value instead of the rounded one
    let mut values = values;
    let mut sym_vectors = sym_vectors;
    if let (Some(v0), Some(y0)) = (values.first_mut(), sym_vectors.first_mut()) {
        let scale = gen.stiffness.diagonal().iter().zip(&gen.mu).fold(T::zero(), |a, (&k, &m)| a.max(k / m));
        if v0.abs() <= T::lit(1e-9) * scale.max(T::one()) {
            *v0 = T::zero();
            y0.copy_from_slice(&sqrt_mu);
        }
    }

    let mut eigenvectors = Vec::with_capacity(values.len());
    let mut residuals = Vec::with_capacity(values.len());
    let mut ay = vec![T::zero(); n];
    for (k, y) in sym_vectors.into_iter().enumerate() {
        let norm = y.iter().map(|&v| v * v).sum::<T>().sqrt();
        let mut y: Vec<T> = y.into_iter().map(|v| v / norm).collect();
        let pivot = if k == 0 {
            y.iter().copied().sum::<T>()
        } else {
            let mut best = 0;
            for i in 1..n {
                if y[i].abs() > y[best].abs() {
                    best = i;
                }
            }
            y[best]
        };
        if pivot < T::zero() {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        sym_apply(&y, &mut ay);
        let res = ay
            .iter()
            .zip(&y)
            .map(|(&a, &b)| (a - values[k] * b) * (a - values[k] * b))
            .sum::<T>()
            .sqrt();
        residuals.push(res);
        eigenvectors.push(y.iter().zip(&sqrt_mu).map(|(&a, &s)| a / s).collect());
    }
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors,
        residuals,
        method,
        mu: gen.mu.clone(),
    })
}

/// `p_t(x, y) = Σ_k e^{−λ_k t} φ_k(x) φ_k(y)`, truncated to the modes present.
#[derive(Debug, Clone, Copy)]
pub struct HeatKernel<'s, T> {
    pub spectrum: &'s Spectrum<T>,
}

impl<'s, T: Scalar> HeatKernel<'s, T> {
    pub fn new(spectrum: &'s Spectrum<T>) -> Self {
        Self { spectrum }
    }

    fn decay(&self, t: T) -> Result<Vec<T>> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(HkeError::InvalidParameter(format!("heat kernel time must be positive, got {t}")));
        }
        Ok(self.spectrum.eigenvalues.iter().map(|&l| (-l * t).exp()).collect())
    }

    fn vertex(&self, x: usize) -> Result<()> {
        if x >= self.spectrum.n() {
            Err(HkeError::VertexOutOfRange(x))
        } else {
            Ok(())
        }
    }

    pub fn p(&self, t: T, x: usize, y: usize) -> Result<T> {
        self.vertex(x)?;
        self.vertex(y)?;
        let e = self.decay(t)?;
        Ok(self
            .spectrum
            .eigenvectors
            .iter()
            .zip(&e)
            .map(|(phi, &w)| w * phi[x] * phi[y])
            .sum())
    }

    /// `y ↦ p_t(x, y)`.
    pub fn row(&self, t: T, x: usize) -> Result<Vec<T>> {
        self.vertex(x)?;
        let e = self.decay(t)?;
        let mut out = vec![T::zero(); self.spectrum.n()];
        for (phi, &w) in self.spectrum.eigenvectors.iter().zip(&e) {
            let c = w * phi[x];
            for (o, &v) in out.iter_mut().zip(phi) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// `x ↦ p_t(x, x)`.
    pub fn diag(&self, t: T) -> Result<Vec<T>> {
        let e = self.decay(t)?;
        let mut out = vec![T::zero(); self.spectrum.n()];
        for (phi, &w) in self.spectrum.eigenvectors.iter().zip(&e) {
            for (o, &v) in out.iter_mut().zip(phi) {
                *o += w * v * v;
            }
        }
        Ok(out)
    }

    /// `P_t f(x) = Σ_y p_t(x, y) f(y) μ(y)`.
    pub fn apply(&self, t: T, f: &[T]) -> Result<Vec<T>> {
        let e = self.decay(t)?;
        Ok(self.spectral_apply(f, |k| e[k]))
    }

    fn spectral_apply(&self, f: &[T], weight: impl Fn(usize) -> T) -> Vec<T> {
        let s = self.spectrum;
        let mut out = vec![T::zero(); s.n()];
        for (k, phi) in s.eigenvectors.iter().enumerate() {
            let c: T = phi.iter().zip(f).zip(&s.mu).map(|((&a, &b), &m)| a * b * m).sum();
            let c = c * weight(k);
            for (o, &v) in out.iter_mut().zip(phi) {
                *o += c * v;
            }
        }
        out
    }
}

pub fn heat_kernel<T: Scalar>(spec: &Spectrum<T>, t: T, x: usize, y: usize) -> Result<T> {
    HeatKernel::new(spec).p(t, x, y)
}

fn check_len<T>(gen: &Generator<T>, f: &[T]) -> Result<()>
where
    T: Scalar,
{
    if f.len() != gen.n() {
        return Err(HkeError::InvalidParameter(format!(
            "vertex function has length {}, graph has {} vertices",
            f.len(),
            gen.n()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ResolventSolution<T> {
    pub h: Vec<T>,
    pub iterations: usize,
    /// `‖(L+λ)h − φ‖_μ / ‖φ‖_μ`.
    pub relative_residual: T,
}

/// `G_λ φ = (L + λ)^{-1} φ`, by conjugate gradient on `(K + λM) h = Mφ`.
pub fn resolvent_solve<T: Scalar>(gen: &Generator<T>, lambda: T, phi: &[T]) -> Result<Vec<T>> {
    resolvent_solve_with(gen, lambda, phi, CgOptions::default()).map(|s| s.h)
}

pub fn resolvent_solve_with<T: Scalar>(
    gen: &Generator<T>,
    lambda: T,
    phi: &[T],
    opts: CgOptions<T>,
) -> Result<ResolventSolution<T>> {
    check_len(gen, phi)?;
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(HkeError::InvalidParameter(format!("resolvent rate must be positive, got {lambda}")));
    }
    // split off the μ-mean: (L + λ) c = λ c exactly, and the remainder has no
    // large constant component to cancel when λ is small
    let total: T = gen.mu.iter().copied().sum();
    let mean = gen.inner(phi, &vec![T::one(); phi.len()]) / total;
    let b: Vec<T> = phi.iter().zip(&gen.mu).map(|(&f, &m)| (f - mean) * m).collect();
    let diag: Vec<T> = gen
        .stiffness
        .diagonal()
        .iter()
        .zip(&gen.mu)
        .map(|(&k, &m)| k + lambda * m)
        .collect();
    let inv_mu: Vec<T> = gen.mu.iter().map(|m| m.recip()).collect();
    let apply = |x: &[T], y: &mut [T]| {
        gen.stiffness.matvec(x, y);
        for ((yi, &xi), &m) in y.iter_mut().zip(x).zip(&gen.mu) {
            *yi += lambda * m * xi;
        }
    };
    let out = conjugate_gradient(apply, &diag, &b, Some(&inv_mu), opts)?;
    let h: Vec<T> = out.x.iter().map(|&v| v + mean / lambda).collect();
    // residual of the assembled solution against the original right-hand side
    let mut r = vec![T::zero(); h.len()];
    gen.apply(&h, &mut r);
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..h.len() {
        let e = r[i] + lambda * h[i] - phi[i];
        num += gen.mu[i] * e * e;
        den += gen.mu[i] * phi[i] * phi[i];
    }
    let relative_residual = if den > T::zero() { (num / den).sqrt() } else { num.sqrt() };
    Ok(ResolventSolution {
        h,
        iterations: out.iterations,
        relative_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventIdentity<T> {
    /// `𝓔(h, g)`.
    pub lhs: T,
    /// `⟨φ, g⟩_μ − λ ⟨h, g⟩_μ`.
    pub rhs: T,
    pub residual: T,
    pub scale: T,
}

/// Checks `𝓔(h, g) = ⟨φ, g⟩_μ − λ⟨h, g⟩_μ` for `h = G_λ φ`.
pub fn resolvent_identity_check<T: Scalar>(
    gen: &Generator<T>,
    lambda: T,
    phi: &[T],
    h: &[T],
    g: &[T],
) -> Result<ResolventIdentity<T>> {
    check_len(gen, phi)?;
    check_len(gen, h)?;
    check_len(gen, g)?;
    let lhs = gen.form(h, g);
    let a = gen.inner(phi, g);
    let b = lambda * gen.inner(h, g);
    let rhs = a - b;
    Ok(ResolventIdentity {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        scale: lhs.abs() + a.abs() + b.abs() + T::min_positive_value(),
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `∫_0^∞ e^{−λt} P_t φ dt` by composite 20-point Gauss–Legendre over
/// geometrically growing panels, integrating the spectral heat semigroup.
pub fn laplace_resolvent<T: Scalar>(spec: &Spectrum<T>, lambda: T, phi: &[T]) -> Result<Vec<T>> {
    if phi.len() != spec.n() {
        return Err(HkeError::InvalidParameter("vertex function length mismatch".into()));
    }
    if !(lambda > T::zero()) {
        return Err(HkeError::InvalidParameter(format!("resolvent rate must be positive, got {lambda}")));
    }
    let lam = lambda.as_f64();
    let top = spec.eigenvalues.last().map_or(0.0, |v| v.as_f64().max(0.0));
    let (gx, gw) = gauss_legendre(20);
    let coeffs: Vec<T> = spec
        .eigenvectors
        .iter()
        .map(|p| p.iter().zip(phi).zip(&spec.mu).map(|((&a, &b), &m)| a * b * m).sum())
        .collect();
    let mut out = vec![T::zero(); spec.n()];
    let end = 45.0 / lam;
    let mut a = 0.0;
    let mut b = 0.5 / (lam + top);
    while a < end {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (&x, &w) in gx.iter().zip(&gw) {
            let t = mid + half * x;
            let wt = T::lit(w * half * (-lam * t).exp());
            let tt = T::lit(t);
            for (k, phik) in spec.eigenvectors.iter().enumerate() {
                let c = wt * coeffs[k] * (-spec.eigenvalues[k] * tt).exp();
                for (o, &v) in out.iter_mut().zip(phik) {
                    *o += c * v;
                }
            }
        }
        a = b;
        b *= 2.0;
    }
    Ok(out)
}

/// Minimiser of `𝓔(u, u)` with `u` fixed on `boundary`: solves
/// `K_FF u_F = −K_FB u_B` (dense Cholesky for small free sets, CG otherwise).
pub fn harmonic_extension<T: Scalar>(gen: &Generator<T>, boundary: &[(usize, T)]) -> Result<Vec<T>> {
    let n = gen.n();
    if boundary.is_empty() {
        return Err(HkeError::InvalidParameter("harmonic extension needs a nonempty boundary".into()));
    }
    let mut fixed: Vec<Option<T>> = vec![None; n];
    for &(v, val) in boundary {
        if v >= n {
            return Err(HkeError::VertexOutOfRange(v));
        }
        if !val.is_finite() {
            return Err(HkeError::InvalidParameter(format!("boundary value at {v} is not finite")));
        }
        if let Some(old) = fixed[v] {
            if old != val {
                return Err(HkeError::InvalidParameter(format!("conflicting boundary values at {v}")));
            }
        }
        fixed[v] = Some(val);
    }
    // every free vertex must reach the boundary through free vertices
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| fixed[v].is_some()).collect();
    for &v in &stack {
        seen[v] = true;
    }
    while let Some(v) = stack.pop() {
        for (j, _) in gen.stiffness.row(v) {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    if let Some(v) = seen.iter().position(|s| !s) {
        return Err(HkeError::Degenerate(format!("free vertex {v} has no path to the boundary")));
    }

    let free: Vec<usize> = (0..n).filter(|&v| fixed[v].is_none()).collect();
    let mut u: Vec<T> = fixed.iter().map(|v| v.unwrap_or(T::zero())).collect();
    if free.is_empty() {
        return Ok(u);
    }
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in free.iter().enumerate() {
        pos[v] = i;
    }
    let mut rhs = vec![T::zero(); free.len()];
    for (i, &v) in free.iter().enumerate() {
        for (j, k) in gen.stiffness.row(v) {
            if let Some(val) = fixed[j] {
                rhs[i] -= k * val;
            }
        }
    }
    let m = free.len();
    let sol = if m <= 1000 {
        let mut a = DenseMatrix::zeros(m);
        for (i, &v) in free.iter().enumerate() {
            for (j, k) in gen.stiffness.row(v) {
                if pos[j] != usize::MAX {
                    a.set(i, pos[j], k);
                }
            }
        }
        let l = cholesky(&a)?;
        let mut x = rhs;
        cholesky_solve(&l, &mut x);
        x
    } else {
        let diag: Vec<T> = free.iter().map(|&v| gen.stiffness.get(v, v)).collect();
        let apply = |x: &[T], y: &mut [T]| {
            for (i, &v) in free.iter().enumerate() {
                let mut s = T::zero();
                for (j, k) in gen.stiffness.row(v) {
                    if pos[j] != usize::MAX {
                        s += k * x[pos[j]];
                    }
                }
                y[i] = s;
            }
        };
        conjugate_gradient(apply, &diag, &rhs, None, CgOptions::default())?.x
    };
    for (i, &v) in free.iter().enumerate() {
        u[v] = sol[i];
    }
    Ok(u)
}
