//! Exact `p = 2` suprema over test functions for a ball pair `B ⊆ σB`.
//!
//! The energy `Γ⟨f⟩(σB)` counts edges inside `σB` fully and edges leaving it
//! with half weight. Values outside `σB` are free, so they are eliminated
//! (each outside vertex is a star on `σB`), then `σB \ B` is eliminated by a
//! Schur complement. What is left is a Laplacian-type form `E'` on `B` with
//! `sup_f ∫_B |f − f_B|² dν / Γ⟨f⟩(σB) = sup_{f: f_B = 0} fᵀNf / fᵀE'f`.

use crate::error::{HkeError, Result};
use crate::linalg::{cholesky, cholesky_solve, conjugate_gradient, lanczos_smallest, sym_eigen, CgOptions, CsrMatrix, DenseMatrix};
use crate::space::MetricMeasureGraph;
use crate::Scalar;

/// Dense solves and eigenproblems up to this size, iterative above.
const DENSE_LIMIT: usize = 300;

pub(crate) enum Reduced<T> {
    Sparse(CsrMatrix<T>),
    Dense(DenseMatrix<T>),
}

/// The reduced energy form on the inner ball.
pub(crate) struct BallForm<T> {
    /// Global ids of `B`, sorted; local index `i` is `members[i]`.
    pub members: Vec<usize>,
    pub e: Reduced<T>,
}

impl<T: Scalar> BallForm<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        match &self.e {
            Reduced::Sparse(m) => m.matvec(x, y),
            Reduced::Dense(m) => m.matvec(x, y),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match &self.e {
            Reduced::Sparse(m) => m.get(i, j),
            Reduced::Dense(m) => m.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        match &self.e {
            Reduced::Sparse(m) => m.to_dense(),
            Reduced::Dense(m) => m.clone(),
        }
    }
}

fn push_edge<T: Scalar>(t: &mut Vec<(usize, usize, T)>, i: usize, j: usize, w: T) {
    if i == j || w == T::zero() {
        return;
    }
    t.push((i, i, w));
    t.push((j, j, w));
    t.push((i, j, -w));
    t.push((j, i, -w));
}

/// Builds `E'` for `B ⊆ σB` (both sorted global id lists).
pub(crate) fn reduce<T: Scalar>(g: &MetricMeasureGraph<T>, b: &[usize], sb: &[usize]) -> Result<BallForm<T>> {
    let n = g.n();
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in b.iter().enumerate() {
        pos[v] = i;
    }
    let nb = b.len();
    let mut interior = Vec::new();
    for &v in sb {
        if pos[v] == usize::MAX {
            pos[v] = nb + interior.len();
            interior.push(v);
        } else if pos[v] >= nb {
            return Err(HkeError::InvalidParameter("dilated ball lists a vertex twice".into()));
        }
    }
    if interior.len() + nb != sb.len() {
        return Err(HkeError::InvalidParameter("inner ball is not contained in the dilated ball".into()));
    }
    let ns = sb.len();
    let half = T::lit(0.5);
    let mut trip: Vec<(usize, usize, T)> = Vec::new();
    // outside vertex -> (local neighbour, half conductance)
    let mut outside: Vec<(usize, usize, T)> = Vec::new();
    for &x in sb {
        let lx = pos[x];
        for &(y, ei) in g.neighbors(x) {
            let c = g.edges()[ei].conductance;
            let ly = pos[y];
            if ly == usize::MAX {
                outside.push((y, lx, half * c));
            } else if lx < ly {
                push_edge(&mut trip, lx, ly, c);
            }
        }
    }
    outside.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut k = 0;
    while k < outside.len() {
        let o = outside[k].0;
        let mut end = k;
        while end < outside.len() && outside[end].0 == o {
            end += 1;
        }
        let star = &outside[k..end];
        let total: T = star.iter().map(|s| s.2).sum();
        for i in 0..star.len() {
            for j in (i + 1)..star.len() {
                push_edge(&mut trip, star[i].1, star[j].1, star[i].2 * star[j].2 / total);
            }
        }
        k = end;
    }
    for &v in sb {
        pos[v] = usize::MAX;
    }
    let full = CsrMatrix::from_triplets(ns, &trip);
    if ns == nb {
        return Ok(BallForm {
            members: b.to_vec(),
            e: Reduced::Sparse(full),
        });
    }
    // Schur complement onto B
    let ni = ns - nb;
    let mut eii = DenseMatrix::zeros(ni);
    let mut eib = vec![vec![T::zero(); nb]; ni];
    let mut ebb = DenseMatrix::zeros(nb);
    for i in 0..ns {
        for (j, v) in full.row(i) {
            match (i < nb, j < nb) {
                (true, true) => ebb.set(i, j, v),
                (false, false) => eii.set(i - nb, j - nb, v),
                (false, true) => eib[i - nb][j] = v,
                (true, false) => {}
            }
        }
    }
    let l = cholesky(&eii)?;
    // X = E_II^{-1} E_IB, column by column
    let mut x = vec![vec![T::zero(); ni]; nb];
    for (j, col) in x.iter_mut().enumerate() {
        for i in 0..ni {
            col[i] = eib[i][j];
        }
        cholesky_solve(&l, col);
    }
    for a in 0..nb {
        for c in 0..nb {
            let mut s = T::zero();
            for i in 0..ni {
                s += eib[i][a] * x[c][i];
            }
            ebb.add(a, c, -s);
        }
    }
    // symmetrise rounding
    for a in 0..nb {
        for c in 0..a {
            let v = T::lit(0.5) * (ebb.get(a, c) + ebb.get(c, a));
            ebb.set(a, c, v);
            ebb.set(c, a, v);
        }
    }
    Ok(BallForm {
        members: b.to_vec(),
        e: Reduced::Dense(ebb),
    })
}

/// `sup_f ∫_B |f − f_B|² dμ / fᵀE'f`, i.e. `1/λ₁` of `M^{-1/2} E' M^{-1/2}`
/// on the complement of the constants. `None` if `E'` vanishes on a
/// non-constant direction (disconnected reduced network).
pub(crate) fn mass_pencil<T: Scalar>(bf: &BallForm<T>, mu: &[T]) -> Result<Option<T>> {
    let k = bf.len();
    if k < 2 {
        return Ok(Some(T::zero()));
    }
    let s: Vec<T> = mu.iter().map(|m| m.sqrt()).collect();
    let total: T = mu.iter().copied().sum();
    let u: Vec<T> = s.iter().map(|&v| v / total.sqrt()).collect();
    let mut scale = T::zero();
    for i in 0..k {
        scale = scale.max(bf.get(i, i) / mu[i]);
    }
    let lambda1 = if k <= DENSE_LIMIT / 3 {
        let mut a = bf.to_dense();
        for i in 0..k {
            for j in 0..k {
                let v = a.get(i, j) / (s[i] * s[j]);
                a.set(i, j, v);
            }
        }
        let eig = sym_eigen(&a, false)?;
        eig.values[1]
    } else {
        // push the constant mode to the top of the spectrum
        let shift = T::lit(4.0) * scale;
        let apply = |y: &[T], out: &mut [T]| {
            let x: Vec<T> = y.iter().zip(&s).map(|(&a, &b)| a / b).collect();
            bf.matvec(&x, out);
            let c: T = y.iter().zip(&u).map(|(&a, &b)| a * b).sum();
            for i in 0..k {
                out[i] = out[i] / s[i] + shift * c * u[i];
            }
        };
        let out = lanczos_smallest(apply, k, 1, T::lit(1e-13))?;
        out.values[0]
    };
    if !(lambda1 > T::lit(1e-11) * scale) {
        return Ok(None);
    }
    Ok(Some(lambda1.recip()))
}

/// Solves `E' u = a` for `a ⊥ 1`, grounding local vertex 0.
pub(crate) struct GroundedSolver<'a, T> {
    bf: &'a BallForm<T>,
    chol: Option<DenseMatrix<T>>,
}

impl<'a, T: Scalar> GroundedSolver<'a, T> {
    pub fn new(bf: &'a BallForm<T>) -> Result<Self> {
        let k = bf.len();
        let chol = if k <= DENSE_LIMIT || matches!(bf.e, Reduced::Dense(_)) {
            let mut a = bf.to_dense();
            for i in 0..k {
                a.set(0, i, T::zero());
                a.set(i, 0, T::zero());
            }
            a.set(0, 0, T::one());
            Some(cholesky(&a)?)
        } else {
            None
        };
        Ok(Self { bf, chol })
    }

    pub fn solve(&self, a: &[T]) -> Result<Vec<T>> {
        let mut b = a.to_vec();
        b[0] = T::zero();
        if let Some(l) = &self.chol {
            cholesky_solve(l, &mut b);
            return Ok(b);
        }
        let k = self.bf.len();
        let mut diag: Vec<T> = (0..k).map(|i| self.bf.get(i, i)).collect();
        diag[0] = T::one();
        let apply = |x: &[T], y: &mut [T]| {
            let mut xt = x.to_vec();
            xt[0] = T::zero();
            self.bf.matvec(&xt, y);
            y[0] = x[0];
        };
        Ok(conjugate_gradient(apply, &diag, &b, None, CgOptions::default())?.x)
    }
}

/// `sup_f ∫_B |f − f_B|² dν / fᵀE'f` with `f_B` the `μ`-average, as the top
/// eigenvalue of `W_zw = √(ν_z ν_w) a_zᵀ E'⁺ a_w`, `a_z = e_z − m/μ(B)`.
pub(crate) fn nu_pencil<T: Scalar>(bf: &BallForm<T>, mu: &[T], nu: &[T]) -> Result<T> {
    let k = bf.len();
    let support: Vec<usize> = (0..k).filter(|&i| nu[i] > T::zero()).collect();
    if support.is_empty() || k < 2 {
        return Ok(T::zero());
    }
    let total: T = mu.iter().copied().sum();
    let solver = GroundedSolver::new(bf)?;
    let a_of = |z: usize| -> Vec<T> {
        let mut a: Vec<T> = mu.iter().map(|&m| -m / total).collect();
        a[z] += T::one();
        a
    };
    if support.len() <= 64 {
        let us: Vec<Vec<T>> = support.iter().map(|&z| solver.solve(&a_of(z))).collect::<Result<_>>()?;
        let m = support.len();
        let mut w = DenseMatrix::zeros(m);
        for (p, &z) in support.iter().enumerate() {
            let az = a_of(z);
            for (q, &y) in support.iter().enumerate() {
                let v: T = az.iter().zip(&us[q]).map(|(&a, &b)| a * b).sum();
                w.set(p, q, (nu[z] * nu[y]).sqrt() * v);
            }
        }
        // symmetrise rounding
        for p in 0..m {
            for q in 0..p {
                let v = T::lit(0.5) * (w.get(p, q) + w.get(q, p));
                w.set(p, q, v);
                w.set(q, p, v);
            }
        }
        let eig = sym_eigen(&w, false)?;
        return Ok(eig.values[m - 1].max(T::zero()));
    }
    // Lanczos on −N^{1/2} Qᵀ E'⁺ Q N^{1/2} over the support
    let m = support.len();
    let sq: Vec<T> = support.iter().map(|&z| nu[z].sqrt()).collect();
    let failed = std::cell::Cell::new(false);
    let apply = |v: &[T], out: &mut [T]| {
        let mut x = vec![T::zero(); k];
        for (p, &z) in support.iter().enumerate() {
            x[z] = sq[p] * v[p];
        }
        // Q x = x − m (1ᵀx)/μ(B)
        let sx: T = x.iter().copied().sum();
        for i in 0..k {
            x[i] -= mu[i] * sx / total;
        }
        let u = match solver.solve(&x) {
            Ok(u) => u,
            Err(_) => {
                failed.set(true);
                vec![T::zero(); k]
            }
        };
        // Qᵀ u = u − 1 (mᵀu)/μ(B)
        let mu_u: T = mu.iter().zip(&u).map(|(&a, &b)| a * b).sum::<T>() / total;
        for (p, &z) in support.iter().enumerate() {
            out[p] = -sq[p] * (u[z] - mu_u);
        }
    };
    let out = lanczos_smallest(apply, m, 1, T::lit(1e-13))?;
    if failed.get() {
        return Err(HkeError::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    Ok((-out.values[0]).max(T::zero()))
}
