use super::dense::tridiagonal_eigen;
use super::{dot, weighted_norm};
use crate::error::{HkeError, Result};
use crate::Scalar;

#[derive(Debug, Clone)]
pub struct LanczosOutcome<T> {
    pub values: Vec<T>,
    /// Unit (Euclidean) Ritz vectors, one per value.
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<T>,
    pub steps: usize,
}

/// `k` smallest eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalisation. The Krylov dimension grows until every requested Ritz
/// pair has residual `‖A y − θ y‖ ≤ tol · max(1, |θ|)`, or the space is exhausted.
pub fn lanczos_smallest<T, F>(apply: F, n: usize, k: usize, tol: T) -> Result<LanczosOutcome<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    if k == 0 || k > n {
        return Err(HkeError::InvalidParameter(format!(
            "requested {k} eigenpairs of an operator of size {n}"
        )));
    }
    // deterministic, non-degenerate start vector
    let mut q0: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.5) * T::lit(((i * 7919 + 13) % 101) as f64 / 101.0))
        .collect();
    let nrm = weighted_norm(&q0, None);
    q0.iter_mut().for_each(|x| *x /= nrm);

    let mut basis: Vec<Vec<T>> = vec![q0];
    let mut alphas: Vec<T> = Vec::new();
    let mut betas: Vec<T> = Vec::new();
    let mut w = vec![T::zero(); n];
    let mut target = (2 * k + 20).min(n);

    loop {
        while alphas.len() < target {
            let j = alphas.len();
            apply(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alphas.push(a);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    for (wi, &qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            let b = weighted_norm(&w, None);
            if alphas.len() == n || b <= T::epsilon() * T::lit(1e3) * a.abs().max(T::one()) {
                // invariant subspace reached
                target = alphas.len();
                break;
            }
            betas.push(b);
            basis.push(w.iter().map(|&x| x / b).collect());
        }
        let m = alphas.len();
        let off: Vec<T> = betas.iter().take(m.saturating_sub(1)).copied().collect();
        let eig = tridiagonal_eigen(&alphas, &off, true)?;
        let beta_m = if betas.len() >= m { betas[m - 1] } else { T::zero() };
        let vecs = eig.vectors.as_ref().expect("vectors requested");
        let kk = k.min(m);
        let mut values = Vec::with_capacity(kk);
        let mut vectors = Vec::with_capacity(kk);
        let mut residuals = Vec::with_capacity(kk);
        for idx in 0..kk {
            let theta = eig.values[idx];
            let mut y = vec![T::zero(); n];
            for (j, q) in basis.iter().take(m).enumerate() {
                let c = vecs.get(j, idx);
                for (yi, &qi) in y.iter_mut().zip(q) {
                    *yi += c * qi;
                }
            }
            let res = (beta_m * vecs.get(m - 1, idx)).abs();
            values.push(theta);
            vectors.push(y);
            residuals.push(res);
        }
        let converged = kk == k
            && values
                .iter()
                .zip(&residuals)
                .all(|(&th, &r)| r <= tol * th.abs().max(T::one()));
        let exhausted = m >= n || m < target || target >= n;
        let out = LanczosOutcome {
            values,
            vectors,
            residuals,
            steps: m,
        };
        if converged || (exhausted && kk == k && m == n) {
            return Ok(out);
        }
        if exhausted {
            if kk == k {
                return Ok(out);
            }
            let worst = out.residuals.iter().fold(T::zero(), |a, &b| a.max(b));
            return Err(HkeError::NoConvergence {
                iterations: m,
                residual: worst.as_f64(),
            });
        }
        target = (target * 2).min(n);
    }
}
