use super::{dot, weighted_norm};
use crate::error::{HkeError, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct CgOptions<T> {
    /// Stop once `‖r‖_w ≤ rel_tol · ‖b‖_w`.
    pub rel_tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for CgOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-12),
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final relative residual in the weighted norm, recomputed from scratch.
    pub relative_residual: T,
}

/// Jacobi-preconditioned conjugate gradient for an SPD operator.
///
/// `residual_weights`, when given, define the norm the stopping test is taken
/// in (`‖r‖_w² = Σ w_i r_i²`). The true residual is recomputed on exit and the
/// iteration resumes if recurrence drift left it above tolerance.
pub fn conjugate_gradient<T, F>(
    apply: F,
    diag: &[T],
    b: &[T],
    residual_weights: Option<&[T]>,
    opts: CgOptions<T>,
) -> Result<CgOutcome<T>>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    let n = b.len();
    let bnorm = weighted_norm(b, residual_weights);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            relative_residual: T::zero(),
        });
    }
    let inv_diag: Vec<T> = diag
        .iter()
        .map(|&d| if d > T::zero() { d.recip() } else { T::one() })
        .collect();
    let mut r = b.to_vec();
    let mut z = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut ap = vec![T::zero(); n];
    let mut iterations = 0usize;
    let target = opts.rel_tol * bnorm;

    for _restart in 0..4 {
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while iterations < opts.max_iter {
            if weighted_norm(&r, residual_weights) <= target {
                break;
            }
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= T::zero() || !pap.is_finite() {
                return Err(HkeError::NoConvergence {
                    iterations,
                    residual: (weighted_norm(&r, residual_weights) / bnorm).as_f64(),
                });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
        // true residual
        apply(&x, &mut ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        let rel = weighted_norm(&r, residual_weights) / bnorm;
        if rel <= opts.rel_tol {
            return Ok(CgOutcome {
                x,
                iterations,
                relative_residual: rel,
            });
        }
        if iterations >= opts.max_iter {
            return Err(HkeError::NoConvergence {
                iterations,
                residual: rel.as_f64(),
            });
        }
    }
    apply(&x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    let rel = weighted_norm(&r, residual_weights) / bnorm;
    Err(HkeError::NoConvergence {
        iterations,
        residual: rel.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;

    #[test]
    fn solves_tridiagonal_spd() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = conjugate_gradient(
            |x, y| a.matvec(x, y),
            &a.diagonal(),
            &b,
            None,
            CgOptions::default(),
        )
        .unwrap();
        let mut ax = vec![0.0; n];
        a.matvec(&out.x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
        assert!(out.relative_residual <= 1e-12);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let out = conjugate_gradient(
            |x: &[f64], y: &mut [f64]| y.copy_from_slice(x),
            &[1.0, 1.0],
            &[0.0, 0.0],
            None,
            CgOptions::default(),
        )
        .unwrap();
        assert_eq!(out.x, vec![0.0, 0.0]);
        assert_eq!(out.iterations, 0);
    }
}
