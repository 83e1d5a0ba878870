use crate::error::{HkeError, Result};
use crate::Scalar;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *yi = super::dot(row, x);
        }
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    /// Column `k` (stored row-major, `vectors.get(i, k)`) is the unit eigenvector of `values[k]`.
    pub vectors: Option<DenseMatrix<T>>,
}

impl<T: Scalar> SymEigen<T> {
    pub fn vector(&self, k: usize) -> Option<Vec<T>> {
        self.vectors
            .as_ref()
            .map(|v| (0..v.n).map(|i| v.get(i, k)).collect())
    }
}

/// Householder tridiagonalisation followed by implicit QL with Wilkinson-style
/// shifts. Only the lower triangle of `a` is read.
pub fn sym_eigen<T: Scalar>(a: &DenseMatrix<T>, want_vectors: bool) -> Result<SymEigen<T>> {
    let n = a.n;
    if n == 0 {
        return Ok(SymEigen {
            values: vec![],
            vectors: want_vectors.then(|| DenseMatrix::zeros(0)),
        });
    }
    let mut v = a.clone();
    // symmetrise from the lower triangle
    for i in 0..n {
        for j in 0..i {
            let x = v.get(i, j);
            v.set(j, i, x);
        }
    }
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut d, &mut e, want_vectors.then_some(&mut v))?;
    Ok(SymEigen {
        values: d,
        vectors: want_vectors.then_some(v),
    })
}

/// Eigenvalues (ascending) and optionally eigenvectors of the symmetric
/// tridiagonal matrix with diagonal `diag` and off-diagonal `off` (`off.len() == n-1`).
pub(crate) fn tridiagonal_eigen<T: Scalar>(
    diag: &[T],
    off: &[T],
    want_vectors: bool,
) -> Result<SymEigen<T>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    // tql2 expects e[i] in slot i with e[0] unused
    let mut e = vec![T::zero(); n];
    e[1..n].copy_from_slice(&off[..(n - 1)]);
    let mut v = DenseMatrix::identity(n);
    tql2(&mut d, &mut e, want_vectors.then_some(&mut v))?;
    Ok(SymEigen {
        values: d,
        vectors: want_vectors.then_some(v),
    })
}

fn tred2<T: Scalar>(v: &mut DenseMatrix<T>, d: &mut [T], e: &mut [T]) {
    let n = v.n;
    let zero = T::zero();
    for j in 0..n {
        d[j] = v.get(n - 1, j);
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v.get(i - 1, j);
                v.set(i, j, zero);
                v.set(j, i, zero);
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v.set(j, i, f);
                g = e[j] + v.get(j, j) * f;
                for k in (j + 1)..i {
                    let vkj = v.get(k, j);
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let x = v.get(k, j) - (f * e[k] + g * d[k]);
                    v.set(k, j, x);
                }
                d[j] = v.get(i - 1, j);
                v.set(i, j, zero);
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        let vii = v.get(i, i);
        v.set(n - 1, i, vii);
        v.set(i, i, T::one());
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v.get(k, i + 1) / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v.get(k, i + 1) * v.get(k, j);
                }
                for k in 0..=i {
                    let x = v.get(k, j) - g * d[k];
                    v.set(k, j, x);
                }
            }
        }
        for k in 0..=i {
            v.set(k, i + 1, zero);
        }
    }
    for j in 0..n {
        d[j] = v.get(n - 1, j);
        v.set(n - 1, j, zero);
    }
    v.set(n - 1, n - 1, T::one());
    e[0] = zero;
}

fn tql2<T: Scalar>(d: &mut [T], e: &mut [T], mut v: Option<&mut DenseMatrix<T>>) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0usize;
            loop {
                iter += 1;
                if iter > 60 * n.max(10) {
                    return Err(HkeError::NoConvergence {
                        iterations: iter,
                        residual: e[l].as_f64(),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        for k in 0..n {
                            let vk1 = v.get(k, i + 1);
                            let vk = v.get(k, i);
                            v.set(k, i + 1, s * vk + c * vk1);
                            v.set(k, i, c * vk - s * vk1);
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    // ascending selection sort, carrying vectors along
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            if let Some(v) = v.as_deref_mut() {
                for row in 0..n {
                    let a = v.get(row, i);
                    let b = v.get(row, k);
                    v.set(row, i, b);
                    v.set(row, k, a);
                }
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`; fails if `A` is not positive definite.
pub fn cholesky<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = a.n;
    let mut l = DenseMatrix::zeros(n);
    for j in 0..n {
        let mut s = a.get(j, j);
        for k in 0..j {
            let ljk = l.get(j, k);
            s -= ljk * ljk;
        }
        if s <= T::zero() || !s.is_finite() {
            return Err(HkeError::Degenerate(format!(
                "matrix not positive definite at pivot {j}"
            )));
        }
        let ljj = s.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` in place.
pub fn cholesky_solve<T: Scalar>(l: &DenseMatrix<T>, b: &mut [T]) {
    let n = l.n;
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * b[k];
        }
        b[i] = s / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * b[k];
        }
        b[i] = s / l.get(i, i);
    }
}
