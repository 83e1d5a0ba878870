//! Least-squares line fits used by the exponent estimators.

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Coefficient of determination (1 when the points are collinear).
    pub r2: T,
    /// Weighted root-mean-square residual.
    pub rms: T,
}

/// Weighted least squares `y ≈ slope·x + intercept`. Needs two distinct `x`.
pub fn linear_fit<T: Scalar>(xs: &[T], ys: &[T], weights: Option<&[T]>) -> Option<LineFit<T>> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let w = |i: usize| weights.map_or(T::one(), |w| w[i]);
    let mut sw = T::zero();
    let mut sx = T::zero();
    let mut sy = T::zero();
    for i in 0..n {
        sw += w(i);
        sx += w(i) * xs[i];
        sy += w(i) * ys[i];
    }
    if !(sw > T::zero()) {
        return None;
    }
    let mx = sx / sw;
    let my = sy / sw;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * dy;
        syy += w(i) * dy * dy;
    }
    if !(sxx > T::zero()) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = T::zero();
    for i in 0..n {
        let e = ys[i] - (slope * xs[i] + intercept);
        sse += w(i) * e * e;
    }
    let r2 = if syy > T::zero() {
        T::one() - sse / syy
    } else {
        T::one()
    };
    Some(LineFit {
        slope,
        intercept,
        r2,
        rms: (sse / sw).sqrt(),
    })
}

/// Trapezoidal weights for sorted abscissae: each point stands for half of the
/// gaps on either side, so a dense patch of samples does not dominate the fit.
pub fn spacing_weights<T: Scalar>(xs: &[T]) -> Vec<T> {
    let n = xs.len();
    if n < 2 {
        return vec![T::one(); n];
    }
    let half = T::lit(0.5);
    (0..n)
        .map(|i| {
            let left = if i > 0 { xs[i] - xs[i - 1] } else { T::zero() };
            let right = if i + 1 < n { xs[i + 1] - xs[i] } else { T::zero() };
            (left + right) * half
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys, None).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
        assert!(f.rms < 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(linear_fit(&[1.0], &[2.0], None).is_none());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0], None).is_none());
    }

    #[test]
    fn spacing_weights_sum_to_span() {
        let xs = [0.0, 0.1, 0.2, 1.0, 3.0];
        let w = spacing_weights(&xs);
        let s: f64 = w.iter().sum();
        assert!((s - 3.0).abs() < 1e-14);
    }
}
