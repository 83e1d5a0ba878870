use serde::{Deserialize, Serialize};

use super::graph::MetricMeasureGraph;
use crate::error::{HkeError, Result};
use crate::Scalar;

/// Open ball `B(center, radius) = {y : d(center, y) < radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball<T> {
    pub center: usize,
    pub radius: T,
    /// Sorted vertex ids.
    pub members: Vec<usize>,
}

impl<T: Scalar> Ball<T> {
    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn measure(&self, g: &MetricMeasureGraph<T>) -> T {
        self.members.iter().map(|&v| g.mu()[v]).sum()
    }

    /// Indicator vector over all vertices of `g`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &v in &self.members {
            m[v] = true;
        }
        m
    }
}

pub fn ball<T: Scalar>(g: &MetricMeasureGraph<T>, x: usize, r: T) -> Result<Ball<T>> {
    if x >= g.n() {
        return Err(HkeError::VertexOutOfRange(x));
    }
    if !(r > T::zero()) {
        return Err(HkeError::InvalidParameter(format!("ball radius must be positive, got {r}")));
    }
    let mut members: Vec<usize> = match g.metric() {
        Ok(m) => {
            let c = g.ball_count(m, x, r);
            g.ball_prefix(m, x, c).iter().map(|&v| v as usize).collect()
        }
        Err(_) => {
            let d = g.distances_from(x);
            (0..g.n()).filter(|&y| d[y] < r).collect()
        }
    };
    members.sort_unstable();
    Ok(Ball {
        center: x,
        radius: r,
        members,
    })
}

/// Distinct positive pairwise distances together with the midpoints between
/// consecutive ones, so every combinatorially distinct ball is hit.
pub fn radius_grid<T: Scalar>(g: &MetricMeasureGraph<T>) -> Result<Vec<T>> {
    let d = g.distinct_distances()?;
    let mut out = Vec::with_capacity(2 * d.len());
    for (i, &r) in d.iter().enumerate() {
        if i > 0 {
            out.push((d[i - 1] + r) * T::lit(0.5));
        }
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions<T> {
    /// Maximum number of (center, radius) pairs for an exhaustive sweep.
    pub budget: usize,
    /// Radii per decade of the geometric grid used when sampling.
    pub per_decade: usize,
    pub min_radius: Option<T>,
    pub max_radius: Option<T>,
    /// Keep every `center_stride`-th vertex as a center (1 = all).
    pub center_stride: usize,
}

impl<T: Scalar> Default for SweepOptions<T> {
    fn default() -> Self {
        Self {
            budget: 100_000,
            per_decade: 16,
            min_radius: None,
            max_radius: None,
            center_stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPlan<T> {
    pub mode: SweepMode,
    pub centers: Vec<usize>,
    pub radii: Vec<T>,
}

impl<T: Scalar> SweepPlan<T> {
    pub fn len(&self) -> usize {
        self.centers.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Exhaustive over the full radius grid when the pair count fits the budget,
/// otherwise a geometric grid with `per_decade` radii per decade.
pub fn plan_sweep<T: Scalar>(g: &MetricMeasureGraph<T>, opts: &SweepOptions<T>) -> Result<SweepPlan<T>> {
    let stride = opts.center_stride.max(1);
    let centers: Vec<usize> = (0..g.n()).step_by(stride).collect();
    let lo = opts.min_radius.unwrap_or(T::zero());
    let hi = opts.max_radius.unwrap_or(T::infinity());
    let full: Vec<T> = radius_grid(g)?
        .into_iter()
        .filter(|&r| r > T::zero() && r >= lo && r <= hi)
        .collect();
    if centers.len() * full.len() <= opts.budget {
        return Ok(SweepPlan {
            mode: SweepMode::Exhaustive,
            centers,
            radii: full,
        });
    }
    let (Some(&first), Some(&last)) = (full.first(), full.last()) else {
        return Ok(SweepPlan {
            mode: SweepMode::Sampled,
            centers,
            radii: Vec::new(),
        });
    };
    let step = T::lit(10f64.powf(1.0 / opts.per_decade.max(1) as f64));
    let mut radii = Vec::new();
    let mut r = first;
    while r < last {
        radii.push(r);
        r *= step;
    }
    radii.push(last);
    Ok(SweepPlan {
        mode: SweepMode::Sampled,
        centers,
        radii,
    })
}
