use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{HkeError, Result};
use crate::scalar::total_cmp;
use crate::Scalar;

/// Full all-pairs tables are kept only up to this many vertices.
pub const DIST_CACHE_CAP: usize = 20_000;

/// Distances closer than this (relative to the diameter) are snapped together,
/// so sums of non-dyadic edge lengths do not split one combinatorial radius in two.
const DIST_SNAP_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Path,
    Lattice2d,
    Gasket,
    Vicsek,
    Custom,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Path => "path",
            Family::Lattice2d => "lattice2d",
            Family::Gasket => "gasket",
            Family::Vicsek => "vicsek",
            Family::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub u: usize,
    pub v: usize,
    pub conductance: T,
    pub length: T,
}

/// Per-center views of the metric: vertices sorted by distance and the
/// running measure along that order. A ball is a prefix of its center's row.
#[derive(Debug)]
pub(crate) struct MetricTable<T> {
    pub dist: Vec<T>,
    pub order: Vec<u32>,
    pub sorted: Vec<T>,
    pub cum_mu: Vec<T>,
    pub distinct: Vec<T>,
}

/// Finite weighted graph with its shortest-path metric and a vertex measure.
#[derive(Debug)]
pub struct MetricMeasureGraph<T: Scalar> {
    n: usize,
    edges: Vec<Edge<T>>,
    mu: Vec<T>,
    coords: Option<Vec<[T; 2]>>,
    family: Family,
    adj: Vec<Vec<(usize, usize)>>,
    metric: OnceLock<MetricTable<T>>,
}

impl<T: Scalar> Clone for MetricMeasureGraph<T> {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            edges: self.edges.clone(),
            mu: self.mu.clone(),
            coords: self.coords.clone(),
            family: self.family,
            adj: self.adj.clone(),
            metric: OnceLock::new(),
        }
    }
}

#[derive(Clone, Copy)]
struct HeapItem<T>(T, usize);

impl<T: Scalar> PartialEq for HeapItem<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Scalar> Eq for HeapItem<T> {}
impl<T: Scalar> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Scalar> Ord for HeapItem<T> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, o: &Self) -> Ordering {
        total_cmp(&o.0, &self.0).then(o.1.cmp(&self.1))
    }
}

impl<T: Scalar> MetricMeasureGraph<T> {
    /// Validates and assembles a graph. Parallel edges are kept (their
    /// conductances act in parallel); self-loops are rejected.
    pub fn new(
        n: usize,
        edges: Vec<Edge<T>>,
        mu: Vec<T>,
        coords: Option<Vec<[T; 2]>>,
        family: Family,
    ) -> Result<Self> {
        if n == 0 {
            return Err(HkeError::InvalidParameter("graph needs at least one vertex".into()));
        }
        if mu.len() != n {
            return Err(HkeError::InvalidParameter(format!(
                "measure has {} entries for {n} vertices",
                mu.len()
            )));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(HkeError::InvalidParameter("coordinate count mismatch".into()));
            }
        }
        for (i, &m) in mu.iter().enumerate() {
            if !(m > T::zero()) || !m.is_finite() {
                return Err(HkeError::InvalidParameter(format!(
                    "vertex {i} has non-positive measure {m}"
                )));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for (k, e) in edges.iter().enumerate() {
            if e.u >= n {
                return Err(HkeError::VertexOutOfRange(e.u));
            }
            if e.v >= n {
                return Err(HkeError::VertexOutOfRange(e.v));
            }
            if e.u == e.v {
                return Err(HkeError::InvalidParameter(format!("self-loop at vertex {}", e.u)));
            }
            if !(e.conductance > T::zero()) || !e.conductance.is_finite() {
                return Err(HkeError::InvalidParameter(format!(
                    "edge {}-{} has non-positive conductance",
                    e.u, e.v
                )));
            }
            if !(e.length > T::zero()) || !e.length.is_finite() {
                return Err(HkeError::InvalidParameter(format!(
                    "edge {}-{} has non-positive length",
                    e.u, e.v
                )));
            }
            adj[e.u].push((e.v, k));
            adj[e.v].push((e.u, k));
        }
        let g = Self {
            n,
            edges,
            mu,
            coords,
            family,
            adj,
            metric: OnceLock::new(),
        };
        let comps = g.component_count();
        if comps != 1 {
            return Err(HkeError::Disconnected { components: comps });
        }
        Ok(g)
    }

    fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut comps = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            comps += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(x) = stack.pop() {
                for &(y, _) in &self.adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        comps
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    #[inline]
    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn coords(&self) -> Option<&[[T; 2]]> {
        self.coords.as_deref()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `(neighbor, edge index)` pairs incident to `x`.
    #[inline]
    pub fn neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[x]
    }

    pub fn total_measure(&self) -> T {
        self.mu.iter().copied().sum()
    }

    pub fn min_edge_length(&self) -> T {
        self.edges
            .iter()
            .map(|e| e.length)
            .fold(T::infinity(), T::min)
    }

    /// Same graph with every conductance, length and vertex weight multiplied.
    pub fn rescaled(&self, conductance: T, length: T, measure: T) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                u: e.u,
                v: e.v,
                conductance: e.conductance * conductance,
                length: e.length * length,
            })
            .collect();
        let mu = self.mu.iter().map(|&m| m * measure).collect();
        let coords = self
            .coords
            .as_ref()
            .map(|c| c.iter().map(|p| [p[0] * length, p[1] * length]).collect());
        Self::new(self.n, edges, mu, coords, self.family)
    }

    /// Single-source shortest-path distances.
    pub fn distances_from(&self, src: usize) -> Vec<T> {
        let mut d = vec![T::infinity(); self.n];
        let mut heap = BinaryHeap::new();
        d[src] = T::zero();
        heap.push(HeapItem(T::zero(), src));
        while let Some(HeapItem(dx, x)) = heap.pop() {
            if dx > d[x] {
                continue;
            }
            for &(y, k) in &self.adj[x] {
                let nd = dx + self.edges[k].length;
                if nd < d[y] {
                    d[y] = nd;
                    heap.push(HeapItem(nd, y));
                }
            }
        }
        d
    }

    pub(crate) fn metric(&self) -> Result<&MetricTable<T>> {
        if self.n > DIST_CACHE_CAP {
            return Err(HkeError::Resource(format!(
                "all-pairs metric table limited to {DIST_CACHE_CAP} vertices (graph has {})",
                self.n
            )));
        }
        Ok(self.metric.get_or_init(|| self.build_metric()))
    }

    fn build_metric(&self) -> MetricTable<T> {
        let n = self.n;
        let mut dist = Vec::with_capacity(n * n);
        for x in 0..n {
            dist.extend(self.distances_from(x));
        }
        // snap near-equal values to one representative
        let mut all: Vec<T> = dist.clone();
        all.sort_by(total_cmp);
        let diam = *all.last().expect("nonempty");
        let tol = T::lit(DIST_SNAP_REL) * diam.max(T::min_positive_value());
        let mut reps: Vec<T> = Vec::new();
        for &v in &all {
            match reps.last() {
                Some(&last) if v - last <= tol => {}
                _ => reps.push(v),
            }
        }
        for d in dist.iter_mut() {
            let i = reps.partition_point(|&r| r <= *d);
            *d = reps[i - 1];
        }
        // exact symmetry: take the smaller of the two directions
        for x in 0..n {
            for y in (x + 1)..n {
                let a = dist[x * n + y];
                let b = dist[y * n + x];
                let m = a.min(b);
                dist[x * n + y] = m;
                dist[y * n + x] = m;
            }
        }
        let mut order = Vec::with_capacity(n * n);
        let mut sorted = Vec::with_capacity(n * n);
        let mut cum_mu = Vec::with_capacity(n * n);
        let mut idx: Vec<u32> = Vec::with_capacity(n);
        for x in 0..n {
            let row = &dist[x * n..(x + 1) * n];
            idx.clear();
            idx.extend(0..n as u32);
            idx.sort_by(|&a, &b| total_cmp(&row[a as usize], &row[b as usize]).then(a.cmp(&b)));
            let mut acc = T::zero();
            for &v in &idx {
                order.push(v);
                sorted.push(row[v as usize]);
                acc += self.mu[v as usize];
                cum_mu.push(acc);
            }
        }
        let distinct: Vec<T> = reps.into_iter().filter(|&r| r > T::zero()).collect();
        MetricTable {
            dist,
            order,
            sorted,
            cum_mu,
            distinct,
        }
    }

    /// Shortest-path distance; uses the cached table when available.
    pub fn dist(&self, x: usize, y: usize) -> Result<T> {
        if x >= self.n {
            return Err(HkeError::VertexOutOfRange(x));
        }
        if y >= self.n {
            return Err(HkeError::VertexOutOfRange(y));
        }
        match self.metric() {
            Ok(m) => Ok(m.dist[x * self.n + y]),
            Err(_) => Ok(self.distances_from(x)[y]),
        }
    }

    /// Row of the distance table for `x`.
    pub fn dist_row(&self, x: usize) -> Result<&[T]> {
        let m = self.metric()?;
        Ok(&m.dist[x * self.n..(x + 1) * self.n])
    }

    pub fn diameter(&self) -> Result<T> {
        Ok(*self.metric()?.distinct.last().unwrap_or(&T::zero()))
    }

    /// Sorted distinct positive pairwise distances.
    pub fn distinct_distances(&self) -> Result<&[T]> {
        Ok(&self.metric()?.distinct)
    }

    /// Number of vertices strictly closer than `r` to `x`.
    #[inline]
    pub(crate) fn ball_count(&self, m: &MetricTable<T>, x: usize, r: T) -> usize {
        let row = &m.sorted[x * self.n..(x + 1) * self.n];
        row.partition_point(|&d| d < r)
    }

    /// Vertices of the ball `B(x, r)` ordered by distance from `x`.
    #[inline]
    pub(crate) fn ball_prefix<'a>(&self, m: &'a MetricTable<T>, x: usize, count: usize) -> &'a [u32] {
        &m.order[x * self.n..x * self.n + count]
    }

    #[inline]
    pub(crate) fn ball_mass(&self, m: &MetricTable<T>, x: usize, count: usize) -> T {
        if count == 0 {
            T::zero()
        } else {
            m.cum_mu[x * self.n + count - 1]
        }
    }

    /// `μ(B(x, r))`.
    pub fn ball_measure(&self, x: usize, r: T) -> Result<T> {
        let m = self.metric()?;
        let c = self.ball_count(m, x, r);
        Ok(self.ball_mass(m, x, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> MetricMeasureGraph<f64> {
        let e = |u, v, l| Edge {
            u,
            v,
            conductance: 1.0,
            length: l,
        };
        MetricMeasureGraph::new(
            3,
            vec![e(0, 1, 1.0), e(1, 2, 1.0), e(0, 2, 3.0)],
            vec![1.0; 3],
            None,
            Family::Custom,
        )
        .unwrap()
    }

    #[test]
    fn shortcut_is_not_taken() {
        let g = triangle();
        assert_eq!(g.dist(0, 2).unwrap(), 2.0);
        assert_eq!(g.diameter().unwrap(), 2.0);
        assert_eq!(g.distinct_distances().unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn rejects_disconnected_and_bad_weights() {
        let e = Edge {
            u: 0,
            v: 1,
            conductance: 1.0,
            length: 1.0,
        };
        let r = MetricMeasureGraph::new(3, vec![e], vec![1.0; 3], None, Family::Custom);
        assert_eq!(r.unwrap_err(), HkeError::Disconnected { components: 2 });
        let r = MetricMeasureGraph::new(2, vec![e], vec![1.0, 0.0], None, Family::Custom);
        assert!(matches!(r, Err(HkeError::InvalidParameter(_))));
        let bad = Edge { conductance: -1.0, ..e };
        let r = MetricMeasureGraph::new(2, vec![bad], vec![1.0, 1.0], None, Family::Custom);
        assert!(matches!(r, Err(HkeError::InvalidParameter(_))));
    }

    #[test]
    fn ball_measure_is_strict() {
        let g = triangle();
        assert_eq!(g.ball_measure(0, 1.0).unwrap(), 1.0);
        assert_eq!(g.ball_measure(0, 1.5).unwrap(), 2.0);
        assert_eq!(g.ball_measure(0, 2.5).unwrap(), 3.0);
    }
}
