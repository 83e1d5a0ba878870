use std::collections::HashMap;

use super::graph::{Edge, Family, MetricMeasureGraph};
use crate::error::{HkeError, Result};
use crate::Scalar;

/// Default vertex cap for the self-similar builders.
pub const DEFAULT_VERTEX_CAP: usize = 200_000;

fn unit_edge<T: Scalar>(u: usize, v: usize, c: T, l: T) -> Edge<T> {
    Edge {
        u,
        v,
        conductance: c,
        length: l,
    }
}

/// Path `0 - 1 - ... - n-1` with unit conductances and unit vertex measure.
pub fn build_path<T: Scalar>(n: usize, edge_length: T) -> Result<MetricMeasureGraph<T>> {
    if n < 2 {
        return Err(HkeError::InvalidParameter(format!("path needs n >= 2, got {n}")));
    }
    if !(edge_length > T::zero()) {
        return Err(HkeError::InvalidParameter("edge length must be positive".into()));
    }
    let edges = (0..n - 1)
        .map(|i| unit_edge(i, i + 1, T::one(), edge_length))
        .collect();
    let coords = (0..n)
        .map(|i| [T::from_count(i) * edge_length, T::zero()])
        .collect();
    MetricMeasureGraph::new(n, edges, vec![T::one(); n], Some(coords), Family::Path)
}

/// `n × n` grid, vertex `(i, j)` has id `i * n + j`; unit data.
pub fn build_lattice2d<T: Scalar>(n: usize) -> Result<MetricMeasureGraph<T>> {
    if n < 2 {
        return Err(HkeError::InvalidParameter(format!("lattice needs n >= 2, got {n}")));
    }
    let mut edges = Vec::with_capacity(2 * n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            let v = i * n + j;
            if j + 1 < n {
                edges.push(unit_edge(v, v + 1, T::one(), T::one()));
            }
            if i + 1 < n {
                edges.push(unit_edge(v, v + n, T::one(), T::one()));
            }
        }
    }
    let coords = (0..n * n)
        .map(|v| [T::from_count(v % n), T::from_count(v / n)])
        .collect();
    MetricMeasureGraph::new(n * n, edges, vec![T::one(); n * n], Some(coords), Family::Lattice2d)
}

#[derive(Debug, Clone, Copy)]
pub struct FractalOptions {
    /// Apply the per-level conductance factor; `false` leaves unit conductances.
    pub renormalized: bool,
    pub vertex_cap: usize,
}

impl Default for FractalOptions {
    fn default() -> Self {
        Self {
            renormalized: true,
            vertex_cap: DEFAULT_VERTEX_CAP,
        }
    }
}

pub fn gasket_vertex_count(level: u32) -> Option<usize> {
    3usize
        .checked_pow(level)
        .and_then(|p| p.checked_add(1))
        .and_then(|p| p.checked_mul(3))
        .map(|p| p / 2)
}

pub fn build_gasket<T: Scalar>(level: u32) -> Result<MetricMeasureGraph<T>> {
    build_gasket_with(level, FractalOptions::default())
}

/// Level-`L` Sierpiński gasket graph: `3^L` unit triangles of side `2^{-L}`,
/// conductance `(5/3)^L` (or 1 when not renormalized), and each vertex carrying
/// `3^{-L}/3` per incident triangle so that `μ(X) = 1`.
pub fn build_gasket_with<T: Scalar>(level: u32, opts: FractalOptions) -> Result<MetricMeasureGraph<T>> {
    let count = gasket_vertex_count(level).unwrap_or(usize::MAX);
    if count > opts.vertex_cap {
        return Err(HkeError::Resource(format!(
            "gasket level {level} has {count} vertices, cap is {}",
            opts.vertex_cap
        )));
    }
    let side: i64 = 1 << level;
    // barycentric lattice coordinates (a, b) with a + b <= side
    let mut ids: HashMap<(i64, i64), usize> = HashMap::new();
    let mut pts: Vec<(i64, i64)> = Vec::new();
    let mut tri_count: Vec<usize> = Vec::new();
    let mut tris: Vec<[usize; 3]> = Vec::new();
    let mut stack = vec![(0i64, 0i64, side)];
    while let Some((a, b, s)) = stack.pop() {
        if s == 1 {
            let mut t = [0usize; 3];
            for (k, p) in [(a, b), (a + 1, b), (a, b + 1)].into_iter().enumerate() {
                let id = *ids.entry(p).or_insert_with(|| {
                    pts.push(p);
                    tri_count.push(0);
                    pts.len() - 1
                });
                tri_count[id] += 1;
                t[k] = id;
            }
            tris.push(t);
        } else {
            let h = s / 2;
            // pushed in reverse so the bottom-left child is expanded first
            stack.push((a, b + h, h));
            stack.push((a + h, b, h));
            stack.push((a, b, h));
        }
    }
    let lf = T::from_count(level as usize);
    let c = if opts.renormalized {
        (T::lit(5.0) / T::lit(3.0)).powf(lf)
    } else {
        T::one()
    };
    let len = T::lit(0.5).powf(lf);
    let cell = T::lit(3.0).powf(-lf) / T::lit(3.0);
    let mut edges = Vec::with_capacity(3 * tris.len());
    for t in &tris {
        edges.push(unit_edge(t[0], t[1], c, len));
        edges.push(unit_edge(t[1], t[2], c, len));
        edges.push(unit_edge(t[0], t[2], c, len));
    }
    let mu = tri_count.iter().map(|&k| cell * T::from_count(k)).collect();
    let sf = T::from_count(side as usize);
    let h = T::lit(3f64.sqrt() / 2.0);
    let coords = pts
        .iter()
        .map(|&(a, b)| {
            let (a, b) = (T::from_count(a as usize), T::from_count(b as usize));
            [(a + b * T::lit(0.5)) / sf, b * h / sf]
        })
        .collect();
    MetricMeasureGraph::new(pts.len(), edges, mu, Some(coords), Family::Gasket)
}

pub fn vicsek_vertex_count(level: u32) -> Option<usize> {
    // v_{L+1} = 5 v_L - 4, v_0 = 5
    let mut v: usize = 5;
    for _ in 0..level {
        v = v.checked_mul(5)?.checked_sub(4)?;
    }
    Some(v)
}

pub fn build_vicsek<T: Scalar>(level: u32) -> Result<MetricMeasureGraph<T>> {
    build_vicsek_with(level, FractalOptions::default())
}

/// Level-`L` plus-shaped Vicsek tree: `5^L` plus-shaped cells glued at their arm
/// tips, edge length `3^{-L}`, conductance `3^L`, and cell mass `5^{-L}` split
/// equally among the cell's five vertices.
pub fn build_vicsek_with<T: Scalar>(level: u32, opts: FractalOptions) -> Result<MetricMeasureGraph<T>> {
    let count = vicsek_vertex_count(level).unwrap_or(usize::MAX);
    if count > opts.vertex_cap {
        return Err(HkeError::Resource(format!(
            "vicsek level {level} has {count} vertices, cap is {}",
            opts.vertex_cap
        )));
    }
    // kept cells in a 3^L grid, generated digit by digit
    const PLUS: [(i64, i64); 5] = [(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)];
    let mut cells: Vec<(i64, i64)> = vec![(0, 0)];
    for _ in 0..level {
        let mut next = Vec::with_capacity(cells.len() * 5);
        for &(i, j) in &cells {
            for &(di, dj) in &PLUS {
                next.push((3 * i + di, 3 * j + dj));
            }
        }
        cells = next;
    }
    let mut ids: HashMap<(i64, i64), usize> = HashMap::new();
    let mut pts: Vec<(i64, i64)> = Vec::new();
    let mut mass: Vec<usize> = Vec::new();
    let mut edges = Vec::with_capacity(4 * cells.len());
    let lf = T::from_count(level as usize);
    let c = if opts.renormalized {
        T::lit(3.0).powf(lf)
    } else {
        T::one()
    };
    let len = T::lit(3.0).powf(-lf);
    for &(i, j) in &cells {
        // half-unit coordinates: center (2i+1, 2j+1), tips on the cell sides
        let verts = [
            (2 * i + 1, 2 * j + 1),
            (2 * i, 2 * j + 1),
            (2 * i + 2, 2 * j + 1),
            (2 * i + 1, 2 * j),
            (2 * i + 1, 2 * j + 2),
        ];
        let mut vid = [0usize; 5];
        for (k, p) in verts.into_iter().enumerate() {
            let id = *ids.entry(p).or_insert_with(|| {
                pts.push(p);
                mass.push(0);
                pts.len() - 1
            });
            mass[id] += 1;
            vid[k] = id;
        }
        for &tip in &vid[1..] {
            edges.push(unit_edge(vid[0], tip, c, len));
        }
    }
    let share = T::lit(5.0).powf(-lf) / T::lit(5.0);
    let mu = mass.iter().map(|&k| share * T::from_count(k)).collect();
    let scale = T::lit(2.0) * T::lit(3.0).powf(lf);
    let coords = pts
        .iter()
        .map(|&(a, b)| [T::from_count(a as usize) / scale, T::from_count(b as usize) / scale])
        .collect();
    MetricMeasureGraph::new(pts.len(), edges, mu, Some(coords), Family::Vicsek)
}
