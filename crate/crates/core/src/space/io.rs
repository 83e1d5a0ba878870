//! Text graph format: a header `n m`, then `m` lines `u v conductance length`,
//! then `n` lines `vertex mu [x y]`. Blank lines and `#` comments are ignored.

use std::io::{BufRead, Write};

use super::graph::{Edge, Family, MetricMeasureGraph};
use crate::error::{HkeError, Result};
use crate::Scalar;

pub fn write_graph<T: Scalar, W: Write>(g: &MetricMeasureGraph<T>, mut w: W) -> Result<()> {
    writeln!(w, "{} {}", g.n(), g.edges().len())?;
    for e in g.edges() {
        writeln!(
            w,
            "{} {} {} {}",
            e.u,
            e.v,
            e.conductance.as_f64(),
            e.length.as_f64()
        )?;
    }
    for v in 0..g.n() {
        match g.coords() {
            Some(c) => writeln!(
                w,
                "{} {} {} {}",
                v,
                g.mu()[v].as_f64(),
                c[v][0].as_f64(),
                c[v][1].as_f64()
            )?,
            None => writeln!(w, "{} {}", v, g.mu()[v].as_f64())?,
        }
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> HkeError {
    HkeError::Parse {
        line,
        message: message.into(),
    }
}

fn field<F: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<F> {
    let t = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    t.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from {t:?}")))
}

/// Reads a graph; positivity and connectivity are validated, the family tag is `custom`.
pub fn read_graph<T: Scalar, R: BufRead>(r: R) -> Result<MetricMeasureGraph<T>> {
    let mut lines = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        let t = l.split('#').next().unwrap_or("").trim().to_string();
        if !t.is_empty() {
            lines.push((i + 1, t));
        }
    }
    let mut it = lines.into_iter();
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, "empty graph file"))?;
    let mut toks = header.split_whitespace();
    let n: usize = field(toks.next(), hl, "vertex count")?;
    let m: usize = field(toks.next(), hl, "edge count")?;
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = it
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {m} edge lines")))?;
        let mut t = l.split_whitespace();
        let u: usize = field(t.next(), ln, "edge endpoint")?;
        let v: usize = field(t.next(), ln, "edge endpoint")?;
        let c: f64 = field(t.next(), ln, "conductance")?;
        let len: f64 = field(t.next(), ln, "length")?;
        if u >= n || v >= n {
            return Err(parse_err(ln, format!("edge endpoint out of range (n = {n})")));
        }
        if !(c > 0.0 && len > 0.0) || !c.is_finite() || !len.is_finite() {
            return Err(parse_err(ln, "conductance and length must be positive"));
        }
        edges.push(Edge {
            u,
            v,
            conductance: T::lit(c),
            length: T::lit(len),
        });
    }
    let mut mu = vec![T::nan(); n];
    let mut coords: Vec<Option<[T; 2]>> = vec![None; n];
    for _ in 0..n {
        let (ln, l) = it
            .next()
            .ok_or_else(|| parse_err(hl, format!("expected {n} vertex lines")))?;
        let mut t = l.split_whitespace();
        let v: usize = field(t.next(), ln, "vertex id")?;
        let w: f64 = field(t.next(), ln, "measure")?;
        if v >= n {
            return Err(parse_err(ln, format!("vertex id out of range (n = {n})")));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(parse_err(ln, "measure must be positive"));
        }
        if !mu[v].is_nan() {
            return Err(parse_err(ln, format!("vertex {v} listed twice")));
        }
        mu[v] = T::lit(w);
        if let Some(x) = t.next() {
            let x: f64 = field(Some(x), ln, "x coordinate")?;
            let y: f64 = field(t.next(), ln, "y coordinate")?;
            coords[v] = Some([T::lit(x), T::lit(y)]);
        }
    }
    if let Some((ln, _)) = it.next() {
        return Err(parse_err(ln, "trailing content after vertex lines"));
    }
    let coords = if coords.iter().all(Option::is_some) {
        Some(coords.into_iter().map(Option::unwrap).collect())
    } else {
        None
    };
    MetricMeasureGraph::new(n, edges, mu, coords, Family::Custom)
}
