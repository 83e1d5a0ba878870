//! Finite metric measure graphs: builders, open balls, doubling diagnostics
//! and the text graph format.

mod ball;
mod builders;
mod doubling;
mod graph;
mod io;

pub use ball::{ball, plan_sweep, radius_grid, Ball, SweepMode, SweepOptions, SweepPlan};
pub use builders::{
    build_gasket, build_gasket_with, build_lattice2d, build_path, build_vicsek, build_vicsek_with,
    gasket_vertex_count, vicsek_vertex_count, FractalOptions, DEFAULT_VERTEX_CAP,
};
pub use doubling::{doubling_report, DoublingReport};
pub use graph::{Edge, Family, MetricMeasureGraph, DIST_CACHE_CAP};
pub use io::{read_graph, write_graph};
