//! Data generation and ingestion, out-of-sample evaluation, frontiers and
//! replication experiments.

pub mod data;
pub mod frontier;
pub mod generate;
pub mod svg;

pub use data::{load_returns_csv, Returns};
pub use frontier::{
    frontier, oos_metrics, replication_study, write_frontier_csv, Frontier, FrontierPoint, OosMetrics, RelPoint,
};
pub use generate::gen_newsvendor_demand;
pub use svg::render_frontier_svg;
