//! Point storage, neighbor search, union-find and ε-graph components.

mod components;
mod dataset;
mod index;
mod union_find;

pub use components::{epsilon_graph_components, EdgeRule};
pub use dataset::{distance, squared_distance, Dataset};
pub use index::{within_closed, within_open, GridIndex, KdTree, NeighborIndex};
pub use union_find::UnionFind;

use crate::error::Result;

/// Indices `i` with `||X_i - center|| <= r`, sorted ascending.
pub fn radius_neighbors(ds: &Dataset, center: &[f64], r: f64) -> Result<Vec<usize>> {
    ds.check_point(center)?;
    if !(r > 0.0) {
        return Err(crate::error::Error::InvalidInput(format!("radius must be positive, got {r}")));
    }
    Ok(NeighborIndex::new(ds, r).within(center, r))
}
