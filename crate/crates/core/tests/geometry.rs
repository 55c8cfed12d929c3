//! Sample-graph examples and boundary cases at exact distance 2h.

use treeclust::dbscan::{dbscan_hierarchy, lambda_of_k, modified_dbscan_hierarchy};
use treeclust::geometry::{epsilon_graph_components, radius_neighbors, Dataset, EdgeRule};
use treeclust::kde::build_valid_kernel;

#[test]
fn radius_neighbors_examples() {
    let ds = Dataset::from_scalars(&[0.0, 0.5, 3.0]).unwrap();
    assert_eq!(radius_neighbors(&ds, &[0.0], 1.0).unwrap(), vec![0, 1]);
    let one = Dataset::from_rows(&[[0.0, 0.0]]).unwrap();
    assert_eq!(radius_neighbors(&one, &[0.0, 0.0], 0.1).unwrap(), vec![0]);
    assert!(radius_neighbors(&ds, &[0.0, 1.0], 1.0).is_err());
}

#[test]
fn three_point_dbscan_example() {
    let ds = Dataset::from_scalars(&[0.0, 0.5, 3.0]).unwrap();
    let hier = dbscan_hierarchy(&ds, 1.0).unwrap();
    assert_eq!(hier.counts.as_deref(), Some(&[2, 2, 1][..]));
    assert_eq!(hier.clusters_at(hier.lambda_of_k(2)), vec![vec![0, 1]]);
    assert_eq!(hier.clusters_at(0.0), vec![vec![0, 1], vec![2]]);
    let c = hier.smallest_containing_cluster(&[0, 1]).unwrap();
    assert_eq!(c.level, lambda_of_k(2, 3, 1.0, 1));
    assert_eq!(hier.merge_height(0, 2), None);
}

#[test]
fn lambda_of_k_example() {
    assert_eq!(lambda_of_k(0, 100, 0.5, 1), 0.0);
    assert!((lambda_of_k(10, 100, 0.5, 1) - 0.1).abs() < 1e-15);
}

// Points exactly 2h apart: the closed h-balls touch, but the DBSCAN graph only
// joins pairs strictly closer than 2h. The modified graph joins them.
#[test]
fn touching_balls_split_under_strict_edges() {
    let ds = Dataset::from_scalars(&[0.0, 1.0, 2.0]).unwrap();
    let h = 0.5;
    let strict = epsilon_graph_components(&ds, &[0, 1, 2], 2.0 * h, EdgeRule::Strict);
    assert_eq!(strict, vec![vec![0], vec![1], vec![2]]);
    let closed = epsilon_graph_components(&ds, &[0, 1, 2], 2.0 * h, EdgeRule::NonStrict);
    assert_eq!(closed, vec![vec![0, 1, 2]]);

    let hier = dbscan_hierarchy(&ds, h).unwrap();
    assert_eq!(hier.clusters_at(0.0).len(), 3);
    let kernel = build_valid_kernel(2, 1).unwrap();
    let m = modified_dbscan_hierarchy(&ds, &kernel, h).unwrap();
    assert_eq!(m.clusters_at(0.0), vec![vec![0, 1, 2]]);
}

#[test]
fn lattice_ties_in_two_dimensions() {
    let rows: Vec<[f64; 2]> = (0..3).flat_map(|i| (0..3).map(move |j| [i as f64, j as f64])).collect();
    let ds = Dataset::from_rows(&rows).unwrap();
    let hier = dbscan_hierarchy(&ds, 0.5).unwrap();
    assert_eq!(hier.clusters_at(0.0).len(), 9);
    // a slightly larger radius joins the four axis neighbors but not diagonals
    let hier = dbscan_hierarchy(&ds, 0.5000001).unwrap();
    assert_eq!(hier.clusters_at(0.0).len(), 1);
    assert!(hier.counts.as_ref().unwrap().iter().all(|&c| c == 1));
}
