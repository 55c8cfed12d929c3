//! The acceptance checkers must be able to fail.

use treeclust::calibration::fixture;
use treeclust::dbscan::{dbscan_hierarchy, modified_dbscan_hierarchy};
use treeclust::evaluation::{ball_union_sandwich, check_delta_consistency, grid_level_sandwich, make_separated_pairs};
use treeclust::kde::Kernel;
use treeclust::levelset::kde_on_grid;
use treeclust::synthetic::registry::lookup;

#[test]
fn grid_sandwich_fails_without_slack() {
    let fx = fixture("lipschitz-spherical").unwrap();
    let spec = fx.spec().unwrap();
    let gd = spec.grid_on(&[-2.5], &[2.5], 1e-3).unwrap();
    let n = 4000;
    let h = fx.bandwidth(n).unwrap();
    let c = 2.0 * fx.budget(n, h).unwrap().a_n();
    let ds = spec.sample(n, 0).unwrap();
    let est = kde_on_grid(&ds, &Kernel::Spherical, h, &gd).unwrap();
    assert!(grid_level_sandwich(gd.values(), est.values(), c, 0.002).holds());
    let tight = grid_level_sandwich(gd.values(), est.values(), 0.0, 0.002);
    assert!(!tight.holds());
    assert!(tight.inner_violations > 0 && tight.outer_violations > 0);
    // an estimate equal to the truth passes with no slack
    assert!(grid_level_sandwich(gd.values(), gd.values(), 0.0, 0.002).holds());
}

#[test]
fn ball_sandwich_fails_without_slack() {
    let fx = fixture("lipschitz-spherical").unwrap();
    let spec = fx.spec().unwrap();
    let n = 2000;
    let h = fx.bandwidth(n).unwrap();
    let ds = spec.sample(n, 1).unwrap();
    let hier = dbscan_hierarchy(&ds, h).unwrap();
    let xs: Vec<Vec<f64>> = (0..=1000).map(|i| vec![-2.5 + i as f64 * 5e-3]).collect();
    let out = ball_union_sandwich(&ds, &hier.scores, h, |x| spec.pdf(x), 0.0, 0.002, &xs);
    assert!(!out.holds());
}

#[test]
fn consistency_check_fails_for_oversmoothed_tree() {
    // one huge bandwidth merges everything before the valley
    let spec = lookup("gaussian-two-bump").unwrap();
    let gd = spec.grid(1e-3).unwrap();
    let pairs = make_separated_pairs(&gd, 0.05).unwrap();
    assert!(!pairs.is_empty());
    let ds = spec.sample(1000, 3).unwrap();
    let coarse = dbscan_hierarchy(&ds, 3.0).unwrap();
    assert!(!check_delta_consistency(&coarse, &pairs, &gd, &ds).success);
    let kernel = treeclust::kde::build_valid_kernel(2, 1).unwrap();
    let fine = modified_dbscan_hierarchy(&ds, &kernel, 0.2).unwrap();
    assert!(check_delta_consistency(&fine, &pairs, &gd, &ds).success);
}
