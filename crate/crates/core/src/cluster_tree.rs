//! Merge heights, split extraction and pruning on estimated hierarchies, and
//! the ground-truth split levels of gridded densities.

use serde::Serialize;

use crate::dbscan::ClusterHierarchy;
use crate::dendrogram::Dendrogram;
use crate::error::{Error, Result};
use crate::geometry::squared_distance;
use crate::grid::GriddedDensity;

/// Highest level at which samples `i` and `j` share a cluster.
pub fn merge_height(hier: &ClusterHierarchy, i: usize, j: usize) -> Option<f64> {
    hier.merge_height(i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitChild {
    /// Smallest member index.
    pub id: usize,
    #[serde(skip)]
    pub node: usize,
    /// Sample of maximal estimated density in the child.
    pub peak: usize,
    pub peak_level: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitRecord {
    pub level: f64,
    pub children: Vec<SplitChild>,
    /// One peak per child that survives to `level + delta`.
    pub witnesses: Vec<usize>,
    pub delta: Option<f64>,
}

fn split_nodes(tree: &Dendrogram) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for v in tree.internal_nodes() {
        if tree.chain_top(v) != v {
            continue;
        }
        let kids = tree.strict_children(v);
        if kids.len() >= 2 {
            out.push((v, kids));
        }
    }
    out
}

/// Every level at which a cluster falls apart into two or more clusters at
/// the next stored level. Multi-way splits are one record.
pub fn extract_splits(hier: &ClusterHierarchy) -> Vec<SplitRecord> {
    let tree = hier.dendrogram();
    let mut out: Vec<SplitRecord> = split_nodes(tree)
        .into_iter()
        .map(|(v, kids)| SplitRecord {
            level: tree.height(v),
            children: kids
                .iter()
                .map(|&c| SplitChild {
                    id: tree.min_leaf(c),
                    node: c,
                    peak: tree.peak(c),
                    peak_level: tree.peak_height(c),
                    size: tree.size(c),
                })
                .collect(),
            witnesses: Vec::new(),
            delta: None,
        })
        .collect();
    out.sort_by(|a, b| a.level.total_cmp(&b.level).then(a.children[0].id.cmp(&b.children[0].id)));
    out
}

/// Splits with at least two children still present, in distinct clusters,
/// at `level + delta`. Witnesses are the peaks of those children.
pub fn significant_splits(hier: &ClusterHierarchy, delta: f64) -> Vec<SplitRecord> {
    prune(extract_splits(hier), delta)
}

/// Applies the significance rule to already extracted splits.
pub fn prune(splits: Vec<SplitRecord>, delta: f64) -> Vec<SplitRecord> {
    splits
        .into_iter()
        .filter_map(|mut s| {
            let target = s.level + delta;
            let witnesses: Vec<usize> =
                s.children.iter().filter(|c| c.peak_level >= target).map(|c| c.peak).collect();
            (witnesses.len() >= 2).then(|| {
                s.witnesses = witnesses;
                s.delta = Some(delta);
                s
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueChild {
    pub peak_cell: usize,
    pub peak_value: f64,
    pub cells: usize,
}

/// A split level of a gridded density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueSplit {
    /// Lower of the two distinct grid values bracketing the split.
    pub level: f64,
    /// Largest value change between the bridging cell and its face
    /// neighbors; the continuous split level lies within this of `level`.
    pub gap: f64,
    pub children: Vec<TrueChild>,
}

/// Merge tree of `{p >= λ}` over grid cells with face adjacency.
pub fn grid_merge_tree(gd: &GriddedDensity) -> Dendrogram {
    Dendrogram::build(gd.values(), &vec![true; gd.len()], |c, emit| gd.for_each_face_neighbor(c, &mut *emit))
}

/// Split levels of the gridded density, ascending. The reported level is
/// the grid value at which the children first join.
pub fn true_split_levels(gd: &GriddedDensity) -> Vec<TrueSplit> {
    let tree = grid_merge_tree(gd);
    let mut out: Vec<TrueSplit> = split_nodes(&tree)
        .into_iter()
        .map(|(v, kids)| {
            let level = tree.height(v);
            let bridge = tree.pivot(v).expect("internal node");
            let mut gap = 0.0f64;
            gd.for_each_face_neighbor(bridge, |nb| gap = gap.max((gd.value(nb) - level).abs()));
            TrueSplit {
                level,
                gap,
                children: kids
                    .iter()
                    .map(|&c| TrueChild { peak_cell: tree.peak(c), peak_value: tree.peak_height(c), cells: tree.size(c) })
                    .collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.level.total_cmp(&b.level));
    out
}

/// Converted separation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsSigma {
    pub epsilon: f64,
    pub sigma: f64,
    /// The separator is `{p <= separator_level}`.
    pub separator_level: f64,
}

/// `ε = δ/(3λ)`, `σ = (δ/(3L))^{1/α}`, separator `{p <= λ - δ}`.
pub fn delta_to_eps_sigma(delta: f64, lambda: f64, lipschitz: f64, alpha: f64) -> Result<EpsSigma> {
    if alpha > 1.0 {
        return Err(Error::Unsupported(format!("no (ε, σ) conversion for α = {alpha} > 1")));
    }
    if !(delta > 0.0 && delta < lambda) || !(lipschitz > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidInput("need 0 < δ < λ, L > 0 and α > 0".into()));
    }
    Ok(EpsSigma {
        epsilon: delta / (3.0 * lambda),
        sigma: (delta / (3.0 * lipschitz)).powf(1.0 / alpha),
        separator_level: lambda - delta,
    })
}

/// Smallest distance between cells of two components (center to center).
fn component_distance(gd: &GriddedDensity, a: &[usize], b: &[usize]) -> f64 {
    let boundary = |cells: &[usize], labels: &[bool]| -> Vec<Vec<f64>> {
        cells
            .iter()
            .filter(|&&c| {
                let mut edge = false;
                gd.for_each_face_neighbor(c, |nb| edge |= !labels[nb]);
                edge
            })
            .map(|&c| gd.center(c))
            .collect()
    };
    let mut in_a = vec![false; gd.len()];
    a.iter().for_each(|&c| in_a[c] = true);
    let mut in_b = vec![false; gd.len()];
    b.iter().for_each(|&c| in_b[c] = true);
    let (ba, bb) = (boundary(a, &in_a), boundary(b, &in_b));
    let mut best = f64::INFINITY;
    for x in &ba {
        for y in &bb {
            best = best.min(squared_distance(x, y));
        }
    }
    best.sqrt()
}

/// Estimates the separation constant `c_S` of a grid split: the minimum over
/// sampled `δ` of the distance between the children's components of
/// `{p >= λ* + δ}` divided by `δ^{1/α}`.
pub fn separation_constant(gd: &GriddedDensity, split: &TrueSplit, alpha: f64, samples: usize) -> f64 {
    let top = split.children.iter().map(|c| c.peak_value).fold(f64::INFINITY, f64::min);
    let range = top - split.level;
    let mut best = f64::INFINITY;
    for s in 1..=samples {
        let delta = range * s as f64 / (samples + 1) as f64;
        if delta <= split.gap {
            continue;
        }
        let comps = gd.components(split.level + delta);
        let members = comps.members();
        let parts: Vec<&Vec<usize>> = split
            .children
            .iter()
            .filter_map(|c| comps.label(c.peak_cell).map(|l| &members[l as usize]))
            .collect();
        for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                let dist = component_distance(gd, parts[i], parts[j]);
                best = best.min(dist / delta.powf(1.0 / alpha));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbscan::dbscan_hierarchy;
    use crate::geometry::Dataset;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chain_has_no_splits() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ds = Dataset::from_scalars(&xs).unwrap();
        let hier = dbscan_hierarchy(&ds, 10.0).unwrap();
        assert!(extract_splits(&hier).is_empty());
    }

    #[test]
    fn two_blobs_split_once() {
        let mut xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        xs.extend((0..20).map(|i| 5.0 + i as f64 * 0.01));
        // a thin bridge so the blobs share a level-0 component
        xs.extend((1..25).map(|i| 0.2 * i as f64));
        let ds = Dataset::from_scalars(&xs).unwrap();
        let hier = dbscan_hierarchy(&ds, 0.12).unwrap();
        let splits = extract_splits(&hier);
        assert!(!splits.is_empty());
        let sig = significant_splits(&hier, hier.lambda_of_k(10));
        assert_eq!(sig.len(), 1);
        let members: Vec<Vec<usize>> = sig[0]
            .children
            .iter()
            .filter(|c| c.peak_level >= sig[0].level + hier.lambda_of_k(10))
            .map(|c| hier.dendrogram().leaves_of(c.node))
            .collect();
        assert_eq!(members.len(), 2);
        assert!(members[0].iter().all(|&i| !(20..40).contains(&i)));
        assert!(members[0].contains(&0));
        assert!(members[1].contains(&20));
        for w in splits.windows(2) {
            assert!(w[0].level <= w[1].level);
        }
        for s in &splits {
            let sets: Vec<Vec<usize>> = s.children.iter().map(|c| hier.dendrogram().leaves_of(c.node)).collect();
            for i in 0..sets.len() {
                for j in i + 1..sets.len() {
                    assert!(sets[i].iter().all(|x| !sets[j].contains(x)));
                }
            }
        }
        assert!(significant_splits(&hier, 1e9).is_empty());
        // tiny Δ keeps every split
        assert_eq!(significant_splits(&hier, 1e-300).len(), splits.len());
    }

    #[test]
    fn unimodal_grid_has_no_split() {
        let gd = GriddedDensity::from_fn(&[-3.0], &[3.0], 0.01, |x| (-x[0] * x[0]).exp()).unwrap();
        assert!(true_split_levels(&gd).is_empty());
    }

    #[test]
    fn mixture_grid_splits_at_the_valley() {
        let phi = |x: f64, m: f64| (-(x - m) * (x - m) / (2.0 * 0.25)).exp() / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        let p = |x: &[f64]| 0.5 * phi(x[0], -2.0) + 0.5 * phi(x[0], 2.0);
        let gd = GriddedDensity::from_fn(&[-5.0], &[5.0], 0.005, p).unwrap();
        let splits = true_split_levels(&gd);
        assert_eq!(splits.len(), 1);
        let valley = p(&[0.0]);
        assert!((splits[0].level - valley).abs() <= splits[0].gap + 1e-15);
        assert_eq!(splits[0].children.len(), 2);
    }

    #[test]
    fn conversion_examples() {
        let r = delta_to_eps_sigma(0.3, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.epsilon, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(r.sigma, 0.1, epsilon = 1e-15);
        let r = delta_to_eps_sigma(0.3, 1.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(r.sigma, 0.01, epsilon = 1e-15);
        let a = delta_to_eps_sigma(0.3, 1.0, 1.0, 0.7).unwrap();
        let b = delta_to_eps_sigma(0.3, 1.0, 2.0, 0.7).unwrap();
        assert_abs_diff_eq!(b.sigma.powf(0.7), a.sigma.powf(0.7) / 2.0, epsilon = 1e-15);
        assert!(matches!(delta_to_eps_sigma(0.3, 1.0, 1.0, 1.5), Err(Error::Unsupported(_))));
    }
}
