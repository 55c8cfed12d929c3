//! The DBSCAN sweep over `k` and the modified DBSCAN sweep over `λ` with a
//! valid kernel.
//!
//! Both are stored as one merge tree over sample indices with levels in
//! density units: for the DBSCAN sweep the level of `k` is `λ_k = k/(n h^d V_d)`,
//! which is exactly the spherical estimate of a point with `k` neighbors.

use serde::{Deserialize, Serialize};

use crate::dendrogram::{Dendrogram, NO_PARENT};
use crate::error::{Error, Result};
use crate::geometry::{Dataset, EdgeRule, NeighborIndex};
use crate::kde::{unit_ball_volume, DensityEstimate, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dbscan,
    Mdbscan,
    /// Components of `{p̂_h >= λ}` on a grid, read off at the samples.
    Gridlevel,
}

impl Algorithm {
    /// Edge rule of the sample graph; `None` for the grid algorithm.
    pub fn edge_rule(self) -> Option<EdgeRule> {
        match self {
            Algorithm::Dbscan => Some(EdgeRule::Strict),
            Algorithm::Mdbscan => Some(EdgeRule::NonStrict),
            Algorithm::Gridlevel => None,
        }
    }
}

/// `λ_k = k / (n h^d V_d)`.
pub fn lambda_of_k(k: usize, n: usize, h: f64, d: usize) -> f64 {
    k as f64 / (n as f64 * h.powi(d as i32) * unit_ball_volume(d))
}

/// One materialized level of a hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyLevel {
    pub lambda: f64,
    /// Count threshold, DBSCAN only.
    pub k: Option<usize>,
    pub active: Vec<usize>,
    /// Clusters sorted internally and ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
}

/// The smallest cluster holding a set of indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterRef {
    pub level: f64,
    /// Smallest member index.
    pub id: usize,
    pub node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeEvent {
    pub level: f64,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone)]
pub struct ClusterHierarchy {
    pub algorithm: Algorithm,
    pub h: f64,
    pub kernel: Kernel,
    pub n: usize,
    pub dim: usize,
    /// `p̂_h(X_i)` per sample.
    pub scores: Vec<f64>,
    /// Ball counts, DBSCAN only.
    pub counts: Option<Vec<usize>>,
    levels: Vec<f64>,
    tree: Dendrogram,
}

/// DBSCAN sweep: spherical counts, strict `< 2h` edges.
pub fn dbscan_hierarchy(ds: &Dataset, h: f64) -> Result<ClusterHierarchy> {
    let est = DensityEstimate::compute(ds, &Kernel::Spherical, h)?;
    Ok(build(ds, Algorithm::Dbscan, est))
}

/// Modified DBSCAN: kernel estimate at the samples, non-strict `<= 2h` edges,
/// levels `λ >= 0`.
pub fn modified_dbscan_hierarchy(ds: &Dataset, kernel: &Kernel, h: f64) -> Result<ClusterHierarchy> {
    let est = DensityEstimate::compute(ds, kernel, h)?;
    Ok(build(ds, Algorithm::Mdbscan, est))
}

/// Hierarchy from precomputed scores, for callers that already hold `p̂_h`.
pub fn hierarchy_from_estimate(ds: &Dataset, algorithm: Algorithm, est: DensityEstimate) -> Result<ClusterHierarchy> {
    if est.values.len() != ds.len() {
        return Err(Error::InvalidInput("estimate does not match dataset".into()));
    }
    if algorithm == Algorithm::Gridlevel {
        return Err(Error::Unsupported("the grid hierarchy is built from a gridded estimate".into()));
    }
    Ok(build(ds, algorithm, est))
}

fn build(ds: &Dataset, algorithm: Algorithm, est: DensityEstimate) -> ClusterHierarchy {
    let h = est.h;
    let scores = est.values;
    let included: Vec<bool> = match algorithm {
        Algorithm::Mdbscan => scores.iter().map(|&s| s >= 0.0).collect(),
        _ => vec![true; ds.len()],
    };
    let radius = 2.0 * h;
    let rule = algorithm.edge_rule().expect("sample-graph algorithm");
    let index = NeighborIndex::new(ds, radius);
    let tree = Dendrogram::build(&scores, &included, |i, emit| {
        let p = ds.point(i);
        index.for_each_within(p, radius, |j| {
            if j != i && rule.connects(p, ds.point(j), radius) {
                emit(j);
            }
        });
    });
    ClusterHierarchy::from_tree(ds, algorithm, h, est.kernel, scores, est.counts, &included, tree)
}

impl ClusterHierarchy {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_tree(
        ds: &Dataset,
        algorithm: Algorithm,
        h: f64,
        kernel: Kernel,
        scores: Vec<f64>,
        counts: Option<Vec<usize>>,
        included: &[bool],
        tree: Dendrogram,
    ) -> Self {
        let mut levels: Vec<f64> = scores.iter().zip(included).filter(|(_, &inc)| inc).map(|(&s, _)| s).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        Self { algorithm, h, kernel, n: ds.len(), dim: ds.dim(), scores, counts, levels, tree }
    }
}

impl ClusterHierarchy {
    /// Distinct stored levels, ascending.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dendrogram(&self) -> &Dendrogram {
        &self.tree
    }

    /// Stored level holding the active set `{p̂_h >= λ}`; `None` above the max.
    pub fn level_for_lambda(&self, lambda: f64) -> Option<usize> {
        let idx = self.levels.partition_point(|&v| v < lambda);
        (idx < self.levels.len()).then_some(idx)
    }

    /// Stored level holding `{i : |B(X_i,h) ∩ sample| >= k}`.
    pub fn level_for_k(&self, k: usize) -> Option<usize> {
        self.level_for_lambda(lambda_of_k(k, self.n, self.h, self.dim))
    }

    /// Count threshold of a stored level, DBSCAN only.
    pub fn k_of_level(&self, idx: usize) -> Option<usize> {
        let counts = self.counts.as_ref()?;
        let t = self.levels[idx];
        counts.iter().zip(&self.scores).filter(|(_, &s)| s == t).map(|(&c, _)| c).next()
    }

    pub fn lambda_of_k(&self, k: usize) -> f64 {
        lambda_of_k(k, self.n, self.h, self.dim)
    }

    /// Cluster id (smallest member) per point at level `λ`; `None` if inactive.
    pub fn labels_at(&self, lambda: f64) -> Vec<Option<usize>> {
        let rep = self.tree.representatives(lambda);
        (0..self.n)
            .map(|i| match rep[i] {
                NO_PARENT => None,
                r => Some(self.tree.min_leaf(r)),
            })
            .collect()
    }

    pub fn clusters_at(&self, lambda: f64) -> Vec<Vec<usize>> {
        let labels = self.labels_at(lambda);
        let mut slot = vec![usize::MAX; self.n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(id) = *l {
                if slot[id] == usize::MAX {
                    slot[id] = out.len();
                    out.push(Vec::new());
                }
                out[slot[id]].push(i);
            }
        }
        out
    }

    pub fn level(&self, idx: usize) -> HierarchyLevel {
        let lambda = self.levels[idx];
        let clusters = self.clusters_at(lambda);
        let mut active: Vec<usize> = clusters.iter().flatten().copied().collect();
        active.sort_unstable();
        HierarchyLevel { lambda, k: self.k_of_level(idx), active, clusters }
    }

    /// Counts containment violations between consecutive stored levels:
    /// points active above but not below, and clusters above that straddle
    /// more than one cluster below.
    pub fn check_nesting(&self) -> usize {
        let mut violations = 0;
        let mut below: Option<Vec<Option<usize>>> = None;
        for &t in &self.levels {
            let above = self.labels_at(t);
            if let Some(below) = &below {
                let mut image: std::collections::HashMap<usize, usize> = Default::default();
                for (i, a) in above.iter().enumerate() {
                    let Some(a) = a else { continue };
                    match below[i] {
                        None => violations += 1,
                        Some(b) => {
                            let e = image.entry(*a).or_insert(b);
                            if *e != b {
                                violations += 1;
                            }
                        }
                    }
                }
            }
            below = Some(above);
        }
        violations
    }

    /// Highest level at which `i` and `j` share a cluster.
    pub fn merge_height(&self, i: usize, j: usize) -> Option<f64> {
        if !self.tree.included(i) || !self.tree.included(j) {
            return None;
        }
        self.tree.lca(i, j).map(|v| self.tree.height(v))
    }

    /// Smallest cluster containing every index in `indices`.
    pub fn smallest_containing_cluster(&self, indices: &[usize]) -> Result<ClusterRef> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("index set is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::InvalidInput(format!("index {bad} out of range")));
        }
        if indices.iter().any(|&i| !self.tree.included(i)) {
            return Err(Error::NoContainingCluster);
        }
        let lca = self.tree.lca_of(indices).ok_or(Error::NoContainingCluster)?;
        let node = self.tree.chain_top(lca);
        Ok(ClusterRef { level: self.tree.height(node), id: self.tree.min_leaf(node), node })
    }

    /// Members of a cluster returned by [`Self::smallest_containing_cluster`].
    pub fn members(&self, cluster: &ClusterRef) -> Vec<usize> {
        self.tree.leaves_of(cluster.node)
    }

    /// Clusters are nested or disjoint; disjoint iff neither contains the other.
    pub fn disjoint(&self, a: &ClusterRef, b: &ClusterRef) -> bool {
        !self.tree.is_ancestor(a.node, b.node) && !self.tree.is_ancestor(b.node, a.node)
    }

    /// Binary merge events in sweep order; `a`, `b` are the canonical ids of
    /// the merged clusters.
    pub fn merges(&self) -> Vec<MergeEvent> {
        self.tree
            .internal_nodes()
            .map(|v| {
                let [a, b] = self.tree.children(v).expect("internal node");
                let (a, b) = (self.tree.min_leaf(a), self.tree.min_leaf(b));
                MergeEvent { level: self.tree.height(v), a: a.min(b), b: a.max(b) }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::epsilon_graph_components;
    use crate::kde::build_valid_kernel;
    use proptest::prelude::*;

    fn brute_levels(ds: &Dataset, h: f64, scores: &[f64], t: f64, rule: EdgeRule) -> Vec<Vec<usize>> {
        let active: Vec<usize> = (0..ds.len()).filter(|&i| scores[i] >= t).collect();
        epsilon_graph_components(ds, &active, 2.0 * h, rule)
    }

    #[test]
    fn three_point_example() {
        let ds = Dataset::from_scalars(&[0.0, 0.5, 3.0]).unwrap();
        let hier = dbscan_hierarchy(&ds, 1.0).unwrap();
        assert_eq!(hier.counts.as_deref(), Some(&[2, 2, 1][..]));
        let lvl = hier.level(hier.level_for_k(2).unwrap());
        assert_eq!(lvl.k, Some(2));
        assert_eq!(lvl.active, vec![0, 1]);
        assert_eq!(lvl.clusters, vec![vec![0, 1]]);
        let lvl0 = hier.level(hier.level_for_k(0).unwrap());
        assert_eq!(lvl0.clusters, vec![vec![0, 1], vec![2]]);
        assert!(hier.level_for_k(3).is_none());
        assert_eq!(hier.merge_height(0, 2), None);
        assert_eq!(hier.merge_height(0, 1), Some(hier.lambda_of_k(2)));
        assert_eq!(hier.merge_height(2, 2), Some(hier.lambda_of_k(1)));
        let c = hier.smallest_containing_cluster(&[0, 1]).unwrap();
        assert_eq!((c.level, c.id), (hier.lambda_of_k(2), 0));
        assert_eq!(hier.smallest_containing_cluster(&[0, 2]), Err(Error::NoContainingCluster));
        assert_eq!(hier.check_nesting(), 0);
    }

    #[test]
    fn lambda_of_k_formula() {
        assert_eq!(lambda_of_k(0, 100, 0.5, 1), 0.0);
        assert!((lambda_of_k(10, 100, 0.5, 1) - 0.1).abs() < 1e-15);
        for k in 1..50 {
            let l = lambda_of_k(k, 100, 0.37, 2);
            let back = (100.0 * 0.37f64.powi(2) * unit_ball_volume(2) * l).round() as usize;
            assert_eq!(back, k);
        }
    }

    #[test]
    fn modified_single_point_and_empty_top() {
        let k = build_valid_kernel(2, 1).unwrap();
        let ds = Dataset::from_scalars(&[0.0]).unwrap();
        let hier = modified_dbscan_hierarchy(&ds, &k, 1.0).unwrap();
        let top = hier.scores[0];
        assert_eq!(hier.clusters_at(top), vec![vec![0]]);
        assert!(hier.level_for_lambda(top * 1.0001).is_none());
        assert!(hier.clusters_at(top * 1.0001).is_empty());
    }

    #[test]
    fn negative_estimates_never_activate() {
        let k = build_valid_kernel(2, 1).unwrap();
        // an isolated point at distance ~h from a dense clump sees negative weights
        let mut xs = vec![0.0; 30];
        xs.push(0.98);
        let ds = Dataset::from_scalars(&xs).unwrap();
        let hier = modified_dbscan_hierarchy(&ds, &k, 1.0).unwrap();
        assert!(hier.scores[30] < 0.0);
        assert!(hier.labels_at(0.0)[30].is_none());
        assert_eq!(hier.smallest_containing_cluster(&[30]), Err(Error::NoContainingCluster));
    }

    fn cloud() -> impl Strategy<Value = (usize, Vec<f64>, f64)> {
        (1usize..=2, 1usize..40).prop_flat_map(|(d, n)| {
            (Just(d), prop::collection::vec(0.0f64..1.0, n * d), 0.03f64..0.25)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn dbscan_levels_match_brute_force((d, coords, h) in cloud()) {
            let ds = Dataset::from_flat(coords, d).unwrap();
            let hier = dbscan_hierarchy(&ds, h).unwrap();
            prop_assert_eq!(hier.check_nesting(), 0);
            let n = ds.len();
            for k in 0..=n + 1 {
                let t = hier.lambda_of_k(k);
                let counts = hier.counts.as_ref().unwrap();
                let active: Vec<usize> = (0..n).filter(|&i| counts[i] >= k).collect();
                let expected = epsilon_graph_components(&ds, &active, 2.0 * h, EdgeRule::Strict);
                prop_assert_eq!(hier.clusters_at(t), expected.clone());
                match hier.level_for_k(k) {
                    Some(idx) => prop_assert_eq!(hier.level(idx).clusters, expected),
                    None => prop_assert!(expected.is_empty()),
                }
            }
        }

        #[test]
        fn mdbscan_levels_match_brute_force((d, coords, h) in cloud()) {
            let ds = Dataset::from_flat(coords, d).unwrap();
            let kernel = build_valid_kernel(2, d).unwrap();
            let hier = modified_dbscan_hierarchy(&ds, &kernel, h).unwrap();
            prop_assert_eq!(hier.check_nesting(), 0);
            let mut thresholds: Vec<f64> = hier.scores.iter().copied().filter(|&s| s >= 0.0).collect();
            thresholds.push(0.0);
            for &t in &thresholds {
                prop_assert_eq!(hier.clusters_at(t), brute_levels(&ds, h, &hier.scores, t, EdgeRule::NonStrict));
            }
        }

        #[test]
        fn merge_height_and_containment_match_linear_scan((d, coords, h) in cloud(), picks in prop::collection::vec(0usize..1000, 1..4)) {
            let ds = Dataset::from_flat(coords, d).unwrap();
            let hier = dbscan_hierarchy(&ds, h).unwrap();
            let n = ds.len();
            let picks: Vec<usize> = picks.iter().map(|p| p % n).collect();
            // scan levels from the top for the first one holding all picks together
            let mut expected = None;
            for &t in hier.levels().iter().rev() {
                let labels = hier.labels_at(t);
                let l0 = labels[picks[0]];
                if l0.is_some() && picks.iter().all(|&p| labels[p] == l0) {
                    expected = Some((t, l0.unwrap()));
                    break;
                }
            }
            let got = hier.smallest_containing_cluster(&picks).ok().map(|c| (c.level, c.id));
            prop_assert_eq!(got, expected);
            if picks.len() >= 2 {
                prop_assert_eq!(hier.merge_height(picks[0], picks[1]),
                    hier.smallest_containing_cluster(&picks[..2]).ok().map(|c| c.level));
            }
            // ultrametric on all triples
            for i in 0..n.min(12) {
                for j in 0..n.min(12) {
                    for k in 0..n.min(12) {
                        let m = |a, b| hier.merge_height(a, b).unwrap_or(f64::NEG_INFINITY);
                        prop_assert!(m(i, k) >= m(i, j).min(m(j, k)));
                    }
                }
            }
        }
    }
}
