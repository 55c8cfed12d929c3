//! Dendrogram JSON: `{levels: [{level, clusters}], merges: [{level, a, b}],
//! splits: [{level, children, significant}]}`. Clusters are sample index
//! lists; cluster ids in merges and splits are smallest member indices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cluster_tree::{extract_splits, significant_splits};
use crate::dbscan::ClusterHierarchy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelJson {
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub clusters: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeJson {
    pub level: f64,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitJson {
    pub level: f64,
    pub children: Vec<usize>,
    /// `null` when no pruning threshold was given.
    pub significant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DendrogramJson {
    pub levels: Vec<LevelJson>,
    pub merges: Vec<MergeJson>,
    pub splits: Vec<SplitJson>,
}

pub fn dendrogram_json(hier: &ClusterHierarchy, delta: Option<f64>) -> DendrogramJson {
    let levels = (0..hier.num_levels())
        .map(|idx| {
            let lvl = hier.level(idx);
            LevelJson { level: lvl.lambda, k: lvl.k, clusters: lvl.clusters }
        })
        .collect();
    let merges = hier.merges().into_iter().map(|m| MergeJson { level: m.level, a: m.a, b: m.b }).collect();
    let significant: Vec<(u64, usize)> = match delta {
        Some(d) => significant_splits(hier, d).iter().map(|s| (s.level.to_bits(), s.children[0].id)).collect(),
        None => Vec::new(),
    };
    let splits = extract_splits(hier)
        .into_iter()
        .map(|s| {
            let key = (s.level.to_bits(), s.children[0].id);
            SplitJson {
                level: s.level,
                children: s.children.iter().map(|c| c.id).collect(),
                significant: delta.map(|_| significant.contains(&key)),
            }
        })
        .collect();
    DendrogramJson { levels, merges, splits }
}

/// Levels strictly ascending, clusters disjoint and sorted, and every
/// cluster contained in one cluster of the level below.
pub fn validate(d: &DendrogramJson) -> Result<()> {
    let bad = |msg: String| Err(Error::Precondition(format!("dendrogram check failed: {msg}")));
    let mut below: Option<HashMap<usize, usize>> = None;
    for (j, lvl) in d.levels.iter().enumerate() {
        if j > 0 && !(lvl.level > d.levels[j - 1].level) {
            return bad(format!("level {j} is not above level {}", j - 1));
        }
        let mut owner: HashMap<usize, usize> = HashMap::new();
        for (c, cluster) in lvl.clusters.iter().enumerate() {
            if cluster.is_empty() || cluster.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("cluster {c} at level {j} is empty or unsorted"));
            }
            for &i in cluster {
                if owner.insert(i, c).is_some() {
                    return bad(format!("point {i} is in two clusters at level {j}"));
                }
            }
        }
        if let Some(prev) = &below {
            for (c, cluster) in lvl.clusters.iter().enumerate() {
                let Some(&parent) = prev.get(&cluster[0]) else {
                    return bad(format!("point {} active at level {j} but not below", cluster[0]));
                };
                if cluster.iter().any(|i| prev.get(i) != Some(&parent)) {
                    return bad(format!("cluster {c} at level {j} straddles clusters below"));
                }
            }
        }
        below = Some(owner);
    }
    Ok(())
}
