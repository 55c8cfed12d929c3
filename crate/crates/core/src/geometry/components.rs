use super::dataset::Dataset;
use super::index::{within_closed, within_open, NeighborIndex};
use super::union_find::UnionFind;

/// Edge predicate for the ε-graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRule {
    /// `||X_i - X_j|| < threshold`
    Strict,
    /// `||X_i - X_j|| <= threshold`
    NonStrict,
}

impl EdgeRule {
    #[inline]
    pub fn connects(self, a: &[f64], b: &[f64], threshold: f64) -> bool {
        match self {
            EdgeRule::Strict => within_open(a, b, threshold),
            EdgeRule::NonStrict => within_closed(a, b, threshold),
        }
    }
}

/// Connected components of the graph on `active` with edges given by `rule`.
///
/// Blocks are sorted internally and ordered by their smallest member.
pub fn epsilon_graph_components(
    ds: &Dataset,
    active: &[usize],
    threshold: f64,
    rule: EdgeRule,
) -> Vec<Vec<usize>> {
    if active.is_empty() {
        return Vec::new();
    }
    let n = ds.len();
    let mut is_active = vec![false; n];
    for &i in active {
        is_active[i] = true;
    }
    let index = NeighborIndex::new(ds, threshold);
    let mut uf = UnionFind::new(n);
    for &i in active {
        let p = ds.point(i);
        index.for_each_within(p, threshold, |j| {
            if j > i && is_active[j] && rule.connects(p, ds.point(j), threshold) {
                uf.union(i, j);
            }
        });
    }
    partition_from(&mut uf, active)
}

/// Groups `members` by union-find root; blocks sorted, ordered by min member.
fn partition_from(uf: &mut UnionFind, members: &[usize]) -> Vec<Vec<usize>> {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut slot = std::collections::HashMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &i in &sorted {
        let r = uf.find(i);
        let b = *slot.entry(r).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(i);
    }
    blocks
}
