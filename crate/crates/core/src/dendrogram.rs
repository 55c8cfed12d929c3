//! Superlevel-set merge tree built by a descending union-find sweep.
//!
//! Vertices enter in decreasing score order; every merging union creates an
//! internal node at the score of the vertex group being activated. Nodes are
//! stored in creation order, so children always precede their parents and
//! heights never increase along a path to the root.

use crate::geometry::UnionFind;

pub const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    included: Vec<bool>,
    height: Vec<f64>,
    parent: Vec<usize>,
    children: Vec<[usize; 2]>,
    size: Vec<usize>,
    min_leaf: Vec<usize>,
    peak: Vec<usize>,
    pivot: Vec<usize>,
}

impl Dendrogram {
    /// Runs the sweep. `neighbors(i, emit)` must emit every vertex adjacent
    /// to `i`; the sweep ignores neighbors that are not active yet.
    pub fn build<F>(scores: &[f64], included: &[bool], mut neighbors: F) -> Self
    where
        F: FnMut(usize, &mut dyn FnMut(usize)),
    {
        let n = scores.len();
        assert_eq!(included.len(), n);
        let mut order: Vec<usize> = (0..n).filter(|&i| included[i]).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

        let mut tree = Self::leaves(scores, included);
        let mut uf = UnionFind::new(n);
        let mut node_of: Vec<usize> = (0..n).collect();
        let mut active = vec![false; n];
        let mut pending = Vec::new();

        let mut start = 0;
        while start < order.len() {
            let level = scores[order[start]];
            let mut end = start + 1;
            while end < order.len() && scores[order[end]] == level {
                end += 1;
            }
            for &i in &order[start..end] {
                active[i] = true;
            }
            for &i in &order[start..end] {
                pending.clear();
                neighbors(i, &mut |j| pending.push(j));
                for &j in &pending {
                    if !active[j] {
                        continue;
                    }
                    let (ri, rj) = (uf.find(i), uf.find(j));
                    if ri == rj {
                        continue;
                    }
                    let (a, b) = (node_of[ri], node_of[rj]);
                    let root = uf.union(ri, rj).expect("distinct roots merge");
                    node_of[root] = tree.push_internal(a, b, level, i);
                }
            }
            start = end;
        }
        tree
    }

    fn leaves(scores: &[f64], included: &[bool]) -> Self {
        let n = scores.len();
        Self {
            n_leaves: n,
            included: included.to_vec(),
            height: scores.to_vec(),
            parent: vec![NO_PARENT; n],
            children: Vec::new(),
            size: included.iter().map(|&b| b as usize).collect(),
            min_leaf: (0..n).collect(),
            peak: (0..n).collect(),
            pivot: Vec::new(),
        }
    }

    /// Tree from explicit merge events `(height, i, j)`, given in
    /// non-increasing height order with each height at most the scores of
    /// `i` and `j`. Events joining an already merged pair are skipped.
    pub fn from_events(scores: &[f64], included: &[bool], events: &[(f64, usize, usize)]) -> Self {
        let n = scores.len();
        assert_eq!(included.len(), n);
        let mut tree = Self::leaves(scores, included);
        let mut uf = UnionFind::new(n);
        let mut node_of: Vec<usize> = (0..n).collect();
        let mut last = f64::INFINITY;
        for &(level, i, j) in events {
            debug_assert!(level <= last && level <= scores[i] && level <= scores[j]);
            debug_assert!(included[i] && included[j]);
            last = level;
            let (ri, rj) = (uf.find(i), uf.find(j));
            if ri == rj {
                continue;
            }
            let (a, b) = (node_of[ri], node_of[rj]);
            let root = uf.union(ri, rj).expect("distinct roots merge");
            node_of[root] = tree.push_internal(a, b, level, j);
        }
        tree
    }

    fn push_internal(&mut self, a: usize, b: usize, level: f64, pivot: usize) -> usize {
        let id = self.height.len();
        let (pa, pb) = (self.peak[a], self.peak[b]);
        let peak = match self.height[pa].total_cmp(&self.height[pb]) {
            std::cmp::Ordering::Greater => pa,
            std::cmp::Ordering::Less => pb,
            std::cmp::Ordering::Equal => pa.min(pb),
        };
        self.height.push(level);
        self.parent.push(NO_PARENT);
        self.children.push([a, b]);
        self.size.push(self.size[a] + self.size[b]);
        self.min_leaf.push(self.min_leaf[a].min(self.min_leaf[b]));
        self.peak.push(peak);
        self.pivot.push(pivot);
        self.parent[a] = id;
        self.parent[b] = id;
        id
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn n_nodes(&self) -> usize {
        self.height.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves
    }

    /// Whether leaf `i` takes part in the sweep at all.
    pub fn included(&self, i: usize) -> bool {
        self.included[i]
    }

    pub fn height(&self, node: usize) -> f64 {
        self.height[node]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        match self.parent[node] {
            NO_PARENT => None,
            p => Some(p),
        }
    }

    pub fn children(&self, node: usize) -> Option<[usize; 2]> {
        if self.is_leaf(node) {
            None
        } else {
            Some(self.children[node - self.n_leaves])
        }
    }

    /// Number of included leaves below `node`.
    pub fn size(&self, node: usize) -> usize {
        self.size[node]
    }

    /// Smallest leaf index below `node`; the canonical cluster id.
    pub fn min_leaf(&self, node: usize) -> usize {
        self.min_leaf[node]
    }

    /// Leaf of maximal score below `node` (smallest index on ties).
    pub fn peak(&self, node: usize) -> usize {
        self.peak[node]
    }

    /// Vertex whose activation created an internal node.
    pub fn pivot(&self, node: usize) -> Option<usize> {
        (!self.is_leaf(node)).then(|| self.pivot[node - self.n_leaves])
    }

    pub fn peak_height(&self, node: usize) -> f64 {
        self.height[self.peak[node]]
    }

    /// Internal nodes in creation order.
    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        self.n_leaves..self.n_nodes()
    }

    pub fn root_of(&self, mut node: usize) -> usize {
        while let Some(p) = self.parent(node) {
            node = p;
        }
        node
    }

    /// Highest ancestor reachable through nodes of the same height: the
    /// node representing `node`'s cluster at level `height(node)`.
    pub fn chain_top(&self, mut node: usize) -> usize {
        let h = self.height[node];
        while let Some(p) = self.parent(node) {
            if self.height[p] != h {
                break;
            }
            node = p;
        }
        node
    }

    /// Node representing the cluster of `node` at level `t <= height(node)`.
    pub fn ancestor_at(&self, mut node: usize, t: f64) -> usize {
        while let Some(p) = self.parent(node) {
            if self.height[p] < t {
                break;
            }
            node = p;
        }
        node
    }

    pub fn is_ancestor(&self, anc: usize, mut node: usize) -> bool {
        loop {
            if node == anc {
                return true;
            }
            if node < anc {
                // ancestors are created later, so they carry larger ids
                match self.parent(node) {
                    Some(p) => node = p,
                    None => return false,
                }
            } else {
                return false;
            }
        }
    }

    pub fn lca(&self, a: usize, b: usize) -> Option<usize> {
        let (mut a, mut b) = (a, b);
        while a != b {
            // the smaller id cannot be an ancestor of the larger one
            if a < b {
                a = self.parent(a)?;
            } else {
                b = self.parent(b)?;
            }
        }
        Some(a)
    }

    /// Lowest common ancestor of a set of included leaves.
    pub fn lca_of(&self, leaves: &[usize]) -> Option<usize> {
        let mut uniq = leaves.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        match uniq.len() {
            0 => None,
            1 => Some(uniq[0]),
            m => {
                let mut count = vec![0usize; self.n_nodes()];
                for &i in &uniq {
                    count[i] = 1;
                }
                for node in 0..self.n_nodes() {
                    if node >= self.n_leaves {
                        let [a, b] = self.children[node - self.n_leaves];
                        count[node] = count[a] + count[b];
                        if count[node] == m {
                            return Some(node);
                        }
                    }
                }
                None
            }
        }
    }

    /// Cluster representative of every node at level `t`, or `NO_PARENT`
    /// when the node is not present at that level.
    pub fn representatives(&self, t: f64) -> Vec<usize> {
        let mut rep = vec![NO_PARENT; self.n_nodes()];
        for node in (0..self.n_nodes()).rev() {
            if node < self.n_leaves && !self.included[node] {
                continue;
            }
            if self.height[node] < t {
                continue;
            }
            rep[node] = match self.parent(node) {
                Some(p) if self.height[p] >= t => rep[p],
                _ => node,
            };
        }
        rep
    }

    /// Leaves below `node` in ascending order.
    pub fn leaves_of(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size[node]);
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if self.is_leaf(v) {
                if self.included[v] {
                    out.push(v);
                }
            } else {
                stack.extend_from_slice(&self.children[v - self.n_leaves]);
            }
        }
        out.sort_unstable();
        out
    }

    /// Old children of a chain top: descendants reached through nodes of
    /// the same height whose own height is strictly larger.
    pub fn strict_children(&self, node: usize) -> Vec<usize> {
        let h = self.height[node];
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if v != node && self.height[v] > h {
                out.push(v);
                continue;
            }
            if let Some(ch) = self.children(v) {
                stack.extend_from_slice(&ch);
            }
        }
        out.sort_by_key(|&c| self.min_leaf[c]);
        out
    }
}
