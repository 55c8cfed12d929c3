//! Fixed-radius neighbor search.
//!
//! A uniform hash grid handles `d <= 3`; higher dimensions fall back to a
//! k-d tree. Both answer closed-ball queries `||x - c||^2 <= r^2` exactly, on
//! the same floating-point predicate as [`within_closed`].

use std::collections::HashMap;

use super::dataset::{squared_distance, Dataset};

/// Closed-ball predicate used by every neighbor query.
#[inline]
pub fn within_closed(a: &[f64], b: &[f64], r: f64) -> bool {
    squared_distance(a, b) <= r * r
}

/// Open-ball predicate (strict inequality).
#[inline]
pub fn within_open(a: &[f64], b: &[f64], r: f64) -> bool {
    squared_distance(a, b) < r * r
}

const GRID_MAX_DIM: usize = 3;
const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
pub enum NeighborIndex<'a> {
    Grid(GridIndex<'a>),
    Tree(KdTree<'a>),
}

impl<'a> NeighborIndex<'a> {
    /// Builds an index tuned for queries of radius about `radius`.
    pub fn new(ds: &'a Dataset, radius: f64) -> Self {
        if ds.dim() <= GRID_MAX_DIM {
            NeighborIndex::Grid(GridIndex::new(ds, radius))
        } else {
            NeighborIndex::Tree(KdTree::new(ds))
        }
    }

    /// Calls `f(j)` for every point `j` with `||X_j - center|| <= r`.
    /// Visit order is unspecified.
    pub fn for_each_within<F: FnMut(usize)>(&self, center: &[f64], r: f64, f: F) {
        match self {
            NeighborIndex::Grid(g) => g.for_each_within(center, r, f),
            NeighborIndex::Tree(t) => t.for_each_within(center, r, f),
        }
    }

    /// Indices within the closed ball, sorted ascending.
    pub fn within(&self, center: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(center, r, |j| out.push(j));
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, center: &[f64], r: f64) -> usize {
        let mut c = 0;
        self.for_each_within(center, r, |_| c += 1);
        c
    }

    pub fn any_within(&self, center: &[f64], r: f64) -> bool {
        match self {
            NeighborIndex::Grid(g) => g.any_within(center, r),
            NeighborIndex::Tree(t) => {
                let mut found = false;
                t.for_each_within(center, r, |_| found = true);
                found
            }
        }
    }
}

type CellKey = [i64; GRID_MAX_DIM];

/// Uniform hash grid with cubic cells.
#[derive(Debug, Clone)]
pub struct GridIndex<'a> {
    ds: &'a Dataset,
    cell: f64,
    order: Vec<usize>,
    cells: HashMap<CellKey, (usize, usize)>,
}

impl<'a> GridIndex<'a> {
    pub fn new(ds: &'a Dataset, cell: f64) -> Self {
        assert!(ds.dim() <= GRID_MAX_DIM);
        let cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        let keys: Vec<CellKey> = ds.points().map(|p| key_of(p, cell)).collect();
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
        let mut cells = HashMap::new();
        let mut start = 0;
        while start < order.len() {
            let k = keys[order[start]];
            let mut end = start + 1;
            while end < order.len() && keys[order[end]] == k {
                end += 1;
            }
            cells.insert(k, (start, end));
            start = end;
        }
        Self { ds, cell, order, cells }
    }

    fn visit_cells<F: FnMut(&[usize]) -> bool>(&self, center: &[f64], r: f64, mut f: F) {
        let d = self.ds.dim();
        let lo: Vec<i64> = center.iter().map(|&c| ((c - r) / self.cell).floor() as i64).collect();
        let hi: Vec<i64> = center.iter().map(|&c| ((c + r) / self.cell).floor() as i64).collect();
        let mut key: CellKey = [0; GRID_MAX_DIM];
        key[..d].copy_from_slice(&lo);
        loop {
            if let Some(&(s, e)) = self.cells.get(&key) {
                if !f(&self.order[s..e]) {
                    return;
                }
            }
            // odometer increment over the box of cells
            let mut axis = 0;
            loop {
                if axis == d {
                    return;
                }
                if key[axis] < hi[axis] {
                    key[axis] += 1;
                    break;
                }
                key[axis] = lo[axis];
                axis += 1;
            }
        }
    }

    pub fn for_each_within<F: FnMut(usize)>(&self, center: &[f64], r: f64, mut f: F) {
        self.visit_cells(center, r, |bucket| {
            for &j in bucket {
                if within_closed(self.ds.point(j), center, r) {
                    f(j);
                }
            }
            true
        });
    }

    pub fn any_within(&self, center: &[f64], r: f64) -> bool {
        let mut found = false;
        self.visit_cells(center, r, |bucket| {
            found = bucket.iter().any(|&j| within_closed(self.ds.point(j), center, r));
            !found
        });
        found
    }
}

fn key_of(p: &[f64], cell: f64) -> CellKey {
    let mut k = [0i64; GRID_MAX_DIM];
    for (slot, &c) in k.iter_mut().zip(p) {
        *slot = (c / cell).floor() as i64;
    }
    k
}

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static k-d tree over a dataset, median splits on the widest axis.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    ds: &'a Dataset,
    perm: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl<'a> KdTree<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        let mut tree = Self { ds, perm: (0..ds.len()).collect(), nodes: Vec::new() };
        tree.build(0, ds.len());
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(KdNode::Leaf { start, end });
            return id;
        }
        let d = self.ds.dim();
        let mut axis = 0;
        let mut best = f64::NEG_INFINITY;
        for a in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.perm[start..end] {
                let c = self.ds.point(i)[a];
                lo = lo.min(c);
                hi = hi.max(c);
            }
            if hi - lo > best {
                best = hi - lo;
                axis = a;
            }
        }
        let mid = start + (end - start) / 2;
        let ds = self.ds;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            ds.point(a)[axis].total_cmp(&ds.point(b)[axis])
        });
        let value = ds.point(self.perm[mid])[axis];
        self.nodes.push(KdNode::Leaf { start, end }); // placeholder
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    pub fn for_each_within<F: FnMut(usize)>(&self, center: &[f64], r: f64, mut f: F) {
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            match self.nodes[id] {
                KdNode::Leaf { start, end } => {
                    for &j in &self.perm[start..end] {
                        if within_closed(self.ds.point(j), center, r) {
                            f(j);
                        }
                    }
                }
                KdNode::Split { axis, value, left, right } => {
                    // left holds coordinates <= value, right holds >= value
                    let c = center[axis];
                    if c - r <= value {
                        stack.push(left);
                    }
                    if c + r >= value {
                        stack.push(right);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ds(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords: Vec<f64> = (0..n * d).map(|_| rng.random::<f64>()).collect();
        Dataset::from_flat(coords, d).unwrap()
    }

    fn brute(ds: &Dataset, c: &[f64], r: f64) -> Vec<usize> {
        (0..ds.len()).filter(|&i| within_closed(ds.point(i), c, r)).collect()
    }

    #[test]
    fn grid_and_tree_match_brute_force() {
        for d in 1..=5 {
            let ds = random_ds(300, d, d as u64);
            for r in [0.05, 0.2, 0.7] {
                let idx = NeighborIndex::new(&ds, r);
                let tree = NeighborIndex::Tree(KdTree::new(&ds));
                for q in 0..20 {
                    let c = ds.point(q * 7);
                    let expected = brute(&ds, c, r);
                    assert_eq!(idx.within(c, r), expected);
                    assert_eq!(tree.within(c, r), expected);
                    assert_eq!(idx.count_within(c, r), expected.len());
                    assert_eq!(idx.any_within(c, r), !expected.is_empty());
                }
            }
        }
    }

    #[test]
    fn handles_negative_coordinates_and_larger_radius_than_cell() {
        let ds = Dataset::from_scalars(&[-3.0, -0.5, 0.0, 0.49, 2.5]).unwrap();
        let idx = NeighborIndex::new(&ds, 0.1);
        assert_eq!(idx.within(&[0.0], 1.0), vec![1, 2, 3]);
        assert_eq!(idx.within(&[-3.0], 0.0), vec![0]);
    }
}
