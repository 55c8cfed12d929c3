/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], components: n }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Number of disjoint sets currently held.
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`. Returns the new root when a merge
    /// happened and `None` when they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return None;
        }
        let (hi, lo) = if self.rank[ra] >= self.rank[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[lo] = hi;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        self.components -= 1;
        Some(hi)
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn union_semantics(n in 1usize..60, ops in prop::collection::vec((0usize..60, 0usize..60), 0..120)) {
            let mut uf = UnionFind::new(n);
            // naive labels as the oracle
            let mut label: Vec<usize> = (0..n).collect();
            for (a, b) in ops {
                let (a, b) = (a % n, b % n);
                let before = uf.components();
                let merged = uf.union(a, b).is_some();
                let (la, lb) = (label[a], label[b]);
                prop_assert_eq!(merged, la != lb);
                if la != lb {
                    for l in label.iter_mut() {
                        if *l == lb { *l = la; }
                    }
                    prop_assert_eq!(uf.components(), before - 1);
                } else {
                    prop_assert_eq!(uf.components(), before);
                }
                prop_assert!(uf.same(a, b));
                let r = uf.find(a);
                prop_assert_eq!(uf.find(a), r);
            }
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(uf.same(i, j), label[i] == label[j]);
                }
            }
        }
    }
}
