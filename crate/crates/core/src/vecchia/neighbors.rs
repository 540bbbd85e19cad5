//! Random orderings and exact nearest-neighbor conditioning sets.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::covariance::{squared_distance, Locations};

const ORDER_STREAM: u64 = 0x0de5;

/// Below this size neighbors are found by a direct scan.
pub const BRUTE_FORCE_LIMIT: usize = 4096;

/// Variable-length index sets stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborSets {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl NeighborSets {
    pub fn empty(n: usize) -> Self {
        Self { offsets: alloc::vec![0; n + 1], indices: Vec::new() }
    }

    pub fn from_sets(sets: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(sets.len() + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for s in sets {
            indices.extend_from_slice(s);
            offsets.push(indices.len());
        }
        Self { offsets, indices }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn of(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub(crate) fn range(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn max_size(&self) -> usize {
        (0..self.len()).map(|i| self.of(i).len()).max().unwrap_or(0)
    }
}

/// Uniform random permutation of `0..n`.
pub fn order_random(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = crate::rng::stream(seed, ORDER_STREAM);
    perm.shuffle(&mut rng);
    perm
}

// Best `m` candidates ordered by (distance, index).
struct Best {
    m: usize,
    items: Vec<(f64, usize)>,
}

impl Best {
    fn new(m: usize) -> Self {
        Self { m, items: Vec::with_capacity(m + 1) }
    }

    fn clear(&mut self) {
        self.items.clear();
    }

    #[inline]
    fn full(&self) -> bool {
        self.items.len() == self.m
    }

    #[inline]
    fn worst(&self) -> f64 {
        if self.full() {
            self.items[self.m - 1].0
        } else {
            f64::INFINITY
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64, j: usize) {
        if self.m == 0 {
            return;
        }
        if self.full() {
            let (wd, wj) = self.items[self.m - 1];
            if d2 > wd || (d2 == wd && j > wj) {
                return;
            }
            self.items.pop();
        }
        let pos = self
            .items
            .iter()
            .position(|&(d, k)| d2 < d || (d2 == d && j < k))
            .unwrap_or(self.items.len());
        self.items.insert(pos, (d2, j));
    }

    fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.items.iter().map(|&(_, j)| j)
    }
}

#[derive(Clone, Copy)]
struct Node {
    point: usize,
    dim: usize,
    left: usize,
    right: usize,
}

const NIL: usize = usize::MAX;

/// Incrementally built k-d tree over rows of a `Locations`.
struct KdTree<'a> {
    locs: &'a Locations,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    fn new(locs: &'a Locations) -> Self {
        Self { locs, nodes: Vec::with_capacity(locs.len()) }
    }

    fn insert(&mut self, point: usize) {
        let d = self.locs.dim();
        let p = self.locs.point(point);
        if self.nodes.is_empty() {
            self.nodes.push(Node { point, dim: 0, left: NIL, right: NIL });
            return;
        }
        let mut cur = 0;
        loop {
            let node = self.nodes[cur];
            let go_left = p[node.dim] < self.locs.point(node.point)[node.dim];
            let next = if go_left { node.left } else { node.right };
            if next == NIL {
                let id = self.nodes.len();
                self.nodes.push(Node { point, dim: (node.dim + 1) % d, left: NIL, right: NIL });
                if go_left {
                    self.nodes[cur].left = id;
                } else {
                    self.nodes[cur].right = id;
                }
                return;
            }
            cur = next;
        }
    }

    fn knn(&self, q: &[f64], best: &mut Best, stack: &mut Vec<(usize, f64)>) {
        if self.nodes.is_empty() {
            return;
        }
        stack.clear();
        stack.push((0, 0.0));
        while let Some((id, bound)) = stack.pop() {
            if bound > best.worst() {
                continue;
            }
            let node = self.nodes[id];
            let p = self.locs.point(node.point);
            best.offer(squared_distance(q, p), node.point);
            let diff = q[node.dim] - p[node.dim];
            let (near, far) = if diff < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
            if far != NIL {
                stack.push((far, bound.max(diff * diff)));
            }
            if near != NIL {
                stack.push((near, bound));
            }
        }
    }
}

/// Conditioning sets for ordered points: `N(i)` holds the `min(i, m)` nearest among
/// positions `0..i`, with indices in ordered positions and sorted by distance.
pub fn find_neighbors(locs: &Locations, perm: &[usize], m: usize) -> NeighborSets {
    let ordered = locs.permuted(perm);
    find_neighbors_ordered(&ordered, m)
}

pub(crate) fn find_neighbors_ordered(locs: &Locations, m: usize) -> NeighborSets {
    let n = locs.len();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(n * m);
    offsets.push(0);
    let mut best = Best::new(m);
    if m == 0 {
        return NeighborSets::empty(n);
    }
    if n < BRUTE_FORCE_LIMIT {
        for i in 0..n {
            best.clear();
            let q = locs.point(i);
            for j in 0..i {
                let d2 = squared_distance(q, locs.point(j));
                if d2 <= best.worst() {
                    best.offer(d2, j);
                }
            }
            indices.extend(best.indices());
            offsets.push(indices.len());
        }
    } else {
        let mut tree = KdTree::new(locs);
        let mut stack = Vec::new();
        for i in 0..n {
            best.clear();
            tree.knn(locs.point(i), &mut best, &mut stack);
            indices.extend(best.indices());
            offsets.push(indices.len());
            tree.insert(i);
        }
    }
    NeighborSets { offsets, indices }
}

/// For every query point, the `m` nearest reference points (all of them are eligible)
/// together with the squared distance to the closest one.
pub fn nearest_in(reference: &Locations, queries: &Locations, m: usize) -> (NeighborSets, Vec<f64>) {
    let m = m.min(reference.len());
    let mut sets = Vec::with_capacity(queries.len());
    let mut closest = Vec::with_capacity(queries.len());
    let mut best = Best::new(m.max(1));
    let tree = if reference.len() >= BRUTE_FORCE_LIMIT {
        let mut t = KdTree::new(reference);
        for j in 0..reference.len() {
            t.insert(j);
        }
        Some(t)
    } else {
        None
    };
    let mut stack = Vec::new();
    for p in 0..queries.len() {
        best.clear();
        let q = queries.point(p);
        match &tree {
            Some(t) => t.knn(q, &mut best, &mut stack),
            None => {
                for j in 0..reference.len() {
                    let d2 = squared_distance(q, reference.point(j));
                    if d2 <= best.worst() {
                        best.offer(d2, j);
                    }
                }
            }
        }
        closest.push(best.items.first().map(|x| x.0).unwrap_or(f64::INFINITY));
        sets.push(best.indices().take(m).collect::<Vec<_>>());
    }
    (NeighborSets::from_sets(&sets), closest)
}
