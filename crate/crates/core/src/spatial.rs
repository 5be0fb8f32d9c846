//! Exact k-nearest-neighbor search over 3D point sets.
//!
//! Neighbors are ordered by `(squared distance, index)` so that ties between
//! equidistant points resolve the same way as an exhaustive scan.

use std::cmp::Ordering;

/// Squared Euclidean distance, summed in x, y, z order.
#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static kd-tree. Stores a permutation of the input indices; the points
/// themselves are copied once at build time.
pub struct KdTree {
    points: Vec<[f64; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: &[[f64; 3]]) -> Self {
        let mut tree = KdTree {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] <= 0.0 {
            // All points coincide.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis])
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query`, sorted by `(dist2, index)`.
    /// Returns all points when `k >= len()`.
    pub fn k_nearest(&self, query: &[f64; 3], k: usize) -> Vec<Neighbor> {
        let k = k.min(self.points.len());
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k == 0 {
            return best;
        }
        self.search(0, query, k, &mut best);
        best
    }

    pub fn nearest(&self, query: &[f64; 3]) -> Option<Neighbor> {
        self.k_nearest(query, 1).into_iter().next()
    }

    fn search(&self, node: usize, query: &[f64; 3], k: usize, best: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    let cand = Neighbor {
                        index,
                        dist2: dist2(query, &self.points[index]),
                    };
                    if best.len() == k && cand.cmp_key(&best[k - 1]) != Ordering::Less {
                        continue;
                    }
                    let pos = best
                        .binary_search_by(|n| n.cmp_key(&cand))
                        .unwrap_or_else(|p| p);
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, best);
                // Equal-distance candidates on the far side can still win on index.
                if best.len() < k || diff * diff <= best[k - 1].dist2 {
                    self.search(far, query, k, best);
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

    fn brute(points: &[[f64; 3]], q: &[f64; 3], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = points
            .iter()
            .enumerate()
            .map(|(index, p)| Neighbor {
                index,
                dist2: dist2(q, p),
            })
            .collect();
        all.sort_by(|a, b| a.cmp_key(b));
        all.truncate(k);
        all
    }

    #[test]
    fn matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = rng.gen_range(1..600);
            let pts: Vec<[f64; 3]> = (0..n).map(|_| rng.gen()).collect();
            let tree = KdTree::build(&pts);
            for _ in 0..50 {
                let q: [f64; 3] = rng.gen();
                let k = 1 + trial % 7;
                assert_eq!(tree.k_nearest(&q, k), brute(&pts, &q, k));
            }
        }
    }

    #[test]
    fn duplicate_points_break_ties_by_index() {
        let pts = vec![[0.5; 3]; 20];
        let tree = KdTree::build(&pts);
        let got: Vec<usize> = tree
            .k_nearest(&[0.0; 3], 5)
            .iter()
            .map(|n| n.index)
            .collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn grid_lattice_ties() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for l in 0..6 {
                    pts.push([i as f64, j as f64, l as f64]);
                }
            }
        }
        let tree = KdTree::build(&pts);
        for q in [[2.5, 2.5, 2.5], [0.0, 0.0, 0.0], [3.0, 2.5, 1.0]] {
            assert_eq!(tree.k_nearest(&q, 9), brute(&pts, &q, 9));
        }
    }
}
