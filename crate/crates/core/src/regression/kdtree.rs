//! Exact k-nearest-neighbor search with a bucketed k-d tree.
//!
//! Ties in distance are broken by the smaller training index, so query
//! results do not depend on tree layout.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::linalg::Matrix;
use crate::num::Real;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node<T> {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: T,
        left: usize,
        right: usize,
    },
}

/// Neighbor returned by a query: training index and squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    pub index: usize,
    pub dist2: T,
}

impl<T: Real> Eq for Neighbor<T> {}

impl<T: Real> PartialOrd for Neighbor<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Neighbor<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .partial_cmp(&other.dist2)
            .unwrap_or(Ordering::Equal)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Clone)]
pub struct KdTree<T> {
    points: Matrix<T>,
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> KdTree<T> {
    pub fn new(points: Matrix<T>) -> Self {
        let mut order: Vec<usize> = (0..points.rows()).collect();
        let mut nodes = Vec::new();
        if points.rows() > 0 {
            let n = order.len();
            build(&points, &mut order, 0, n, &mut nodes);
        }
        Self { points, order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    /// The `k` nearest training points to `query`, sorted by (distance, index).
    pub fn nearest(&self, query: &[T], k: usize) -> Vec<Neighbor<T>> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        assert_eq!(query.len(), self.points.cols(), "query dimension mismatch");
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, &mut heap);
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    fn search(&self, node: usize, q: &[T], k: usize, heap: &mut BinaryHeap<Neighbor<T>>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    let cand = Neighbor {
                        index,
                        dist2: dist2(self.points.row(index), q),
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().expect("non-empty heap") {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff <= T::zero() {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, heap);
                // `<=` keeps equal-distance points on the far side eligible for the index tie-break.
                if heap.len() < k || diff * diff <= heap.peek().expect("non-empty heap").dist2 {
                    self.search(far, q, k, heap);
                }
            }
        }
    }
}

fn build<T: Real>(
    points: &Matrix<T>,
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node<T>>,
) -> usize {
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    // split on the coordinate with the widest spread
    let slice = &mut order[start..end];
    let mut best = (0, T::neg_infinity());
    for dim in 0..points.cols() {
        let (lo, hi) = slice.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
            let v = points.get(i, dim);
            (lo.min(v), hi.max(v))
        });
        if hi - lo > best.1 {
            best = (dim, hi - lo);
        }
    }
    let dim = best.0;
    if !(best.1 > T::zero()) {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points
            .get(a, dim)
            .partial_cmp(&points.get(b, dim))
            .unwrap_or(Ordering::Equal)
    });
    let value = points.get(slice[mid], dim);
    nodes.push(Node::Leaf { start, end });
    // points left of `mid` are <= value, points from `mid` on are >= value
    let left = build(points, order, start, start + mid, nodes);
    let right = build(points, order, start + mid, end, nodes);
    nodes[id] = Node::Split {
        dim,
        value,
        left,
        right,
    };
    id
}

#[inline]
pub(crate) fn dist2<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn brute(points: &Matrix<f64>, q: &[f64], k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..points.rows()).map(|i| (dist2(points.row(i), q), i)).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = stream(9);
        let data: Vec<f64> = (0..3000).map(|_| f64::standard_normal(&mut rng)).collect();
        let pts = Matrix::from_row_major(data, 3);
        let tree = KdTree::new(pts.clone());
        for _ in 0..20 {
            let q: Vec<f64> = (0..3).map(|_| f64::standard_normal(&mut rng)).collect();
            let got: Vec<usize> = tree.nearest(&q, 25).iter().map(|n| n.index).collect();
            assert_eq!(got, brute(&pts, &q, 25));
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let pts = Matrix::from_row_major(vec![1.0; 100], 1);
        let tree = KdTree::new(pts);
        let got: Vec<usize> = tree.nearest(&[0.0], 5).iter().map(|n| n.index).collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn discrete_grid_ties_match_brute(vals in proptest::collection::vec(0i32..5, 40..200), q in 0i32..5, k in 1usize..30) {
            let pts = Matrix::from_row_major(vals.iter().map(|&v| v as f64).collect(), 1);
            let tree = KdTree::new(pts.clone());
            let got: Vec<usize> = tree.nearest(&[q as f64], k).iter().map(|n| n.index).collect();
            prop_assert_eq!(got, brute(&pts, &[q as f64], k));
        }
    }
}
