//! Exact nearest-neighbour search over rows of a dense matrix.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::math;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// kd-tree over the rows of an `n×d` matrix. Queries are exact; among
/// equidistant points the lowest row index wins.
#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    // row-major copy of the points, in original order
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(rows: &DMatrix<f64>) -> Self {
        let (n, dim) = rows.shape();
        let mut points = Vec::with_capacity(n * dim);
        for i in 0..n {
            points.extend(rows.row(i).iter());
        }
        let mut tree = KdTree {
            dim,
            points,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE || self.dim == 0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the widest coordinate
        let mut best = (0, -1.0);
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points[i * self.dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        let (dim, spread) = best;
        if spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let stride = self.dim;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * stride + dim]
                .total_cmp(&points[b * stride + dim])
                .then(a.cmp(&b))
        });
        let value = self.points[self.order[mid] * stride + dim];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    /// Index and squared distance of the nearest row to `q`.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        assert_eq!(q.len(), self.dim, "query dimension");
        if self.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, q: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = math::sq_dist(self.point(i), q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
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
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                // equality still descends so that lower-index ties are found
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}
