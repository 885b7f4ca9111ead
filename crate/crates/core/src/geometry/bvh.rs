//! Bounding volume hierarchy over 2D segments for nearest-segment queries.

use super::segment_closest;
use crate::scalar::Real;
use crate::vector::Vector;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node<T> {
    lo: Vector<T, 2>,
    hi: Vector<T, 2>,
    /// Leaf: range into `order`. Interior: children in `left`, `right`.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

#[derive(Clone, Debug)]
pub struct SegmentBvh<T> {
    nodes: Vec<Node<T>>,
    order: Vec<usize>,
}

/// Nearest segment: `(segment id, parameter along segment, squared distance)`.
pub type Nearest<T> = (usize, T, T);

impl<T: Real> SegmentBvh<T> {
    pub fn build(segments: &[(Vector<T, 2>, Vector<T, 2>)]) -> Self {
        let mut bvh = Self { nodes: Vec::new(), order: (0..segments.len()).collect() };
        if !segments.is_empty() {
            bvh.build_node(segments, 0, segments.len());
        }
        bvh
    }

    fn build_node(&mut self, segs: &[(Vector<T, 2>, Vector<T, 2>)], start: usize, end: usize) -> usize {
        let mut lo = Vector([T::infinity(); 2]);
        let mut hi = Vector([T::neg_infinity(); 2]);
        for &i in &self.order[start..end] {
            let (a, b) = segs[i];
            lo = lo.min(&a).min(&b);
            hi = hi.max(&a).max(&b);
        }
        let id = self.nodes.len();
        self.nodes.push(Node { lo, hi, start, count: end - start, left: 0, right: 0 });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        let mid = (start + end) / 2;
        let centroid = |i: usize| segs[i].0[axis] + segs[i].1[axis];
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroid(a).partial_cmp(&centroid(b)).unwrap_or(std::cmp::Ordering::Equal)
        });
        let left = self.build_node(segs, start, mid);
        let right = self.build_node(segs, mid, end);
        let node = &mut self.nodes[id];
        node.count = 0;
        node.left = left;
        node.right = right;
        id
    }

    fn box_distance2(node: &Node<T>, x: &Vector<T, 2>) -> T {
        let mut d2 = T::zero();
        for k in 0..2 {
            let v = (node.lo[k] - x[k]).max(x[k] - node.hi[k]).max(T::zero());
            d2 = d2 + v * v;
        }
        d2
    }

    /// Ties in distance go to the lowest segment id.
    pub fn nearest(&self, segs: &[(Vector<T, 2>, Vector<T, 2>)], x: &Vector<T, 2>) -> Option<Nearest<T>> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Nearest<T>> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let bound = Self::box_distance2(node, x);
            if let Some(b) = best {
                if bound > b.2 {
                    continue;
                }
            }
            if node.count > 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    let (t, d2) = segment_closest(x, &segs[i].0, &segs[i].1);
                    let better = match best {
                        None => true,
                        Some((bi, _, bd)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        best = Some((i, t, d2));
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let (dl, dr) = (Self::box_distance2(&self.nodes[l], x), Self::box_distance2(&self.nodes[r], x));
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}
