//! Exact nearest-neighbor lookup over a 3D point set.
//!
//! Ties on distance break toward the smaller point index, matching the
//! brute-force scan, so indexed and exhaustive queries agree bit for bit.

use crate::geom::{dist3_sq, Vec3};

const LEAF_SIZE: usize = 8;

enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<u32>,
    root: Option<KdNode>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec3]) -> KdTree<'a> {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let root = if points.is_empty() {
            None
        } else {
            let len = order.len();
            Some(build_node(points, &mut order, 0, len))
        };
        KdTree {
            points,
            order,
            root,
        }
    }

    /// Index and squared distance of the nearest point to `q`.
    pub fn nearest(&self, q: Vec3) -> Option<(u32, f64)> {
        let root = self.root.as_ref()?;
        let mut best: (u32, f64) = (u32::MAX, f64::INFINITY);
        self.search(root, q, &mut best);
        Some((best.0, best.1))
    }

    fn search(&self, node: &KdNode, q: Vec3, best: &mut (u32, f64)) {
        match node {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = dist3_sq(self.points[i as usize], q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[*axis] - value;
                let (near, far) = if delta <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, best);
                if delta * delta <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build_node(points: &[Vec3], order: &mut [u32], start: usize, end: usize) -> KdNode {
    let len = order.len();
    if len <= LEAF_SIZE {
        return KdNode::Leaf {
            start,
            end,
        };
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = points[i as usize];
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
        0
    } else if ext[1] >= ext[2] {
        1
    } else {
        2
    };
    let mid = len / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .unwrap()
            .then(a.cmp(&b))
    });
    let value = points[order[mid] as usize][axis];
    let (left_slice, right_slice) = order.split_at_mut(mid);
    let left = Box::new(build_node(points, left_slice, start, start + mid));
    let right = Box::new(build_node(points, right_slice, start + mid, end));
    KdNode::Split {
        axis,
        value,
        left,
        right,
    }
}

/// Exhaustive reference query with the same tie-breaking rule.
pub fn nearest_brute(points: &[Vec3], q: Vec3) -> Option<(u32, f64)> {
    let mut best: Option<(u32, f64)> = None;
    for (i, &p) in points.iter().enumerate() {
        let d = dist3_sq(p, q);
        match best {
            Some((_, bd)) if d > bd => {}
            Some((bi, bd)) if d == bd && i as u32 > bi => {}
            _ => best = Some((i as u32, d)),
        }
    }
    best
}
