//! Self-intersection ratio: the fraction of faces that properly intersect a
//! non-adjacent face.
//!
//! Adjacency means sharing at least one vertex index. A proper intersection
//! crosses both triangle interiors: for non-coplanar pairs the intersection
//! segment must be longer than the touch tolerance and pass strictly inside
//! both triangles; coplanar pairs must overlap with positive area. Contact
//! confined to triangle boundaries (abutting or stacked edges) is touching,
//! not intersection.

use super::MetricsError;
use crate::geom::{add3, cross3, dot3, norm3, scale3, sub3, Aabb, Vec3};
use crate::solid_kernel::TriMesh;
use std::collections::BTreeSet;

/// Touch tolerance in world units.
pub const EPS_INT: f64 = 1e-9;

type Tri = [Vec3; 3];

fn tri_aabb(t: &Tri, pad: f64) -> Aabb {
    let mut bb = Aabb::from_points(t.iter()).unwrap();
    for k in 0..3 {
        bb.min[k] -= pad;
        bb.max[k] += pad;
    }
    bb
}

fn unit_normal(t: &Tri) -> Option<Vec3> {
    let n = cross3(sub3(t[1], t[0]), sub3(t[2], t[0]));
    let len = norm3(n);
    if len <= 1e-30 {
        None
    } else {
        Some(scale3(n, 1.0 / len))
    }
}

/// Distance from `p` to the nearest edge of `t`, measured inside the
/// triangle's plane; positive when `p` is on the interior side of every edge.
fn interior_margin(p: Vec3, t: &Tri, normal: Vec3) -> f64 {
    let mut margin = f64::INFINITY;
    for i in 0..3 {
        let a = t[i];
        let b = t[(i + 1) % 3];
        let edge = sub3(b, a);
        let inward = cross3(normal, edge);
        let len = norm3(inward);
        if len <= 1e-30 {
            return f64::NEG_INFINITY;
        }
        margin = margin.min(dot3(sub3(p, a), inward) / len);
    }
    margin
}

/// Points where triangle `t` meets the plane (n, w), for triangles that
/// straddle or touch it.
fn plane_crossing_points(t: &Tri, n: Vec3, w: f64, eps: f64) -> Vec<Vec3> {
    let d: Vec<f64> = t.iter().map(|&v| dot3(n, v) - w).collect();
    let mut pts = Vec::with_capacity(2);
    for i in 0..3 {
        if d[i].abs() <= eps {
            pts.push(t[i]);
        }
    }
    for i in 0..3 {
        let j = (i + 1) % 3;
        if (d[i] > eps && d[j] < -eps) || (d[i] < -eps && d[j] > eps) {
            let s = d[i] / (d[i] - d[j]);
            pts.push(add3(t[i], scale3(sub3(t[j], t[i]), s)));
        }
    }
    pts
}

/// Sutherland-Hodgman clip of triangle `subject` by the edges of `clip`,
/// both projected into 2D.
fn clip_area_2d(subject: &[[f64; 2]; 3], clip: &[[f64; 2]; 3]) -> f64 {
    let cross2 = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    // orient the clip triangle counterclockwise
    let mut clip = *clip;
    if cross2(clip[0], clip[1], clip[2]) < 0.0 {
        clip.swap(1, 2);
    }
    let mut poly: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..3 {
        let a = clip[i];
        let b = clip[(i + 1) % 3];
        let mut next: Vec<[f64; 2]> = Vec::with_capacity(poly.len() + 2);
        for k in 0..poly.len() {
            let p = poly[k];
            let q = poly[(k + 1) % poly.len()];
            let pin = cross2(a, b, p) >= 0.0;
            let qin = cross2(a, b, q) >= 0.0;
            if pin {
                next.push(p);
            }
            if pin != qin {
                let dp = cross2(a, b, p);
                let dq = cross2(a, b, q);
                let t = dp / (dp - dq);
                next.push([p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]);
            }
        }
        poly = next;
        if poly.is_empty() {
            return 0.0;
        }
    }
    let mut area = 0.0;
    for k in 1..poly.len() - 1 {
        area += cross2(poly[0], poly[k], poly[k + 1]);
    }
    (area / 2.0).abs()
}

fn coplanar_overlap(t1: &Tri, t2: &Tri, normal: Vec3) -> bool {
    // project onto the dominant axis of the shared plane normal
    let abs = [normal[0].abs(), normal[1].abs(), normal[2].abs()];
    let drop = if abs[0] >= abs[1] && abs[0] >= abs[2] {
        0
    } else if abs[1] >= abs[2] {
        1
    } else {
        2
    };
    let proj = |v: Vec3| -> [f64; 2] {
        match drop {
            0 => [v[1], v[2]],
            1 => [v[0], v[2]],
            _ => [v[0], v[1]],
        }
    };
    let p1 = [proj(t1[0]), proj(t1[1]), proj(t1[2])];
    let p2 = [proj(t2[0]), proj(t2[1]), proj(t2[2])];
    clip_area_2d(&p1, &p2) > 1e-12
}

/// Proper triangle-triangle intersection: the shared set must cross both
/// interiors, not just touch boundaries.
pub(crate) fn tris_properly_intersect(t1: &Tri, t2: &Tri) -> bool {
    let (Some(n1), Some(n2)) = (unit_normal(t1), unit_normal(t2)) else {
        return false;
    };
    let w1 = dot3(n1, t1[0]);
    let w2 = dot3(n2, t2[0]);

    let d1: Vec<f64> = t2.iter().map(|&v| dot3(n1, v) - w1).collect();
    if d1.iter().all(|&d| d > EPS_INT) || d1.iter().all(|&d| d < -EPS_INT) {
        return false;
    }
    let d2: Vec<f64> = t1.iter().map(|&v| dot3(n2, v) - w2).collect();
    if d2.iter().all(|&d| d > EPS_INT) || d2.iter().all(|&d| d < -EPS_INT) {
        return false;
    }

    let coplanar = d1.iter().all(|&d| d.abs() <= EPS_INT) && d2.iter().all(|&d| d.abs() <= EPS_INT);
    if coplanar {
        return coplanar_overlap(t1, t2, n1);
    }

    let dir = cross3(n1, n2);
    let len = norm3(dir);
    if len <= 1e-12 {
        // parallel but offset planes: the distance checks above already
        // passed only within tolerance, treat as touching
        return false;
    }
    let dir = scale3(dir, 1.0 / len);

    let pts1 = plane_crossing_points(t1, n2, w2, EPS_INT);
    let pts2 = plane_crossing_points(t2, n1, w1, EPS_INT);
    if pts1.len() < 2 || pts2.len() < 2 {
        return false;
    }
    let interval = |pts: &[Vec3]| -> (f64, f64, Vec3) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &p in pts {
            let t = dot3(p, dir);
            lo = lo.min(t);
            hi = hi.max(t);
        }
        (lo, hi, pts[0])
    };
    let (lo1, hi1, base) = interval(&pts1);
    let (lo2, hi2, _) = interval(&pts2);
    let lo = lo1.max(lo2);
    let hi = hi1.min(hi2);
    if hi - lo <= EPS_INT {
        return false;
    }

    // midpoint of the overlap must sit strictly inside both triangles
    let t_mid = (lo + hi) / 2.0;
    let t_base = dot3(base, dir);
    let mid = add3(base, scale3(dir, t_mid - t_base));
    interior_margin(mid, t1, n1) > EPS_INT && interior_margin(mid, t2, n2) > EPS_INT
}

fn faces_adjacent(a: &[u32; 3], b: &[u32; 3]) -> bool {
    a.iter().any(|i| b.contains(i))
}

struct BvhNode {
    bbox: Aabb,
    // leaf: face range into `order`; inner: child indices
    children: Option<(usize, usize)>,
    range: (usize, usize),
}

struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

impl Bvh {
    fn build(boxes: &[Aabb]) -> Bvh {
        let mut bvh = Bvh {
            nodes: Vec::new(),
            order: (0..boxes.len()).collect(),
        };
        if !boxes.is_empty() {
            bvh.split(boxes, 0, boxes.len());
        }
        bvh
    }

    fn split(&mut self, boxes: &[Aabb], lo: usize, hi: usize) -> usize {
        let bbox = self.order[lo..hi]
            .iter()
            .map(|&f| boxes[f])
            .reduce(|a, b| Aabb {
                min: [
                    a.min[0].min(b.min[0]),
                    a.min[1].min(b.min[1]),
                    a.min[2].min(b.min[2]),
                ],
                max: [
                    a.max[0].max(b.max[0]),
                    a.max[1].max(b.max[1]),
                    a.max[2].max(b.max[2]),
                ],
            })
            .unwrap();
        let idx = self.nodes.len();
        self.nodes.push(BvhNode {
            bbox,
            children: None,
            range: (lo, hi),
        });
        if hi - lo > 4 {
            let ext = bbox.extents();
            let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
                0
            } else if ext[1] >= ext[2] {
                1
            } else {
                2
            };
            let mid = (lo + hi) / 2;
            self.order[lo..hi].sort_by(|&a, &b| {
                let ca = boxes[a].min[axis] + boxes[a].max[axis];
                let cb = boxes[b].min[axis] + boxes[b].max[axis];
                ca.partial_cmp(&cb).unwrap()
            });
            let left = self.split(boxes, lo, mid);
            let right = self.split(boxes, mid, hi);
            self.nodes[idx].children = Some((left, right));
        }
        idx
    }

    fn query(&self, bbox: &Aabb, out: &mut Vec<usize>) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.bbox.intersects(bbox) {
                continue;
            }
            match node.children {
                Some((l, r)) => {
                    stack.push(l);
                    stack.push(r);
                }
                None => out.extend_from_slice(&self.order[node.range.0..node.range.1]),
            }
        }
    }
}

fn intersecting_faces(mesh: &TriMesh, brute: bool) -> Result<BTreeSet<usize>, MetricsError> {
    if mesh.faces.is_empty() {
        return Err(MetricsError::EmptyMesh);
    }
    let tris: Vec<Tri> = (0..mesh.faces.len()).map(|f| mesh.face_points(f)).collect();
    let mut hits = BTreeSet::new();
    let mut mark = |i: usize, j: usize| {
        hits.insert(i);
        hits.insert(j);
    };
    if brute {
        for i in 0..tris.len() {
            for j in i + 1..tris.len() {
                if !faces_adjacent(&mesh.faces[i], &mesh.faces[j])
                    && tris_properly_intersect(&tris[i], &tris[j])
                {
                    mark(i, j);
                }
            }
        }
    } else {
        let boxes: Vec<Aabb> = tris.iter().map(|t| tri_aabb(t, EPS_INT)).collect();
        let bvh = Bvh::build(&boxes);
        let mut candidates = Vec::new();
        for i in 0..tris.len() {
            candidates.clear();
            bvh.query(&boxes[i], &mut candidates);
            for &j in &candidates {
                if j <= i {
                    continue;
                }
                if !faces_adjacent(&mesh.faces[i], &mesh.faces[j])
                    && tris_properly_intersect(&tris[i], &tris[j])
                {
                    mark(i, j);
                }
            }
        }
    }
    Ok(hits)
}

/// Faces that properly intersect at least one non-adjacent face, found
/// through a bounding-volume hierarchy.
pub fn self_intersecting_faces(mesh: &TriMesh) -> Result<BTreeSet<usize>, MetricsError> {
    intersecting_faces(mesh, false)
}

/// Exhaustive O(F^2) reference enumeration of the same set.
pub fn self_intersecting_faces_brute(mesh: &TriMesh) -> Result<BTreeSet<usize>, MetricsError> {
    intersecting_faces(mesh, true)
}

pub fn self_intersection_ratio(mesh: &TriMesh) -> Result<f64, MetricsError> {
    Ok(self_intersecting_faces(mesh)?.len() as f64 / mesh.faces.len() as f64)
}

pub fn self_intersection_ratio_brute(mesh: &TriMesh) -> Result<f64, MetricsError> {
    Ok(self_intersecting_faces_brute(mesh)?.len() as f64 / mesh.faces.len() as f64)
}
