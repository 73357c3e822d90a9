//! Ear-clipping triangulation with hole bridging.
//!
//! Each hole is joined to the outer ring through a mutually visible vertex
//! pair (found by a rightward ray cast from the hole's rightmost vertex),
//! then the resulting weakly simple ring is ear-clipped.

use super::{PolygonWithHoles, SketchError};
use crate::geom::{cross2, sub2, Vec2};

#[derive(Debug, Clone, Copy)]
struct Node {
    src: usize,
    pos: Vec2,
    prev: usize,
    next: usize,
    alive: bool,
}

struct Ring {
    nodes: Vec<Node>,
}

impl Ring {
    fn link(&mut self, a: usize, b: usize) {
        self.nodes[a].next = b;
        self.nodes[b].prev = a;
    }

    fn remove(&mut self, i: usize) {
        let (p, n) = (self.nodes[i].prev, self.nodes[i].next);
        self.link(p, n);
        self.nodes[i].alive = false;
    }

    fn corner(&self, i: usize) -> (Vec2, Vec2, Vec2) {
        (
            self.nodes[self.nodes[i].prev].pos,
            self.nodes[i].pos,
            self.nodes[self.nodes[i].next].pos,
        )
    }

    fn cross_at(&self, i: usize) -> f64 {
        let (a, b, c) = self.corner(i);
        cross2(sub2(b, a), sub2(c, b))
    }

    fn iter_from(&self, start: usize) -> RingIter<'_> {
        RingIter {
            ring: self,
            start,
            cur: Some(start),
        }
    }
}

struct RingIter<'a> {
    ring: &'a Ring,
    start: usize,
    cur: Option<usize>,
}

impl Iterator for RingIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let cur = self.cur?;
        let next = self.ring.nodes[cur].next;
        self.cur = if next == self.start { None } else { Some(next) };
        Some(cur)
    }
}

fn point_in_triangle(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    // inclusive: boundary points count as inside
    let d1 = cross2(sub2(b, a), sub2(p, a));
    let d2 = cross2(sub2(c, b), sub2(p, b));
    let d3 = cross2(sub2(a, c), sub2(p, c));
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

/// Triangulates `points` (outer ring counterclockwise followed by clockwise
/// hole rings starting at `hole_starts`) and returns index triples into
/// `points`, each wound counterclockwise.
pub fn triangulate_indices(
    points: &[Vec2],
    hole_starts: &[usize],
) -> Result<Vec<[usize; 3]>, SketchError> {
    let outer_len = hole_starts.first().copied().unwrap_or(points.len());
    if outer_len < 3 {
        return Err(SketchError::DegenerateRegion(
            "outer ring needs at least 3 points".into(),
        ));
    }

    let mut ring = Ring {
        nodes: points
            .iter()
            .enumerate()
            .map(|(i, &p)| Node {
                src: i,
                pos: p,
                prev: i,
                next: i,
                alive: true,
            })
            .collect(),
    };
    let close = |ring: &mut Ring, lo: usize, hi: usize| {
        for i in lo..hi {
            let j = if i + 1 == hi { lo } else { i + 1 };
            ring.link(i, j);
        }
    };
    close(&mut ring, 0, outer_len);
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    for (k, &start) in hole_starts.iter().enumerate() {
        let end = hole_starts.get(k + 1).copied().unwrap_or(points.len());
        if end - start < 3 {
            return Err(SketchError::DegenerateRegion(
                "hole ring needs at least 3 points".into(),
            ));
        }
        close(&mut ring, start, end);
        bounds.push((start, end));
    }

    // merge holes into the outer ring, rightmost hole first
    let mut holes: Vec<usize> = bounds
        .iter()
        .map(|&(start, end)| {
            (start..end)
                .max_by(|&a, &b| {
                    ring.nodes[a].pos[0]
                        .partial_cmp(&ring.nodes[b].pos[0])
                        .unwrap()
                })
                .unwrap()
        })
        .collect();
    holes.sort_by(|&a, &b| ring.nodes[b].pos[0].partial_cmp(&ring.nodes[a].pos[0]).unwrap());
    for hole_node in holes {
        merge_hole(&mut ring, hole_node, 0)?;
    }

    let mut triangles = Vec::with_capacity(points.len() + 2 * hole_starts.len());
    clip_ears(&mut ring, 0, &mut triangles)?;
    Ok(triangles)
}

/// Convenience form returning coordinate triangles.
pub fn triangulate(poly: &PolygonWithHoles) -> Result<Vec<[Vec2; 3]>, SketchError> {
    if poly.area() <= 1e-12 {
        return Err(SketchError::DegenerateRegion(format!(
            "polygon area {} too small",
            poly.area()
        )));
    }
    let pts = poly.all_points();
    let tris = triangulate_indices(&pts, &poly.hole_starts())?;
    Ok(tris
        .into_iter()
        .map(|[a, b, c]| [pts[a], pts[b], pts[c]])
        .collect())
}

/// Connects `hole_node`'s ring into the ring containing `outer_node` by a
/// bridge of two duplicated nodes.
fn merge_hole(ring: &mut Ring, hole_node: usize, outer_node: usize) -> Result<(), SketchError> {
    let m = ring.nodes[hole_node].pos;

    // rightward ray from m: closest crossing among outer edges
    let mut best_x = f64::INFINITY;
    let mut candidate: Option<usize> = None;
    for i in ring.iter_from(outer_node).collect::<Vec<_>>() {
        let p = ring.nodes[i].pos;
        let q = ring.nodes[ring.nodes[i].next].pos;
        if (p[1] > m[1]) != (q[1] > m[1]) && (q[1] - p[1]).abs() > 0.0 {
            let x = p[0] + (m[1] - p[1]) * (q[0] - p[0]) / (q[1] - p[1]);
            if x >= m[0] && x < best_x {
                best_x = x;
                candidate = Some(if p[0] > q[0] { i } else { ring.nodes[i].next });
            }
        }
    }
    let mut bridge = candidate.ok_or_else(|| {
        SketchError::DegenerateRegion("hole has no visible outer boundary".into())
    })?;

    // prefer a reflex vertex inside the candidate triangle that subtends the
    // smallest angle from the ray, which keeps the bridge unobstructed
    let b_pos = ring.nodes[bridge].pos;
    let tri = (m, [best_x, m[1]], b_pos);
    let mut best_tan = f64::INFINITY;
    for i in ring.iter_from(outer_node).collect::<Vec<_>>() {
        if i == bridge {
            continue;
        }
        let p = ring.nodes[i].pos;
        if p[0] >= m[0]
            && p[0] <= best_x.max(b_pos[0])
            && point_in_triangle(p, tri.0, tri.1, tri.2)
            && ring.cross_at(i) < 0.0
        {
            let tan = (p[1] - m[1]).abs() / (p[0] - m[0]).max(1e-30);
            if tan < best_tan {
                best_tan = tan;
                bridge = i;
            }
        }
    }

    // splice: bridge -> hole ... hole' -> bridge' with duplicated endpoints
    let hole_prev = ring.nodes[hole_node].prev;
    let bridge_next = ring.nodes[bridge].next;
    let b2 = ring.nodes.len();
    let copy_b = ring.nodes[bridge];
    ring.nodes.push(copy_b);
    let h2 = ring.nodes.len();
    let copy_h = ring.nodes[hole_node];
    ring.nodes.push(copy_h);

    ring.link(bridge, hole_node);
    ring.link(hole_prev, h2);
    ring.link(h2, b2);
    ring.link(b2, bridge_next);
    Ok(())
}

fn clip_ears(
    ring: &mut Ring,
    start: usize,
    triangles: &mut Vec<[usize; 3]>,
) -> Result<(), SketchError> {
    let mut remaining = ring.iter_from(start).count();
    let mut cur = start;
    let mut since_last_clip = 0usize;

    while remaining > 3 {
        if is_ear(ring, cur) {
            let (a, b, c) = (ring.nodes[cur].prev, cur, ring.nodes[cur].next);
            triangles.push([ring.nodes[a].src, ring.nodes[b].src, ring.nodes[c].src]);
            ring.remove(cur);
            cur = ring.nodes[a].next;
            remaining -= 1;
            since_last_clip = 0;
            continue;
        }
        cur = ring.nodes[cur].next;
        since_last_clip += 1;
        if since_last_clip > remaining {
            // no clean ear left; clip the flattest convex corner to make
            // progress, dropping the sliver if it carries no area
            let fallback = ring
                .iter_from(cur)
                .filter(|&i| ring.cross_at(i) > 0.0)
                .min_by(|&a, &b| ring.cross_at(a).partial_cmp(&ring.cross_at(b)).unwrap());
            match fallback {
                Some(i) => {
                    let (a, b, c) = (ring.nodes[i].prev, i, ring.nodes[i].next);
                    if ring.cross_at(i) / 2.0 > 1e-12 {
                        triangles.push([
                            ring.nodes[a].src,
                            ring.nodes[b].src,
                            ring.nodes[c].src,
                        ]);
                    }
                    ring.remove(i);
                    cur = ring.nodes[a].next;
                    remaining -= 1;
                    since_last_clip = 0;
                }
                None => {
                    return Err(SketchError::DegenerateRegion(
                        "triangulation stalled on a ring with no convex corner".into(),
                    ))
                }
            }
        }
    }
    let (a, b, c) = (ring.nodes[cur].prev, cur, ring.nodes[cur].next);
    if ring.cross_at(cur) / 2.0 > 1e-12 {
        triangles.push([ring.nodes[a].src, ring.nodes[b].src, ring.nodes[c].src]);
    }
    Ok(())
}

fn is_ear(ring: &Ring, i: usize) -> bool {
    let (a, b, c) = ring.corner(i);
    if cross2(sub2(b, a), sub2(c, b)) <= 1e-24 {
        return false;
    }
    // reject when any reflex vertex lies inside (or on) the candidate triangle
    let (pa, pc) = (ring.nodes[i].prev, ring.nodes[i].next);
    let mut p = ring.nodes[pc].next;
    while p != pa {
        let pos = ring.nodes[p].pos;
        if ring.cross_at(p) < 0.0
            && pos != a
            && pos != b
            && pos != c
            && point_in_triangle(pos, a, b, c)
        {
            return false;
        }
        p = ring.nodes[p].next;
    }
    true
}
