//! Sketch-plane geometry: chains loop curves from the plane origin,
//! discretizes them into polylines, assembles oriented polygons with holes,
//! and triangulates them for the solid kernel's caps.

mod triangulate;

pub use triangulate::{triangulate, triangulate_indices};

use crate::cmdseq::{CurveCommand, Loop, Profile, EPS_CLOSE_RAW};
use crate::geom::{cross2, dist2, sub2, Vec2};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("OpenLoop: endpoint misses the loop start by {gap:.3e}")]
    OpenLoop { gap: f64 },
    #[error("DegenerateArc: sweep {alpha} chord {chord:.3e}")]
    DegenerateArc { alpha: f64, chord: f64 },
    #[error("SelfIntersectingLoop: loop {0}")]
    SelfIntersectingLoop(usize),
    #[error("CrossingLoops: loops {0} and {1}")]
    CrossingLoops(usize, usize),
    #[error("UnsupportedNesting: loop {0} is nested at depth 2 or more")]
    UnsupportedNesting(usize),
    #[error("DegenerateRegion: {0}")]
    DegenerateRegion(String),
}

/// Discretized curve chain. Closed polylines do not repeat the first point.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline2 {
    pub points: Vec<Vec2>,
    pub closed: bool,
}

impl Polyline2 {
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn reverse(&mut self) {
        self.points.reverse();
    }
}

/// A single sketch region: outer boundary wound counterclockwise, holes
/// wound clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonWithHoles {
    pub outer: Polyline2,
    pub holes: Vec<Polyline2>,
}

impl PolygonWithHoles {
    /// Region area: outer minus holes.
    pub fn area(&self) -> f64 {
        self.outer.signed_area() + self.holes.iter().map(Polyline2::signed_area).sum::<f64>()
    }

    /// Outer points followed by each hole's points, the index space used by
    /// `triangulate_indices`.
    pub fn all_points(&self) -> Vec<Vec2> {
        let mut pts = self.outer.points.clone();
        for h in &self.holes {
            pts.extend_from_slice(&h.points);
        }
        pts
    }

    /// Start offset of each hole inside `all_points`.
    pub fn hole_starts(&self) -> Vec<usize> {
        let mut starts = Vec::with_capacity(self.holes.len());
        let mut off = self.outer.points.len();
        for h in &self.holes {
            starts.push(off);
            off += h.points.len();
        }
        starts
    }
}

/// Shoelace area (positive for counterclockwise rings).
pub fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc += cross2(a, b);
    }
    acc / 2.0
}

/// Pairs every curve of a loop with its start point. The first curve starts
/// at the plane origin and each start is the previous curve's endpoint; a
/// circle is its own loop and carries its center.
pub fn chain_loop(lp: &Loop) -> Result<Vec<(CurveCommand, Vec2)>, SketchError> {
    if lp.is_circle() {
        return Ok(vec![(lp.curves[0], lp.curves[0].point())]);
    }
    let mut out = Vec::with_capacity(lp.curves.len());
    let mut cursor = [0.0, 0.0];
    for curve in &lp.curves {
        out.push((*curve, cursor));
        cursor = curve.point();
    }
    let gap = dist2(cursor, [0.0, 0.0]);
    if gap > EPS_CLOSE_RAW {
        return Err(SketchError::OpenLoop { gap });
    }
    Ok(out)
}

/// Discretizes one curve from `start`. Lines yield their two endpoints; arcs
/// yield `ceil(n_arc * alpha / tau) + 1` points with the analytic endpoints
/// preserved bit-for-bit; circles yield a closed `n_arc`-gon.
pub fn discretize_curve(
    curve: &CurveCommand,
    start: Vec2,
    n_arc: usize,
) -> Result<Polyline2, SketchError> {
    match *curve {
        CurveCommand::Line { x, y } => Ok(Polyline2 {
            points: vec![start, [x, y]],
            closed: false,
        }),
        CurveCommand::Arc { x, y, alpha, ccw } => {
            let end = [x, y];
            let chord = dist2(start, end);
            if alpha <= 1e-9 || alpha >= TAU - 1e-9 || chord <= 1e-12 {
                return Err(SketchError::DegenerateArc { alpha, chord });
            }
            let radius = chord / (2.0 * (alpha / 2.0).sin());
            let mid = [(start[0] + end[0]) / 2.0, (start[1] + end[1]) / 2.0];
            let u = sub2(end, start);
            let left = [-u[1] / chord, u[0] / chord];
            let h = radius * (alpha / 2.0).cos();
            let center = if ccw {
                [mid[0] + left[0] * h, mid[1] + left[1] * h]
            } else {
                [mid[0] - left[0] * h, mid[1] - left[1] * h]
            };
            let start_angle = (start[1] - center[1]).atan2(start[0] - center[0]);
            let sweep = if ccw { alpha } else { -alpha };
            let segs = ((n_arc as f64 * alpha / TAU).ceil() as usize).max(1);
            let mut points = Vec::with_capacity(segs + 1);
            points.push(start);
            for i in 1..segs {
                let a = start_angle + sweep * i as f64 / segs as f64;
                points.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
            }
            points.push(end);
            Ok(Polyline2 { points, closed: false })
        }
        CurveCommand::Circle { x, y, r } => {
            if r <= 1e-12 {
                return Err(SketchError::DegenerateRegion(format!(
                    "circle radius {r} too small"
                )));
            }
            let n = n_arc.max(3);
            let points = (0..n)
                .map(|i| {
                    let a = TAU * i as f64 / n as f64;
                    [x + r * a.cos(), y + r * a.sin()]
                })
                .collect();
            Ok(Polyline2 { points, closed: true })
        }
    }
}

/// Discretizes a whole loop into one closed polyline. Consecutive duplicate
/// and exactly collinear points are dropped so downstream caps and walls see
/// the same cleaned boundary.
pub fn discretize_loop(lp: &Loop, n_arc: usize) -> Result<Polyline2, SketchError> {
    let chained = chain_loop(lp)?;
    if lp.is_circle() {
        return discretize_curve(&chained[0].0, chained[0].1, n_arc);
    }
    let mut points: Vec<Vec2> = Vec::new();
    for (curve, start) in &chained {
        let pl = discretize_curve(curve, *start, n_arc)?;
        let skip = usize::from(!points.is_empty());
        points.extend_from_slice(&pl.points[skip..]);
    }
    // drop the closing point that duplicates the loop start
    if points.len() > 1 && dist2(points[0], *points.last().unwrap()) <= EPS_CLOSE_RAW {
        points.pop();
    }
    dedup_ring(&mut points);
    if points.len() < 3 {
        return Err(SketchError::DegenerateRegion(
            "loop collapsed below 3 points".into(),
        ));
    }
    Ok(Polyline2 { points, closed: true })
}

fn dedup_ring(points: &mut Vec<Vec2>) {
    // merge consecutive duplicates, then drop exactly collinear interior points
    let mut i = 0;
    while points.len() > 1 && i < points.len() {
        let j = (i + 1) % points.len();
        if dist2(points[i], points[j]) <= 1e-12 {
            points.remove(j.max(i).min(points.len() - 1));
        } else {
            i += 1;
        }
    }
    let mut k = 0;
    while points.len() > 3 && k < points.len() {
        let n = points.len();
        let prev = points[(k + n - 1) % n];
        let cur = points[k];
        let next = points[(k + 1) % n];
        if cross2(sub2(cur, prev), sub2(next, cur)).abs() <= 1e-14 {
            points.remove(k);
        } else {
            k += 1;
        }
    }
}

/// True when segments ab and cd cross in their interiors (shared endpoints
/// within tolerance do not count).
pub(crate) fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let eps = 1e-12;
    if dist2(a, c) <= eps || dist2(a, d) <= eps || dist2(b, c) <= eps || dist2(b, d) <= eps {
        return false;
    }
    let d1 = cross2(sub2(b, a), sub2(c, a));
    let d2 = cross2(sub2(b, a), sub2(d, a));
    let d3 = cross2(sub2(d, c), sub2(a, c));
    let d4 = cross2(sub2(d, c), sub2(b, c));
    d1 * d2 < -eps && d3 * d4 < -eps
}

/// Even-odd ray cast; points on the boundary give an arbitrary answer.
pub(crate) fn point_in_ring(p: Vec2, ring: &[Vec2]) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if x > p[0] {
                inside = !inside;
            }
        }
    }
    inside
}

fn ring_self_intersects(ring: &[Vec2]) -> bool {
    let n = ring.len();
    for i in 0..n {
        for j in i + 1..n {
            // skip adjacent segments
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_cross(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

fn rings_cross(a: &[Vec2], b: &[Vec2]) -> bool {
    let na = a.len();
    let nb = b.len();
    for i in 0..na {
        for j in 0..nb {
            if segments_cross(a[i], a[(i + 1) % na], b[j], b[(j + 1) % nb]) {
                return true;
            }
        }
    }
    false
}

/// True when ring `inner` lies inside ring `outer`, decided on a vertex of
/// `inner` that is clear of `outer`'s boundary (the rings must not cross).
fn ring_inside(inner: &[Vec2], outer: &[Vec2]) -> bool {
    let clear = |p: Vec2| {
        let n = outer.len();
        (0..n).all(|i| point_segment_distance(p, outer[i], outer[(i + 1) % n]) > 1e-9)
    };
    for &p in inner {
        if clear(p) {
            return point_in_ring(p, outer);
        }
    }
    false
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = sub2(b, a);
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    if len_sq <= 1e-24 {
        return dist2(p, a);
    }
    let t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len_sq;
    let t = t.clamp(0.0, 1.0);
    dist2(p, [a[0] + ab[0] * t, a[1] + ab[1] * t])
}

/// Discretizes a profile and groups its loops into oriented regions.
///
/// The outer loop of each region is the one containing its holes; disjoint
/// loops become separate regions (the extruder unions the prisms). Outer
/// rings are normalized counterclockwise and holes clockwise.
pub fn assemble_profile(
    profile: &Profile,
    n_arc: usize,
) -> Result<Vec<PolygonWithHoles>, SketchError> {
    let mut rings: Vec<Polyline2> = Vec::with_capacity(profile.loops.len());
    for lp in &profile.loops {
        rings.push(discretize_loop(lp, n_arc)?);
    }
    for (i, r) in rings.iter().enumerate() {
        if ring_self_intersects(&r.points) {
            return Err(SketchError::SelfIntersectingLoop(i));
        }
    }
    for i in 0..rings.len() {
        for j in i + 1..rings.len() {
            if rings_cross(&rings[i].points, &rings[j].points) {
                return Err(SketchError::CrossingLoops(i, j));
            }
        }
    }

    // containment depth; loops are non-crossing so this is well-defined
    let n = rings.len();
    let mut container: Vec<Option<usize>> = vec![None; n];
    let mut depth = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && ring_inside(&rings[i].points, &rings[j].points) {
                depth[i] += 1;
                container[i] = Some(j);
            }
        }
    }
    if let Some(i) = depth.iter().position(|&d| d >= 2) {
        return Err(SketchError::UnsupportedNesting(i));
    }

    let mut regions: Vec<PolygonWithHoles> = Vec::new();
    let mut region_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if depth[i] == 0 {
            let mut outer = rings[i].clone();
            if outer.signed_area() < 0.0 {
                outer.reverse();
            }
            region_of[i] = Some(regions.len());
            regions.push(PolygonWithHoles {
                outer,
                holes: Vec::new(),
            });
        }
    }
    for i in 0..n {
        if depth[i] == 1 {
            let parent = container[i].expect("depth-1 loop has a container");
            let region = region_of[parent].expect("container is an outer loop");
            let mut hole = rings[i].clone();
            if hole.signed_area() > 0.0 {
                hole.reverse();
            }
            regions[region].holes.push(hole);
        }
    }
    for region in &regions {
        if region.area() <= 1e-12 {
            return Err(SketchError::DegenerateRegion(format!(
                "region area {} too small",
                region.area()
            )));
        }
    }
    Ok(regions)
}
