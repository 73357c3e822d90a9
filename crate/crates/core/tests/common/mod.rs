//! Shared fuzz generators and independent oracles for the acceptance suite.

use cadseq::cmdseq::{
    validate_sequence, BooleanKind, CadSequence, CurveCommand, ExtentKind, ExtrudeCommand, Loop,
    Profile, Step,
};
use cadseq::geom::{cross2, dist2, round_sig9, sub2, Vec2};
use cadseq::sketch2d::assemble_profile;
use cadseq::solid_kernel::TriMesh;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Prints the one-line verdict for a criterion, then fails the test with the
/// collected details if anything went wrong.
pub fn report(name: &str, failures: &[String]) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!("[acceptance] {name}: {verdict}");
    assert!(
        failures.is_empty(),
        "{name}: {} failure(s):\n{}",
        failures.len(),
        failures.join("\n")
    );
}

fn r9(x: f64) -> f64 {
    round_sig9(x)
}

/// Star polygon through the origin: strictly simple, counterclockwise, all
/// coordinates comfortably inside the unit square, and no interior vertex
/// near the origin (the loop-closure anchor).
fn gen_polygon_vertices(rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    'outer: loop {
        let k = rng.gen_range(3..=8);
        let base_r = rng.gen_range(0.25..0.45);
        let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..TAU)).collect();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // keep corners apart so edges stay non-degenerate
        for w in angles.windows(2) {
            if w[1] - w[0] < 0.25 {
                continue 'outer;
            }
        }
        if TAU - (angles[k - 1] - angles[0]) < 0.25 {
            continue 'outer;
        }
        let pts: Vec<Vec2> = angles
            .iter()
            .map(|&a| {
                let r = base_r * rng.gen_range(0.55..1.0);
                [r * a.cos(), r * a.sin()]
            })
            .collect();
        let v0 = pts[0];
        let shifted: Vec<Vec2> = pts
            .iter()
            .map(|p| [r9(p[0] - v0[0]), r9(p[1] - v0[1])])
            .collect();
        // interior vertices must stay clear of the closure anchor
        if shifted[1..].iter().any(|p| dist2(*p, [0.0, 0.0]) < 0.03) {
            continue;
        }
        if shifted.iter().any(|p| p[0].abs() > 0.92 || p[1].abs() > 0.92) {
            continue;
        }
        return shifted;
    }
}

/// Replaces some polygon edges by outward-bulging arcs. The polygon is
/// counterclockwise, so a ccw arc with a sweep below pi bulges away from the
/// interior.
fn polygon_to_curves(rng: &mut ChaCha8Rng, vertices: &[Vec2], with_arcs: bool) -> Vec<CurveCommand> {
    let k = vertices.len();
    (1..=k)
        .map(|i| {
            let end = vertices[i % k];
            if with_arcs && rng.gen_bool(0.35) {
                CurveCommand::Arc {
                    x: end[0],
                    y: end[1],
                    alpha: r9(rng.gen_range(0.3..1.2)),
                    ccw: true,
                }
            } else {
                CurveCommand::Line { x: end[0], y: end[1] }
            }
        })
        .collect()
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = sub2(b, a);
    let len_sq = ab[0] * ab[0] + ab[1] * ab[1];
    if len_sq <= 1e-24 {
        return dist2(p, a);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len_sq).clamp(0.0, 1.0);
    dist2(p, [a[0] + ab[0] * t, a[1] + ab[1] * t])
}

fn gen_circle_loop(rng: &mut ChaCha8Rng) -> Loop {
    let r = r9(rng.gen_range(0.12..0.4));
    let max_c = 0.9 - r;
    let x = r9(rng.gen_range(-max_c..max_c));
    let y = r9(rng.gen_range(-max_c..max_c));
    Loop {
        curves: vec![CurveCommand::Circle { x, y, r }],
    }
}

/// A random profile mixing lines, arcs, and circles; optionally verified to
/// assemble into simple regions (needed when the profile will be extruded).
pub fn gen_profile(rng: &mut ChaCha8Rng, ensure_simple: bool) -> Profile {
    loop {
        let style = rng.gen_range(0..5u8);
        let profile = match style {
            // plain polygon
            0 => Profile {
                loops: vec![Loop {
                    curves: {
                        let v = gen_polygon_vertices(rng);
                        polygon_to_curves(rng, &v, false)
                    },
                }],
            },
            // polygon with arc edges
            1 => Profile {
                loops: vec![Loop {
                    curves: {
                        let v = gen_polygon_vertices(rng);
                        polygon_to_curves(rng, &v, true)
                    },
                }],
            },
            // standalone circle
            2 => Profile {
                loops: vec![gen_circle_loop(rng)],
            },
            // polygon with a circular hole
            3 => {
                let v = gen_polygon_vertices(rng);
                let kernel = {
                    // the star is generated around a point that shifted to -v0;
                    // approximate it by the vertex centroid
                    let mut c = [0.0, 0.0];
                    for p in &v {
                        c[0] += p[0] / v.len() as f64;
                        c[1] += p[1] / v.len() as f64;
                    }
                    c
                };
                let boundary_dist = (0..v.len())
                    .map(|i| point_segment_distance(kernel, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min);
                if boundary_dist < 0.1 {
                    continue;
                }
                let hole_r = r9(boundary_dist * rng.gen_range(0.25..0.45));
                let curves = polygon_to_curves(rng, &v, false);
                Profile {
                    loops: vec![
                        Loop { curves },
                        Loop {
                            curves: vec![CurveCommand::Circle {
                                x: r9(kernel[0]),
                                y: r9(kernel[1]),
                                r: hole_r,
                            }],
                        },
                    ],
                }
            }
            // two disjoint circles (multi-region profile)
            _ => {
                let a = gen_circle_loop(rng);
                let b = gen_circle_loop(rng);
                let (CurveCommand::Circle { x: ax, y: ay, r: ar }, CurveCommand::Circle { x: bx, y: by, r: br }) =
                    (a.curves[0], b.curves[0])
                else {
                    unreachable!()
                };
                if dist2([ax, ay], [bx, by]) < ar + br + 0.05 {
                    continue;
                }
                Profile { loops: vec![a, b] }
            }
        };
        if ensure_simple && assemble_profile(&profile, 64).is_err() {
            continue;
        }
        return profile;
    }
}

pub fn gen_extrude(rng: &mut ChaCha8Rng, boolean: BooleanKind, extent: ExtentKind) -> ExtrudeCommand {
    let extent_pos = r9(rng.gen_range(0.15..1.2));
    let extent_neg = r9(rng.gen_range(0.15..1.2));
    ExtrudeCommand {
        theta: r9(rng.gen_range(0.0..TAU - 1e-6)),
        phi: r9(rng.gen_range(0.0..std::f64::consts::PI - 1e-6)),
        gamma: r9(rng.gen_range(0.0..TAU - 1e-6)),
        origin: [
            r9(rng.gen_range(-0.6..0.6)),
            r9(rng.gen_range(-0.6..0.6)),
            r9(rng.gen_range(-0.6..0.6)),
        ],
        scale: r9(rng.gen_range(0.3..1.0)),
        extent_pos,
        extent_neg,
        boolean,
        extent,
    }
}

pub fn random_extent(rng: &mut ChaCha8Rng) -> ExtentKind {
    match rng.gen_range(0..3u8) {
        0 => ExtentKind::OneSided,
        1 => ExtentKind::Symmetric,
        _ => ExtentKind::TwoSided,
    }
}

/// Random valid sequence. `joins_only` keeps every fold step additive so all
/// prefixes stay non-empty.
pub fn gen_sequence(
    rng: &mut ChaCha8Rng,
    n_steps: usize,
    ensure_simple: bool,
    joins_only: bool,
) -> CadSequence {
    let steps = (0..n_steps)
        .map(|i| {
            let boolean = if i == 0 {
                BooleanKind::NewBody
            } else if joins_only {
                BooleanKind::Join
            } else {
                match rng.gen_range(0..10u8) {
                    0..=6 => BooleanKind::Join,
                    7..=8 => BooleanKind::Cut,
                    _ => BooleanKind::Intersect,
                }
            };
            let extent = random_extent(rng);
            Step {
                profile: gen_profile(rng, ensure_simple),
                extrude: gen_extrude(rng, boolean, extent),
            }
        })
        .collect();
    let seq = CadSequence::new(steps);
    let violations = validate_sequence(&seq);
    assert!(violations.is_empty(), "generator produced {violations:?}");
    seq
}

/// Random triangle soup with local clustering so faces actually interact.
pub fn gen_triangle_soup(rng: &mut ChaCha8Rng, faces: usize, spread: f64) -> TriMesh {
    let mut mesh = TriMesh::empty();
    for _ in 0..faces {
        let base = mesh.vertices.len() as u32;
        let c = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        for _ in 0..3 {
            mesh.vertices.push([
                c[0] + rng.gen_range(-spread..spread),
                c[1] + rng.gen_range(-spread..spread),
                c[2] + rng.gen_range(-spread..spread),
            ]);
        }
        mesh.faces.push([base, base + 1, base + 2]);
    }
    mesh
}

/// Independent simplicity oracle: no two non-adjacent segments of the rings
/// may cross.
pub fn rings_are_simple(rings: &[Vec<Vec2>]) -> bool {
    let segs: Vec<(Vec2, Vec2)> = rings
        .iter()
        .flat_map(|ring| {
            let n = ring.len();
            (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
        })
        .collect();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            let (a, b) = segs[i];
            let (c, d) = segs[j];
            let share = dist2(a, c) < 1e-12
                || dist2(a, d) < 1e-12
                || dist2(b, c) < 1e-12
                || dist2(b, d) < 1e-12;
            if share {
                continue;
            }
            let d1 = cross2(sub2(b, a), sub2(c, a));
            let d2 = cross2(sub2(b, a), sub2(d, a));
            let d3 = cross2(sub2(d, c), sub2(a, c));
            let d4 = cross2(sub2(d, c), sub2(b, c));
            if d1 * d2 < -1e-24 && d3 * d4 < -1e-24 {
                return false;
            }
        }
    }
    true
}
