//! Solid kernel: places sketch planes in space, extrudes profiles into
//! closed triangle meshes, combines solids with CSG booleans, and executes
//! whole command sequences.

mod bsp;
mod obj;

pub use obj::{read_obj, write_obj};

use crate::cmdseq::{BooleanKind, CadSequence};
use crate::geom::{add3, cross3, dot3, norm3, scale3, sub3, Aabb, Vec2, Vec3};
use crate::sketch2d::{assemble_profile, triangulate_indices, PolygonWithHoles, SketchError};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("NonPositiveScale: s = {0}")]
    NonPositiveScale(f64),
    #[error("EmptyExtent: extrusion travel resolves to zero")]
    EmptyExtent,
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("OpenInputMesh: enclosure defect {defect:.3e} exceeds tolerance {tolerance:.3e}")]
    OpenInputMesh { defect: f64, tolerance: f64 },
    #[error("EmptyMesh")]
    EmptyMesh,
    #[error("EmptyResult: executed sequence produced no faces")]
    EmptyResult,
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<KernelError>,
    },
    #[error("ObjParse: line {line}: {msg}")]
    ObjParse { line: usize, msg: String },
}

fn at_step(step: usize, e: KernelError) -> KernelError {
    KernelError::Step {
        step,
        source: Box::new(e),
    }
}

/// Indexed triangle mesh. Faces wind counterclockwise seen from outside, so
/// the winding-derived normal of a closed solid points outward.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn empty() -> TriMesh {
        TriMesh::default()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_points(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Cross product (v1-v0)x(v2-v0); twice the area vector of face `f`.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_points(f);
        cross3(sub3(b, a), sub3(c, a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        norm3(self.face_cross(f)) / 2.0
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let c = self.face_cross(f);
        let n = norm3(c);
        if n <= 0.0 {
            [0.0, 0.0, 0.0]
        } else {
            scale3(c, 1.0 / n)
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).fold(0.0, |acc, f| acc + self.face_area(f))
    }

    /// Sum of signed tetrahedron volumes; the enclosed volume for a closed,
    /// outward-oriented mesh.
    pub fn signed_volume(&self) -> f64 {
        self.faces.iter().fold(0.0, |acc, &[a, b, c]| {
            let va = self.vertices[a as usize];
            let vb = self.vertices[b as usize];
            let vc = self.vertices[c as usize];
            acc + dot3(va, cross3(vb, vc)) / 6.0
        })
    }

    pub fn bounding_box(&self) -> Result<Aabb, KernelError> {
        if self.vertices.is_empty() {
            return Err(KernelError::EmptyMesh);
        }
        Ok(Aabb::from_points(self.vertices.iter()).unwrap())
    }

    /// Plain (uncompensated) flux of the constant field (1,1,1); the kernel's
    /// internal closedness check for boolean inputs.
    pub fn enclosure_defect(&self) -> f64 {
        let sum: f64 = (0..self.faces.len())
            .map(|f| {
                let c = self.face_cross(f);
                (c[0] + c[1] + c[2]) / 2.0
            })
            .sum();
        sum.abs()
    }

    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Merges vertices within `tol` of each other and drops faces that collapse.
/// Vertex order (first occurrence) and face order are preserved, so the
/// result is deterministic.
pub fn weld_vertices(mesh: &TriMesh, tol: f64) -> TriMesh {
    let inv = 1.0 / tol.max(1e-300);
    let cell = |v: Vec3| -> [i64; 3] {
        [
            (v[0] * inv).round() as i64,
            (v[1] * inv).round() as i64,
            (v[2] * inv).round() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    let mut remap = Vec::with_capacity(mesh.vertices.len());
    let mut vertices: Vec<Vec3> = Vec::new();
    let tol_sq = tol * tol;
    for &v in &mesh.vertices {
        let base = cell(v);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let key = [base[0] + dx, base[1] + dy, base[2] + dz];
                    if let Some(ids) = grid.get(&key) {
                        for &id in ids {
                            if crate::geom::dist3_sq(vertices[id as usize], v) <= tol_sq {
                                found = Some(id);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let id = match found {
            Some(id) => id,
            None => {
                let id = vertices.len() as u32;
                vertices.push(v);
                grid.entry(base).or_default().push(id);
                id
            }
        };
        remap.push(id);
    }
    let mut out = TriMesh {
        vertices,
        faces: Vec::with_capacity(mesh.faces.len()),
    };
    for &[a, b, c] in &mesh.faces {
        let f = [
            remap[a as usize],
            remap[b as usize],
            remap[c as usize],
        ];
        if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
            continue;
        }
        out.faces.push(f);
    }
    // drop zero-area faces left over after merging
    let keep: Vec<[u32; 3]> = out
        .faces
        .iter()
        .copied()
        .filter(|&[a, b, c]| {
            let va = out.vertices[a as usize];
            let vb = out.vertices[b as usize];
            let vc = out.vertices[c as usize];
            norm3(cross3(sub3(vb, va), sub3(vc, va))) / 2.0 > 1e-12
        })
        .collect();
    out.faces = keep;
    out
}

/// Splits face edges at vertices lying in their interior, so faces meeting
/// across a partially split seam pair up edge for edge. Uses only existing
/// vertices; face order is preserved and splits are deterministic.
pub fn resolve_t_junctions(mesh: &TriMesh, tol: f64) -> TriMesh {
    use std::collections::VecDeque;
    let vertices = mesh.vertices.clone();
    let tol_sq = tol * tol;

    let mut queue: VecDeque<[u32; 3]> = mesh.faces.iter().copied().collect();
    let mut out_faces = Vec::with_capacity(mesh.faces.len());

    'faces: while let Some(face) = queue.pop_front() {
        for e in 0..3 {
            let a = face[e];
            let b = face[(e + 1) % 3];
            let c = face[(e + 2) % 3];
            let pa = vertices[a as usize];
            let pb = vertices[b as usize];
            let ab = sub3(pb, pa);
            let len_sq = dot3(ab, ab);
            if len_sq <= tol_sq {
                continue;
            }
            // earliest interior vertex along the edge, if any
            let mut best: Option<(f64, u32)> = None;
            let lo = [
                pa[0].min(pb[0]) - tol,
                pa[1].min(pb[1]) - tol,
                pa[2].min(pb[2]) - tol,
            ];
            let hi = [
                pa[0].max(pb[0]) + tol,
                pa[1].max(pb[1]) + tol,
                pa[2].max(pb[2]) + tol,
            ];
            for (vi, &v) in vertices.iter().enumerate() {
                let vi = vi as u32;
                if vi == a || vi == b || vi == c {
                    continue;
                }
                if v[0] < lo[0] || v[0] > hi[0] || v[1] < lo[1] || v[1] > hi[1]
                    || v[2] < lo[2] || v[2] > hi[2]
                {
                    continue;
                }
                let t = dot3(sub3(v, pa), ab) / len_sq;
                if t * len_sq.sqrt() <= tol || (1.0 - t) * len_sq.sqrt() <= tol {
                    continue;
                }
                let on_edge = add3(pa, scale3(ab, t));
                if crate::geom::dist3_sq(v, on_edge) <= tol_sq {
                    match best {
                        Some((bt, _)) if bt <= t => {}
                        _ => best = Some((t, vi)),
                    }
                }
            }
            if let Some((_, v)) = best {
                queue.push_front([v, b, c]);
                queue.push_front([a, v, c]);
                continue 'faces;
            }
        }
        out_faces.push(face);
    }

    TriMesh {
        vertices,
        faces: out_faces,
    }
}

/// A placed sketch plane: rotation from Z-Y-Z intrinsic Euler angles, a world
/// origin, and an isotropic sketch scale. Sketch point (u, v) at height w
/// maps to `origin + s*(u*x_axis + v*y_axis) + w*z_axis`; the extrusion
/// direction is `z_axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFrame {
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    pub z_axis: Vec3,
    pub origin: Vec3,
    pub scale: f64,
}

impl PlaneFrame {
    pub fn new(
        theta: f64,
        phi: f64,
        gamma: f64,
        origin: Vec3,
        scale: f64,
    ) -> Result<PlaneFrame, KernelError> {
        if scale <= 0.0 {
            return Err(KernelError::NonPositiveScale(scale));
        }
        // R = Rz(theta) * Ry(phi) * Rz(gamma)
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let (sg, cg) = gamma.sin_cos();
        let x_axis = [
            ct * cp * cg - st * sg,
            st * cp * cg + ct * sg,
            -sp * cg,
        ];
        let y_axis = [
            -ct * cp * sg - st * cg,
            -st * cp * sg + ct * cg,
            sp * sg,
        ];
        let z_axis = [ct * sp, st * sp, cp];
        Ok(PlaneFrame {
            x_axis,
            y_axis,
            z_axis,
            origin,
            scale,
        })
    }

    pub fn to_world(&self, p: Vec2, w: f64) -> Vec3 {
        add3(
            add3(
                self.origin,
                add3(
                    scale3(self.x_axis, self.scale * p[0]),
                    scale3(self.y_axis, self.scale * p[1]),
                ),
            ),
            scale3(self.z_axis, w),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    Join,
    Intersect,
    Cut,
}

struct MeshBuilder {
    mesh: TriMesh,
    index: HashMap<[u64; 3], u32>,
}

impl MeshBuilder {
    fn new() -> MeshBuilder {
        MeshBuilder {
            mesh: TriMesh::empty(),
            index: HashMap::new(),
        }
    }

    fn add_vertex(&mut self, v: Vec3) -> u32 {
        // normalize -0.0 so bitwise keys agree
        let v = [v[0] + 0.0, v[1] + 0.0, v[2] + 0.0];
        let key = [v[0].to_bits(), v[1].to_bits(), v[2].to_bits()];
        *self.index.entry(key).or_insert_with(|| {
            self.mesh.vertices.push(v);
            (self.mesh.vertices.len() - 1) as u32
        })
    }

    fn add_face(&mut self, a: u32, b: u32, c: u32) {
        if a != b && b != c && a != c {
            self.mesh.faces.push([a, b, c]);
        }
    }
}

/// Extrudes regions along the frame normal over the resolved extent interval
/// into one closed, outward-oriented mesh: two triangulated caps per region
/// plus two wall triangles per boundary segment. Cap and wall vertices share
/// bitwise-identical coordinates, so the result welds into a watertight
/// surface by construction.
pub fn extrude_profile(
    regions: &[PolygonWithHoles],
    frame: &PlaneFrame,
    extent_pos: f64,
    extent_neg: f64,
    kind: crate::cmdseq::ExtentKind,
) -> Result<TriMesh, KernelError> {
    let (z0, z1) = match kind {
        crate::cmdseq::ExtentKind::OneSided => (0.0, extent_pos),
        crate::cmdseq::ExtentKind::Symmetric => (-extent_pos / 2.0, extent_pos / 2.0),
        crate::cmdseq::ExtentKind::TwoSided => (-extent_neg, extent_pos),
    };
    if z1 - z0 <= 1e-12 {
        return Err(KernelError::EmptyExtent);
    }
    if regions.is_empty() {
        return Err(KernelError::Sketch(SketchError::DegenerateRegion(
            "no regions to extrude".into(),
        )));
    }

    let mut builder = MeshBuilder::new();
    for region in regions {
        let pts = region.all_points();
        let holes = region.hole_starts();
        let tris = triangulate_indices(&pts, &holes)?;

        let bottom: Vec<u32> = pts
            .iter()
            .map(|&p| builder.add_vertex(frame.to_world(p, z0)))
            .collect();
        let top: Vec<u32> = pts
            .iter()
            .map(|&p| builder.add_vertex(frame.to_world(p, z1)))
            .collect();

        for &[a, b, c] in &tris {
            builder.add_face(top[a], top[b], top[c]);
            builder.add_face(bottom[c], bottom[b], bottom[a]);
        }

        let mut ring_bounds = vec![(0, holes.first().copied().unwrap_or(pts.len()))];
        for (k, &start) in holes.iter().enumerate() {
            let end = holes.get(k + 1).copied().unwrap_or(pts.len());
            ring_bounds.push((start, end));
        }
        for (start, end) in ring_bounds {
            for i in start..end {
                let j = if i + 1 == end { start } else { i + 1 };
                builder.add_face(bottom[i], bottom[j], top[j]);
                builder.add_face(bottom[i], top[j], top[i]);
            }
        }
    }
    Ok(builder.mesh)
}

/// CSG boolean over closed, outward-oriented meshes. The empty mesh is the
/// identity of `Join`, absorbs `Intersect`, and is inert under `Cut`.
pub fn boolean_op(a: &TriMesh, b: &TriMesh, op: BoolOp) -> Result<TriMesh, KernelError> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(TriMesh::empty()),
        (true, false) => {
            return Ok(match op {
                BoolOp::Join => b.clone(),
                BoolOp::Intersect | BoolOp::Cut => TriMesh::empty(),
            })
        }
        (false, true) => {
            return Ok(match op {
                BoolOp::Join | BoolOp::Cut => a.clone(),
                BoolOp::Intersect => TriMesh::empty(),
            })
        }
        (false, false) => {}
    }
    check_closed(a)?;
    check_closed(b)?;
    let result = match op {
        BoolOp::Join => bsp::union(a, b),
        BoolOp::Intersect => bsp::intersect(a, b),
        BoolOp::Cut => bsp::subtract(a, b),
    };
    let welded = resolve_t_junctions(&weld_vertices(&result, 1e-9), 1e-9);
    if welded.signed_volume().abs() < 1e-12 {
        return Ok(TriMesh::empty());
    }
    Ok(welded)
}

fn check_closed(m: &TriMesh) -> Result<(), KernelError> {
    let tolerance = 1e-9 * m.total_area().max(1e-12);
    let defect = m.enclosure_defect();
    if defect > tolerance {
        return Err(KernelError::OpenInputMesh { defect, tolerance });
    }
    Ok(())
}

/// Assembles one step's profile on its plane and extrudes it; the per-step
/// building block of `execute_sequence`.
pub fn extrude_step(step: &crate::cmdseq::Step, n_arc: usize) -> Result<TriMesh, KernelError> {
    let regions = assemble_profile(&step.profile, n_arc)?;
    let e = &step.extrude;
    let frame = PlaneFrame::new(e.theta, e.phi, e.gamma, e.origin, e.scale)?;
    extrude_profile(&regions, &frame, e.extent_pos, e.extent_neg, e.extent)
}

/// Executes a sequence as a left fold: the first step opens the solid and
/// each later step extrudes its profile and merges, intersects, or subtracts
/// it. Fails with the step index attached and `EmptyResult` if nothing is
/// left at the end.
pub fn execute_sequence(seq: &CadSequence, n_arc: usize) -> Result<TriMesh, KernelError> {
    let mut solid: Option<TriMesh> = None;
    for (i, step) in seq.steps.iter().enumerate() {
        let e = &step.extrude;
        let part = extrude_step(step, n_arc).map_err(|err| at_step(i, err))?;
        solid = Some(match solid {
            None => {
                if e.boolean != BooleanKind::NewBody {
                    log::warn!("step {i}: first extrusion with boolean {:?} coerced to a new body", e.boolean);
                }
                part
            }
            Some(acc) => {
                let op = match e.boolean {
                    BooleanKind::Join => BoolOp::Join,
                    BooleanKind::Intersect => BoolOp::Intersect,
                    BooleanKind::Cut => BoolOp::Cut,
                    BooleanKind::NewBody => {
                        log::warn!("step {i}: mid-sequence new body treated as join");
                        BoolOp::Join
                    }
                };
                boolean_op(&acc, &part, op).map_err(|err| at_step(i, err))?
            }
        });
    }
    match solid {
        Some(m) if !m.is_empty() => Ok(m),
        _ => Err(KernelError::EmptyResult),
    }
}

/// Axis-aligned box as a 12-face mesh, outward-oriented.
pub fn box_mesh(min: Vec3, max: Vec3) -> TriMesh {
    let v = [
        [min[0], min[1], min[2]],
        [max[0], min[1], min[2]],
        [max[0], max[1], min[2]],
        [min[0], max[1], min[2]],
        [min[0], min[1], max[2]],
        [max[0], min[1], max[2]],
        [max[0], max[1], max[2]],
        [min[0], max[1], max[2]],
    ];
    let quads: [[usize; 4]; 6] = [
        [0, 3, 2, 1], // bottom (-z)
        [4, 5, 6, 7], // top (+z)
        [0, 1, 5, 4], // -y
        [2, 3, 7, 6], // +y
        [1, 2, 6, 5], // +x
        [3, 0, 4, 7], // -x
    ];
    let mut mesh = TriMesh {
        vertices: v.to_vec(),
        faces: Vec::with_capacity(12),
    };
    for q in quads {
        mesh.faces.push([q[0] as u32, q[1] as u32, q[2] as u32]);
        mesh.faces.push([q[0] as u32, q[2] as u32, q[3] as u32]);
    }
    mesh
}
