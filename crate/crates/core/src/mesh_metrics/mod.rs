//! Topology and enclosure quality metrics for triangle meshes: connected
//! segment counting, dangling-edge length, self-intersection ratio, and the
//! flux enclosure error of the constant field (1, 1, 1).

mod sir;

pub use sir::{self_intersecting_faces, self_intersecting_faces_brute, self_intersection_ratio,
    self_intersection_ratio_brute, EPS_INT};

use crate::geom::dist3;
use crate::solid_kernel::TriMesh;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("InvalidFaceIndex: face {face} references vertex {index} of {count}")]
    InvalidFaceIndex { face: usize, index: u32, count: usize },
    #[error("EmptyGroundTruth: ground-truth mesh has no segments")]
    EmptyGroundTruth,
    #[error("EmptyMesh")]
    EmptyMesh,
}

/// One directed edge record per (face, edge) incidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfEdge {
    pub tail: u32,
    pub head: u32,
    pub face: u32,
}

/// Half-edge table plus the undirected-edge -> face-incidence map the
/// topology metrics read.
#[derive(Debug, Clone)]
pub struct HalfEdgeIndex {
    pub half_edges: Vec<HalfEdge>,
    pub edge_incidence: BTreeMap<(u32, u32), u32>,
}

impl HalfEdgeIndex {
    /// Undirected edges seen by exactly one face.
    pub fn dangling_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edge_incidence
            .iter()
            .filter(|&(_, &count)| count == 1)
            .map(|(&edge, _)| edge)
    }

    /// Undirected edges seen by three or more faces (non-manifold, but not
    /// dangling).
    pub fn non_manifold_edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edge_incidence
            .iter()
            .filter(|&(_, &count)| count >= 3)
            .map(|(&edge, _)| edge)
    }
}

/// Walks every face and records its three half-edges plus undirected
/// incidence counts.
pub fn build_half_edge(mesh: &TriMesh) -> Result<HalfEdgeIndex, MetricsError> {
    let count = mesh.vertices.len();
    let mut half_edges = Vec::with_capacity(mesh.faces.len() * 3);
    let mut edge_incidence: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for (fi, &[a, b, c]) in mesh.faces.iter().enumerate() {
        for &v in &[a, b, c] {
            if v as usize >= count {
                return Err(MetricsError::InvalidFaceIndex {
                    face: fi,
                    index: v,
                    count,
                });
            }
        }
        for (tail, head) in [(a, b), (b, c), (c, a)] {
            half_edges.push(HalfEdge {
                tail,
                head,
                face: fi as u32,
            });
            let key = (tail.min(head), tail.max(head));
            *edge_incidence.entry(key).or_insert(0) += 1;
        }
    }
    Ok(HalfEdgeIndex {
        half_edges,
        edge_incidence,
    })
}

/// Number of connected components of the vertex graph whose edges are mesh
/// edges; unreferenced vertices are ignored. Zero for an empty mesh.
pub fn segment_count(mesh: &TriMesh) -> usize {
    let n = mesh.vertices.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut referenced = vec![false; n];

    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }

    for &[a, b, c] in &mesh.faces {
        for &v in &[a, b, c] {
            referenced[v as usize] = true;
        }
        for (x, y) in [(a, b), (b, c)] {
            let rx = find(&mut parent, x);
            let ry = find(&mut parent, y);
            if rx != ry {
                parent[rx as usize] = ry;
            }
        }
    }
    (0..n as u32)
        .filter(|&i| referenced[i as usize] && find(&mut parent, i) == i)
        .count()
}

/// Relative segment-count error of a generated mesh against ground truth:
/// |S(gen) - S(gt)| / S(gt).
pub fn seg_error(gt: &TriMesh, gen: &TriMesh) -> Result<f64, MetricsError> {
    let s_gt = segment_count(gt);
    if s_gt == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    let s_gen = segment_count(gen);
    Ok((s_gen as f64 - s_gt as f64).abs() / s_gt as f64)
}

/// Total length of edges bounded by exactly one face. Edges with three or
/// more incident faces are non-manifold but not dangling and do not count.
pub fn dangling_edge_length(mesh: &TriMesh) -> f64 {
    let index = match build_half_edge(mesh) {
        Ok(index) => index,
        Err(_) => return 0.0,
    };
    index
        .dangling_edges()
        .map(|(a, b)| dist3(mesh.vertices[a as usize], mesh.vertices[b as usize]))
        .fold(0.0, |acc, len| acc + len)
}

struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn new() -> KahanSum {
        KahanSum { sum: 0.0, comp: 0.0 }
    }

    fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Magnitude of the discrete flux of the constant field (1, 1, 1) through the
/// mesh: |sum_i (n_x + n_y + n_z) dS_i| with winding-derived unit normals.
/// Zero (to rounding) for closed, consistently oriented surfaces. Compensated
/// summation keeps cancellation error below 1e-12 of the total area.
pub fn flux_enclosure_error(mesh: &TriMesh) -> f64 {
    let mut acc = KahanSum::new();
    for f in 0..mesh.faces.len() {
        // cross = 2 * area * unit normal, so the face term needs no
        // normalization and degenerate faces contribute nothing
        let c = mesh.face_cross(f);
        acc.add((c[0] + c[1] + c[2]) / 2.0);
    }
    acc.sum.abs()
}

/// Bundled topology/enclosure comparison of a generated mesh against ground
/// truth. Values are stored unscaled (ratios in [0, 1], lengths and flux in
/// world units); report writers apply table scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoReport {
    pub segments: usize,
    pub seg_error: f64,
    pub dangel: f64,
    pub sir: f64,
    pub fluxee: f64,
}

/// An empty generated mesh is reported as total segment error with zero
/// dangling length, intersections, and flux, so batch tables stay defined.
pub fn topo_report(gt: &TriMesh, gen: &TriMesh) -> Result<TopoReport, MetricsError> {
    let s_gt = segment_count(gt);
    if s_gt == 0 {
        return Err(MetricsError::EmptyGroundTruth);
    }
    if gen.is_empty() {
        return Ok(TopoReport {
            segments: 0,
            seg_error: 1.0,
            dangel: 0.0,
            sir: 0.0,
            fluxee: 0.0,
        });
    }
    Ok(TopoReport {
        segments: segment_count(gen),
        seg_error: seg_error(gt, gen)?,
        dangel: dangling_edge_length(gen),
        sir: self_intersection_ratio(gen)?,
        fluxee: flux_enclosure_error(gen),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solid_kernel::box_mesh;

    fn lone_triangle() -> TriMesh {
        TriMesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            faces: vec![[0, 1, 2]],
        }
    }

    fn two_cubes() -> TriMesh {
        let a = box_mesh([0.0; 3], [1.0, 1.0, 1.0]);
        let b = box_mesh([3.0, 0.0, 0.0], [4.0, 1.0, 1.0]);
        let mut m = a.clone();
        let off = m.vertices.len() as u32;
        m.vertices.extend_from_slice(&b.vertices);
        m.faces
            .extend(b.faces.iter().map(|&[x, y, z]| [x + off, y + off, z + off]));
        m
    }

    #[test]
    fn cube_half_edge_counts() {
        let cube = box_mesh([0.0; 3], [1.0, 1.0, 1.0]);
        let index = build_half_edge(&cube).unwrap();
        assert_eq!(index.half_edges.len(), 36);
        assert_eq!(index.edge_incidence.len(), 18);
        assert!(index.edge_incidence.values().all(|&c| c == 2));
        assert_eq!(index.dangling_edges().count(), 0);
    }

    #[test]
    fn lone_triangle_has_three_boundary_edges() {
        let index = build_half_edge(&lone_triangle()).unwrap();
        assert_eq!(index.edge_incidence.len(), 3);
        assert!(index.edge_incidence.values().all(|&c| c == 1));
    }

    #[test]
    fn triple_edge_is_non_manifold_not_dangling() {
        // three triangles fanning around one shared edge
        let m = TriMesh {
            vertices: vec![
                [0.0, 0.0, 0.0],
                [0.0, 0.0, 1.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [-1.0, 0.0, 0.5],
            ],
            faces: vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]],
        };
        let index = build_half_edge(&m).unwrap();
        assert_eq!(index.edge_incidence[&(0, 1)], 3);
        assert_eq!(index.non_manifold_edges().count(), 1);
        // shared edge contributes nothing to the dangling length
        let dangling: Vec<_> = index.dangling_edges().collect();
        assert!(!dangling.contains(&(0, 1)));
    }

    #[test]
    fn out_of_range_face_index_rejected() {
        let mut m = lone_triangle();
        m.faces.push([0, 1, 9]);
        assert!(matches!(
            build_half_edge(&m),
            Err(MetricsError::InvalidFaceIndex { face: 1, index: 9, .. })
        ));
    }

    #[test]
    fn segment_counts() {
        assert_eq!(segment_count(&TriMesh::empty()), 0);
        assert_eq!(segment_count(&box_mesh([0.0; 3], [1.0; 3])), 1);
        assert_eq!(segment_count(&two_cubes()), 2);
    }

    #[test]
    fn unreferenced_vertices_ignored() {
        let mut m = box_mesh([0.0; 3], [1.0; 3]);
        m.vertices.push([9.0, 9.0, 9.0]);
        assert_eq!(segment_count(&m), 1);
    }

    #[test]
    fn union_find_matches_bfs_oracle_on_fuzzed_soups() {
        use rand::{Rng, SeedableRng};
        use std::collections::VecDeque;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let nv = rng.gen_range(3..40);
            let nf = rng.gen_range(1..60);
            let mut m = TriMesh {
                vertices: (0..nv)
                    .map(|_| {
                        [
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                        ]
                    })
                    .collect(),
                faces: Vec::new(),
            };
            for _ in 0..nf {
                let f = [
                    rng.gen_range(0..nv as u32),
                    rng.gen_range(0..nv as u32),
                    rng.gen_range(0..nv as u32),
                ];
                m.faces.push(f);
            }

            // breadth-first-search oracle over the same vertex graph
            let mut adj = vec![Vec::new(); nv];
            let mut referenced = vec![false; nv];
            for &[a, b, c] in &m.faces {
                for (x, y) in [(a, b), (b, c), (c, a)] {
                    adj[x as usize].push(y as usize);
                    adj[y as usize].push(x as usize);
                }
                for &v in &[a, b, c] {
                    referenced[v as usize] = true;
                }
            }
            let mut seen = vec![false; nv];
            let mut components = 0;
            for start in 0..nv {
                if !referenced[start] || seen[start] {
                    continue;
                }
                components += 1;
                let mut queue = VecDeque::from([start]);
                seen[start] = true;
                while let Some(v) = queue.pop_front() {
                    for &w in &adj[v] {
                        if !seen[w] {
                            seen[w] = true;
                            queue.push_back(w);
                        }
                    }
                }
            }
            assert_eq!(segment_count(&m), components);
        }
    }

    #[test]
    fn seg_error_arithmetic() {
        let one = box_mesh([0.0; 3], [1.0; 3]);
        let two = two_cubes();
        assert_eq!(seg_error(&two, &two).unwrap(), 0.0);
        assert_eq!(seg_error(&two, &one).unwrap(), 0.5);
        assert_eq!(seg_error(&one, &two).unwrap(), 1.0);
        assert!(matches!(
            seg_error(&TriMesh::empty(), &one),
            Err(MetricsError::EmptyGroundTruth)
        ));
    }

    #[test]
    fn closed_cube_has_no_dangling_length() {
        assert_eq!(dangling_edge_length(&box_mesh([0.0; 3], [1.0; 3])), 0.0);
    }

    #[test]
    fn lone_right_triangle_dangling_length_is_perimeter() {
        let expected = 2.0 + std::f64::consts::SQRT_2;
        assert!((dangling_edge_length(&lone_triangle()) - expected).abs() < 1e-12);
    }

    #[test]
    fn cube_with_missing_face_dangles_around_the_hole() {
        let mut m = box_mesh([0.0; 3], [1.0; 3]);
        // remove the two triangles of the +z face; the shared diagonal
        // vanishes with them, leaving the four unit boundary edges
        m.faces.retain(|&f| {
            let pts = [
                m.vertices[f[0] as usize],
                m.vertices[f[1] as usize],
                m.vertices[f[2] as usize],
            ];
            !pts.iter().all(|p| p[2] == 1.0)
        });
        assert_eq!(m.faces.len(), 10);
        assert!((dangling_edge_length(&m) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn closed_cube_flux_vanishes() {
        let m = box_mesh([0.0; 3], [1.0; 3]);
        assert!(flux_enclosure_error(&m) <= 1e-12 * m.total_area());
    }

    #[test]
    fn lone_triangle_flux_is_half() {
        assert!((flux_enclosure_error(&lone_triangle()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn flipping_one_cube_face_adds_twice_its_term() {
        let mut m = box_mesh([0.0; 3], [1.0; 3]);
        // +x face quad is split into faces 8 and 9; flip both triangles:
        // the +x contribution (nx+ny+nz)*area = 1 flips to -1
        m.faces[8].swap(1, 2);
        m.faces[9].swap(1, 2);
        assert!((flux_enclosure_error(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flux_is_winding_sensitive_on_fuzzed_faces() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let m = box_mesh([-0.3, 0.1, 0.2], [0.9, 1.3, 0.8]);
        for _ in 0..20 {
            let f = rng.gen_range(0..m.faces.len());
            let mut flipped = m.clone();
            flipped.faces[f].swap(1, 2);
            let c = m.face_cross(f);
            let expected = (c[0] + c[1] + c[2]).abs(); // |2 (n.x+n.y+n.z) A|
            assert!((flux_enclosure_error(&flipped) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn metrics_scale_as_documented() {
        let m = {
            let mut m = box_mesh([0.0; 3], [1.0; 3]);
            m.faces.pop();
            m.faces.pop(); // open the +x side: dangling boundary appears
            m
        };
        let s = 2.5;
        let scaled = m.map_vertices(|v| crate::geom::scale3(v, s));
        let d0 = dangling_edge_length(&m);
        let d1 = dangling_edge_length(&scaled);
        assert!(d0 > 0.0);
        assert!((d1 - s * d0).abs() < 1e-9);
        let f0 = flux_enclosure_error(&m);
        let f1 = flux_enclosure_error(&scaled);
        assert!(f0 > 0.0);
        assert!((f1 - s * s * f0).abs() < 1e-9);
    }

    #[test]
    fn report_matches_member_metrics() {
        let gt = box_mesh([0.0; 3], [1.0; 3]);
        let gen = two_cubes();
        let r = topo_report(&gt, &gen).unwrap();
        assert_eq!(r.segments, 2);
        assert_eq!(r.seg_error, 1.0);
        assert_eq!(r.dangel, dangling_edge_length(&gen));
        assert_eq!(r.sir, self_intersection_ratio(&gen).unwrap());
        assert_eq!(r.fluxee, flux_enclosure_error(&gen));
    }

    #[test]
    fn identical_meshes_report_all_zero() {
        let cube = box_mesh([0.0; 3], [1.0; 3]);
        let r = topo_report(&cube, &cube).unwrap();
        assert_eq!(r.segments, 1);
        assert_eq!(r.seg_error, 0.0);
        assert_eq!(r.dangel, 0.0);
        assert_eq!(r.sir, 0.0);
        assert!(r.fluxee <= 1e-12 * cube.total_area());
    }

    #[test]
    fn empty_generated_mesh_reports_total_error() {
        let gt = box_mesh([0.0; 3], [1.0; 3]);
        let r = topo_report(&gt, &TriMesh::empty()).unwrap();
        assert_eq!(r.segments, 0);
        assert_eq!(r.seg_error, 1.0);
        assert_eq!(r.dangel, 0.0);
        assert_eq!(r.sir, 0.0);
        assert_eq!(r.fluxee, 0.0);
    }
}
