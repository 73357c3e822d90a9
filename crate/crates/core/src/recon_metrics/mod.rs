//! Point-sampled reconstruction metrics: chamfer distance, F-score, and
//! normal consistency, plus area-weighted surface sampling and the shared
//! normalization that maps a ground-truth cloud into the half-unit cube.

mod io;
mod kdtree;

pub use io::{read_ply, read_xyz, write_ply, write_xyz};
pub use kdtree::{nearest_brute, KdTree};

use crate::geom::{dot3, norm3, scale3, sub3, Aabb, Vec3};
use crate::solid_kernel::TriMesh;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReconError {
    #[error("EmptyMesh")]
    EmptyMesh,
    #[error("EmptyCloud")]
    EmptyCloud,
    #[error("DegenerateBbox: extent {0}")]
    DegenerateBbox(f64),
    #[error("MissingNormals: {points} points, {normals} normals")]
    MissingNormals { points: usize, normals: usize },
    #[error("CloudParse: line {line}: {msg}")]
    CloudParse { line: usize, msg: String },
}

/// Surface samples with unit normals taken from the sampled faces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_normals(&self) -> Result<(), ReconError> {
        if self.normals.len() != self.points.len() || self.points.is_empty() {
            return Err(ReconError::MissingNormals {
                points: self.points.len(),
                normals: self.normals.len(),
            });
        }
        Ok(())
    }
}

/// Area-weighted uniform sampling; each sample carries its face's unit
/// normal. Deterministic for a fixed seed.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud, ReconError> {
    if mesh.is_empty() || n == 0 {
        return Err(ReconError::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut faces = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        let area = mesh.face_area(f);
        if area > 1e-30 {
            total += area;
            cdf.push(total);
            faces.push(f);
        }
    }
    if total <= 0.0 {
        return Err(ReconError::EmptyMesh);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud {
        points: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let target = rng.gen::<f64>() * total;
        let k = cdf.partition_point(|&acc| acc <= target).min(faces.len() - 1);
        let f = faces[k];
        let [a, b, c] = mesh.face_points(f);
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let su = r1.sqrt();
        let (wa, wb, wc) = (1.0 - su, su * (1.0 - r2), su * r2);
        cloud.points.push([
            wa * a[0] + wb * b[0] + wc * c[0],
            wa * a[1] + wb * b[1] + wc * c[1],
            wa * a[2] + wb * b[2] + wc * c[2],
        ]);
        cloud.normals.push(mesh.face_normal(f));
    }
    Ok(cloud)
}

/// Computes the isotropic transform that maps the ground-truth cloud's
/// bounding box into [-0.5, 0.5]^3 (largest extent exactly 1) and applies the
/// same transform to both clouds.
pub fn normalize_pair(
    gt: &PointCloud,
    gen: &PointCloud,
) -> Result<(PointCloud, PointCloud), ReconError> {
    if gt.is_empty() {
        return Err(ReconError::EmptyCloud);
    }
    let bbox = Aabb::from_points(gt.points.iter()).unwrap();
    let extent = bbox.max_extent();
    if extent <= 1e-12 {
        return Err(ReconError::DegenerateBbox(extent));
    }
    let center = bbox.center();
    let scale = 1.0 / extent;
    let apply = |cloud: &PointCloud| PointCloud {
        points: cloud
            .points
            .iter()
            .map(|&p| scale3(sub3(p, center), scale))
            .collect(),
        normals: cloud.normals.clone(),
    };
    Ok((apply(gt), apply(gen)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChamferVariant {
    /// Mean bidirectional L2 distance (not squared), averaged with 1/2.
    L2,
    /// Mean bidirectional squared L2 distance, averaged with 1/2.
    SqL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcVariant {
    /// Unoriented: absolute cosine of the normal angle.
    Abs,
    /// Oriented: signed cosine.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnMode {
    Indexed,
    Brute,
}

fn nearest_in(
    points: &[Vec3],
    tree: Option<&KdTree<'_>>,
    q: Vec3,
) -> (u32, f64) {
    match tree {
        Some(tree) => tree.nearest(q).unwrap(),
        None => nearest_brute(points, q).unwrap(),
    }
}

fn directional<F: FnMut(u32, f64, usize)>(
    from: &PointCloud,
    to: &PointCloud,
    mode: NnMode,
    mut visit: F,
) {
    let tree = match mode {
        NnMode::Indexed => Some(KdTree::build(&to.points)),
        NnMode::Brute => None,
    };
    for (qi, &q) in from.points.iter().enumerate() {
        let (idx, d_sq) = nearest_in(&to.points, tree.as_ref(), q);
        visit(idx, d_sq, qi);
    }
}

pub fn chamfer_distance_with(
    p: &PointCloud,
    q: &PointCloud,
    variant: ChamferVariant,
    mode: NnMode,
) -> Result<f64, ReconError> {
    if p.is_empty() || q.is_empty() {
        return Err(ReconError::EmptyCloud);
    }
    let mean_min = |from: &PointCloud, to: &PointCloud| -> f64 {
        let mut sum = 0.0;
        directional(from, to, mode, |_, d_sq, _| {
            sum += match variant {
                ChamferVariant::L2 => d_sq.sqrt(),
                ChamferVariant::SqL2 => d_sq,
            };
        });
        sum / from.len() as f64
    };
    Ok((mean_min(p, q) + mean_min(q, p)) / 2.0)
}

/// Mean bidirectional L2 chamfer distance.
pub fn chamfer_distance(p: &PointCloud, q: &PointCloud) -> Result<f64, ReconError> {
    chamfer_distance_with(p, q, ChamferVariant::L2, NnMode::Indexed)
}

pub fn f_score_with(
    gt: &PointCloud,
    gen: &PointCloud,
    tau: f64,
    mode: NnMode,
) -> Result<f64, ReconError> {
    if gt.is_empty() || gen.is_empty() {
        return Err(ReconError::EmptyCloud);
    }
    let frac_within = |from: &PointCloud, to: &PointCloud| -> f64 {
        let mut hits = 0usize;
        directional(from, to, mode, |_, d_sq, _| {
            if d_sq.sqrt() <= tau {
                hits += 1;
            }
        });
        hits as f64 / from.len() as f64
    };
    let precision = frac_within(gen, gt);
    let recall = frac_within(gt, gen);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// F-score at threshold `tau` (default protocol threshold is 0.05 in the
/// normalized frame).
pub fn f_score(gt: &PointCloud, gen: &PointCloud, tau: f64) -> Result<f64, ReconError> {
    f_score_with(gt, gen, tau, NnMode::Indexed)
}

pub fn normal_consistency_with(
    p: &PointCloud,
    q: &PointCloud,
    variant: NcVariant,
    mode: NnMode,
) -> Result<f64, ReconError> {
    p.check_normals()?;
    q.check_normals()?;
    let mean_cos = |from: &PointCloud, to: &PointCloud| -> f64 {
        let mut sum = 0.0;
        directional(from, to, mode, |idx, _, qi| {
            let a = from.normals[qi];
            let b = to.normals[idx as usize];
            let denom = (norm3(a) * norm3(b)).max(1e-30);
            let cos = dot3(a, b) / denom;
            sum += match variant {
                NcVariant::Abs => cos.abs(),
                NcVariant::Signed => cos,
            };
        });
        sum / from.len() as f64
    };
    Ok((mean_cos(p, q) + mean_cos(q, p)) / 2.0)
}

/// Unoriented normal consistency (mean absolute cosine, both directions).
pub fn normal_consistency(p: &PointCloud, q: &PointCloud) -> Result<f64, ReconError> {
    normal_consistency_with(p, q, NcVariant::Abs, NnMode::Indexed)
}
