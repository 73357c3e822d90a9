//! Dataset construction mechanics: prefix augmentation, leakage-safe splits,
//! point-cloud export, robustness perturbations, fixed camera poses, and
//! caption-request preparation with a pluggable captioning client.

mod captions;

pub use captions::{
    build_caption_request, caption_with_client, CaptionRequest, CaptioningClient, ClientError,
    StubCaptionClient, CAPTION_PREFIX, CAPTION_PROMPT,
};

use crate::cmdseq::CadSequence;
use crate::geom::Vec3;
use crate::recon_metrics::{sample_surface, PointCloud, ReconError};
use crate::solid_kernel::{execute_sequence, KernelError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("AugmentedInputToSplit: record {0} is not a pre-augmentation root")]
    AugmentedInputToSplit(String),
    #[error("NegativeSigma: {0}")]
    NegativeSigma(f64),
    #[error("FractionOutOfRange: {0} (need 0 <= f < 1)")]
    FractionOutOfRange(f64),
    #[error("TooFewViews: {available} available, 4 required")]
    TooFewViews { available: usize },
    #[error("ClientUnavailable after {attempts} attempt(s): {last}")]
    ClientUnavailable { attempts: u32, last: String },
    #[error("PrefixViolation: caption {0:?} does not start with the required prefix")]
    PrefixViolation(String),
    #[error("ConfigParse: line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error("ManifestParse: line {line}: {msg}")]
    ManifestParse { line: usize, msg: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Recon(#[from] ReconError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unassigned,
}

/// One dataset entry; augmented records keep their pre-augmentation
/// ancestor in `root_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub sequence: CadSequence,
    pub root_id: String,
    pub split: Split,
}

impl DatasetRecord {
    pub fn root(id: impl Into<String>, sequence: CadSequence) -> DatasetRecord {
        let id = id.into();
        DatasetRecord {
            root_id: id.clone(),
            id,
            sequence,
            split: Split::Unassigned,
        }
    }
}

/// Manifest line: JSON-lines with the sequence stored at `path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub root_id: String,
    pub split: Split,
    pub path: String,
}

pub fn write_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
        out.push('\n');
    }
    out
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestEntry>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(ln, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::ManifestParse {
                line: ln + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Expands a k-step design into its k prefixes: the i-th sequence keeps
/// steps 1..=i and the k-th is the design itself.
pub fn augment_prefixes(seq: &CadSequence) -> Vec<CadSequence> {
    (1..=seq.steps.len())
        .map(|i| CadSequence::new(seq.steps[..i].to_vec()))
        .collect()
}

/// Assigns train/test splits to pre-augmentation roots by a seeded shuffle:
/// the first floor(ratio * N) records train, the rest test. Augmentation
/// happens after this, on the training side only.
pub fn split_dataset(
    mut records: Vec<DatasetRecord>,
    ratio: f64,
    seed: u64,
) -> Result<Vec<DatasetRecord>, PipelineError> {
    for r in &records {
        if r.id != r.root_id {
            return Err(PipelineError::AugmentedInputToSplit(r.id.clone()));
        }
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = (ratio * records.len() as f64).floor() as usize;
    for (rank, &idx) in order.iter().enumerate() {
        records[idx].split = if rank < n_train {
            Split::Train
        } else {
            Split::Test
        };
    }
    Ok(records)
}

/// Replaces every training record by its prefix expansions; test records
/// pass through untouched, so no test root ever leaks into training.
pub fn augment_train_records(records: &[DatasetRecord]) -> Vec<DatasetRecord> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if r.split != Split::Train {
            out.push(r.clone());
            continue;
        }
        let prefixes = augment_prefixes(&r.sequence);
        let k = prefixes.len();
        for (i, sequence) in prefixes.into_iter().enumerate() {
            let id = if i + 1 == k {
                r.id.clone()
            } else {
                format!("{}#p{}", r.id, i + 1)
            };
            out.push(DatasetRecord {
                id,
                sequence,
                root_id: r.root_id.clone(),
                split: Split::Train,
            });
        }
    }
    out
}

/// Executes a sequence and samples its surface; deterministic per seed.
pub fn export_point_cloud(
    seq: &CadSequence,
    n: usize,
    seed: u64,
    n_arc: usize,
) -> Result<PointCloud, PipelineError> {
    let mesh = execute_sequence(seq, n_arc)?;
    Ok(sample_surface(&mesh, n, seed)?)
}

/// Adds an independent zero-mean Gaussian offset per point per axis;
/// normals are unchanged.
pub fn perturb_points(
    pc: &PointCloud,
    sigma: f64,
    seed: u64,
) -> Result<PointCloud, PipelineError> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(PipelineError::NegativeSigma(sigma));
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated non-negative");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = pc
        .points
        .iter()
        .map(|&p| {
            [
                p[0] + normal.sample(&mut rng),
                p[1] + normal.sample(&mut rng),
                p[2] + normal.sample(&mut rng),
            ]
        })
        .collect();
    Ok(PointCloud {
        points,
        normals: pc.normals.clone(),
    })
}

/// Keeps a uniformly random subset of ceil((1 - f) * N) points in their
/// original order.
pub fn decimate_points(
    pc: &PointCloud,
    fraction_removed: f64,
    seed: u64,
) -> Result<PointCloud, PipelineError> {
    if !(0.0..1.0).contains(&fraction_removed) {
        return Err(PipelineError::FractionOutOfRange(fraction_removed));
    }
    let n = pc.len();
    // nudge below the ceiling so representation noise in (1 - f) * n cannot
    // push an exact count like 0.05 * 10000 = 500 up to 501
    let keep = (((1.0 - fraction_removed) * n as f64 - 1e-9).ceil() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, n, keep).into_vec();
    chosen.sort_unstable();
    Ok(PointCloud {
        points: chosen.iter().map(|&i| pc.points[i]).collect(),
        normals: chosen.iter().map(|&i| pc.normals[i]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
}

/// Circumradius of the fixed camera rig in normalized-model units.
pub const CAMERA_RADIUS: f64 = 2.5;

/// Eight fixed viewpoints at the corners of a cube of circumradius 2.5
/// centered on the model, all looking at the origin with +Z up. Corners are
/// never axis-aligned with the up vector, so the rig has no degenerate pose.
pub fn camera_poses() -> [CameraPose; 8] {
    let d = CAMERA_RADIUS / 3.0_f64.sqrt();
    std::array::from_fn(|i| {
        let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
        let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
        let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
        CameraPose {
            position: [sx * d, sy * d, sz * d],
            look_at: [0.0, 0.0, 0.0],
            up: [0.0, 0.0, 1.0],
        }
    })
}

/// View identifiers matching `camera_poses` order.
pub fn default_view_ids() -> Vec<String> {
    (0..8).map(|i| format!("view_{i}")).collect()
}

/// Stable 64-bit FNV-1a, used to derive per-record seeds from a master seed.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn derive_seed(master: u64, id: &str) -> u64 {
    let mut bytes = master.to_le_bytes().to_vec();
    bytes.extend_from_slice(id.as_bytes());
    fnv1a64(&bytes)
}

/// Captioning-client configuration from an INI-style key=value file; the API
/// key may be overridden by the `CADSEQ_CAPTION_API_KEY` environment
/// variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub endpoint: String,
    pub retries: u32,
    pub concurrency: usize,
    pub api_key: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            endpoint: String::new(),
            retries: 3,
            concurrency: 4,
            api_key: None,
        }
    }
}

pub const API_KEY_ENV: &str = "CADSEQ_CAPTION_API_KEY";

impl PipelineConfig {
    pub fn from_str(text: &str) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = PipelineConfig::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(PipelineError::ConfigParse {
                    line: ln + 1,
                    msg: "expected key=value".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |msg: &str| PipelineError::ConfigParse {
                line: ln + 1,
                msg: msg.into(),
            };
            match key {
                "endpoint" => cfg.endpoint = value.to_string(),
                "retries" => cfg.retries = value.parse().map_err(|_| bad("bad retries"))?,
                "concurrency" => {
                    cfg.concurrency = value.parse().map_err(|_| bad("bad concurrency"))?
                }
                "api_key" => cfg.api_key = Some(value.to_string()),
                _ => return Err(bad(&format!("unknown key {key:?}"))),
            }
        }
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            cfg.api_key = Some(key);
        }
        Ok(cfg)
    }
}
