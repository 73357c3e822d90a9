//! Caption-request preparation and the pluggable captioning client.

use super::PipelineError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Prompt sent with the four selected renders.
pub const CAPTION_PROMPT: &str = "These are the rendering images from 4 views of a CAD model. \
Please describe these images with one caption, and mainly focus on the shape and appearance of \
the foreground while ignoring the details of the background.";

/// Every accepted caption must begin with this.
pub const CAPTION_PREFIX: &str = "Generate a CAD design with ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRequest {
    pub prompt: String,
    pub image_refs: Vec<String>,
    pub required_prefix: String,
}

/// Selects four distinct views deterministically per seed and packages the
/// fixed prompt.
pub fn build_caption_request(
    view_ids: &[String],
    seed: u64,
) -> Result<CaptionRequest, PipelineError> {
    if view_ids.len() < 4 {
        return Err(PipelineError::TooFewViews {
            available: view_ids.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, view_ids.len(), 4).into_vec();
    chosen.sort_unstable();
    Ok(CaptionRequest {
        prompt: CAPTION_PROMPT.to_string(),
        image_refs: chosen.iter().map(|&i| view_ids[i].clone()).collect(),
        required_prefix: CAPTION_PREFIX.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientError {
    Unavailable(String),
    Rejected(String),
}

/// Anything that can turn a caption request into text: an HTTP service in
/// production, a deterministic stub in tests.
pub trait CaptioningClient {
    fn caption(&self, request: &CaptionRequest) -> Result<String, ClientError>;
}

/// Calls the client with retries on unavailability, then enforces the
/// required caption prefix.
pub fn caption_with_client(
    request: &CaptionRequest,
    client: &dyn CaptioningClient,
    retries: u32,
) -> Result<String, PipelineError> {
    let mut last = String::new();
    for _ in 0..=retries {
        match client.caption(request) {
            Ok(caption) => {
                if !caption.starts_with(&request.required_prefix) {
                    return Err(PipelineError::PrefixViolation(caption));
                }
                return Ok(caption);
            }
            Err(ClientError::Unavailable(msg)) => last = msg,
            Err(ClientError::Rejected(msg)) => {
                return Err(PipelineError::ClientUnavailable {
                    attempts: 1,
                    last: msg,
                })
            }
        }
    }
    Err(PipelineError::ClientUnavailable {
        attempts: retries + 1,
        last,
    })
}

/// Offline client producing a deterministic caption from a hash of the
/// request's view list; always carries the required prefix.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubCaptionClient;

const SHAPES: [&'static str; 8] = [
    "a rectangular block",
    "a cylindrical body",
    "an L-shaped bracket",
    "a flat plate",
    "a stepped base",
    "a ring-shaped flange",
    "a slotted bar",
    "a square housing",
];

const FEATURES: [&'static str; 8] = [
    "a circular hole through the center",
    "two bosses on the top face",
    "a rectangular notch on one side",
    "rounded lobes at both ends",
    "a raised rim along the boundary",
    "an off-center cutout",
    "four corner openings",
    "a shallow recess on the front",
];

impl CaptioningClient for StubCaptionClient {
    fn caption(&self, request: &CaptionRequest) -> Result<String, ClientError> {
        let joined = request.image_refs.join(",");
        let h = super::fnv1a64(joined.as_bytes());
        let shape = SHAPES[(h & 7) as usize];
        let feature = FEATURES[((h >> 3) & 7) as usize];
        Ok(format!("{CAPTION_PREFIX}{shape} with {feature}."))
    }
}
