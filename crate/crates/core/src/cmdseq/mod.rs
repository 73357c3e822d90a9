//! Data model for sketch-and-extrude command sequences: curves, loops,
//! profiles, extrusions, plus validation and whole-model normalization.
//!
//! A model is an ordered list of steps; each step sketches a closed profile
//! on a placed plane and extrudes it into a solid that is boolean-combined
//! with the result of the previous steps.

mod json;
mod quant;
mod tokens;

pub use json::{parse_sequence, serialize_sequence};
pub use quant::{dequantize_sequence, quantize_sequence, SlotRange, SLOT_COUNT, SLOT_RANGES};
pub use tokens::{
    detokenize, parse_token_line, tokenize, write_token_line, TokenStream, EOS, PAD, SOE, SOS,
    TOK_A, TOK_E, TOK_L, TOK_R,
};

use crate::geom::{dist2, Aabb, Vec2, Vec3};
use std::f64::consts::TAU;
use thiserror::Error;

/// Closure tolerance for raw (unquantized) loop endpoints.
pub const EPS_CLOSE_RAW: f64 = 1e-9;
/// Closure tolerance used when re-segmenting loops after a quantization
/// round trip, in dequantized plane units. One quantization bin on the
/// coordinate range is 2/255, so this distinguishes adjacent levels.
pub const EPS_CLOSE_QUANT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveCommand {
    /// Straight segment to the endpoint `(x, y)`.
    Line { x: f64, y: f64 },
    /// Circular arc to the endpoint `(x, y)` sweeping `alpha` radians;
    /// `ccw` selects the traversal orientation from start to endpoint.
    Arc { x: f64, y: f64, alpha: f64, ccw: bool },
    /// Full circle centered at `(x, y)` with radius `r`; always a standalone loop.
    Circle { x: f64, y: f64, r: f64 },
}

impl CurveCommand {
    /// Endpoint for lines and arcs, center for circles.
    pub fn point(&self) -> Vec2 {
        match *self {
            CurveCommand::Line { x, y }
            | CurveCommand::Arc { x, y, .. }
            | CurveCommand::Circle { x, y, .. } => [x, y],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loop {
    pub curves: Vec<CurveCommand>,
}

impl Loop {
    pub fn is_circle(&self) -> bool {
        self.curves.len() == 1 && matches!(self.curves[0], CurveCommand::Circle { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub loops: Vec<Loop>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BooleanKind {
    NewBody,
    Join,
    Intersect,
    Cut,
}

impl BooleanKind {
    pub fn as_index(self) -> u8 {
        match self {
            BooleanKind::NewBody => 0,
            BooleanKind::Join => 1,
            BooleanKind::Intersect => 2,
            BooleanKind::Cut => 3,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Some(match i {
            0 => BooleanKind::NewBody,
            1 => BooleanKind::Join,
            2 => BooleanKind::Intersect,
            3 => BooleanKind::Cut,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtentKind {
    OneSided,
    Symmetric,
    TwoSided,
}

impl ExtentKind {
    pub fn as_index(self) -> u8 {
        match self {
            ExtentKind::OneSided => 0,
            ExtentKind::Symmetric => 1,
            ExtentKind::TwoSided => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Some(match i {
            0 => ExtentKind::OneSided,
            1 => ExtentKind::Symmetric,
            2 => ExtentKind::TwoSided,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtrudeCommand {
    /// Euler angles (Z-Y-Z intrinsic) placing the sketch plane.
    pub theta: f64,
    pub phi: f64,
    pub gamma: f64,
    /// World origin of the sketch plane.
    pub origin: Vec3,
    /// Isotropic sketch scale.
    pub scale: f64,
    /// Travel along +normal.
    pub extent_pos: f64,
    /// Travel along -normal.
    pub extent_neg: f64,
    pub boolean: BooleanKind,
    pub extent: ExtentKind,
}

impl ExtrudeCommand {
    /// Resolves the extent kind into a world interval along the plane normal.
    /// One-sided travels [0, e_p], two-sided [-e_n, e_p], and symmetric
    /// splits a total travel of e_p evenly about the plane.
    pub fn extent_interval(&self) -> (f64, f64) {
        match self.extent {
            ExtentKind::OneSided => (0.0, self.extent_pos),
            ExtentKind::Symmetric => (-self.extent_pos / 2.0, self.extent_pos / 2.0),
            ExtentKind::TwoSided => (-self.extent_neg, self.extent_pos),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub profile: Profile,
    pub extrude: ExtrudeCommand,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadSequence {
    pub steps: Vec<Step>,
}

impl CadSequence {
    pub fn new(steps: Vec<Step>) -> Self {
        CadSequence { steps }
    }
}

#[derive(Debug, Error)]
pub enum CmdSeqError {
    #[error("MalformedJson: {0}")]
    MalformedJson(String),
    #[error("UnknownCurveType: {0:?}")]
    UnknownCurveType(String),
    #[error("SketchWithoutExtrusion: step {0}")]
    SketchWithoutExtrusion(usize),
    #[error("ValueOutOfRange: {field} = {value} outside [{lo}, {hi}]")]
    ValueOutOfRange {
        field: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("MissingRequiredSlot: row {row} ({kind}) slot {slot}")]
    MissingRequiredSlot {
        row: usize,
        kind: &'static str,
        slot: &'static str,
    },
    #[error("ExtraneousSlot: row {row} ({kind}) slot {slot} must be padding")]
    ExtraneousSlot {
        row: usize,
        kind: &'static str,
        slot: &'static str,
    },
    #[error("TruncatedStream: {0}")]
    TruncatedStream(String),
    #[error("IllegalTokenAtPosition: token {token} at position {position}")]
    IllegalTokenAtPosition { token: u32, position: usize },
    #[error("DegenerateBbox: extents {0:?}")]
    DegenerateBbox(Vec3),
    #[error("ExtrusionWithoutSketch: row {0}")]
    ExtrusionWithoutSketch(usize),
    #[error("MissingEos")]
    MissingEos,
}

/// A single validation finding; `Display` begins with the violation name.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySequence,
    EmptyProfile { step: usize },
    EmptyLoop { step: usize, loop_idx: usize },
    OpenLoop { step: usize, loop_idx: usize, gap: f64 },
    DegenerateArc { step: usize, loop_idx: usize, curve_idx: usize },
    DegenerateCircle { step: usize, loop_idx: usize },
    MisplacedCircle { step: usize, loop_idx: usize, curve_idx: usize },
    ValueOutOfRange { step: usize, field: String, value: f64 },
    FirstStepNotNewBody,
    EmptyExtent { step: usize },
    NonPositiveScale { step: usize, value: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptySequence => write!(f, "EmptySequence: no steps"),
            Violation::EmptyProfile { step } => write!(f, "EmptyProfile: step {step}"),
            Violation::EmptyLoop { step, loop_idx } => {
                write!(f, "EmptyLoop: step {step} loop {loop_idx}")
            }
            Violation::OpenLoop { step, loop_idx, gap } => {
                write!(f, "OpenLoop: step {step} loop {loop_idx} misses start by {gap:.3e}")
            }
            Violation::DegenerateArc { step, loop_idx, curve_idx } => {
                write!(f, "DegenerateArc: step {step} loop {loop_idx} curve {curve_idx}")
            }
            Violation::DegenerateCircle { step, loop_idx } => {
                write!(f, "DegenerateCircle: step {step} loop {loop_idx}")
            }
            Violation::MisplacedCircle { step, loop_idx, curve_idx } => write!(
                f,
                "MisplacedCircle: step {step} loop {loop_idx} curve {curve_idx} (circles must be standalone loops)"
            ),
            Violation::ValueOutOfRange { step, field, value } => {
                write!(f, "ValueOutOfRange: step {step} {field} = {value}")
            }
            Violation::FirstStepNotNewBody => {
                write!(f, "FirstStepNotNewBody: first extrusion must start a new body")
            }
            Violation::EmptyExtent { step } => {
                write!(f, "EmptyExtent: step {step} resolves to zero extrusion travel")
            }
            Violation::NonPositiveScale { step, value } => {
                write!(f, "NonPositiveScale: step {step} s = {value}")
            }
        }
    }
}

/// Endpoint of the final curve of a loop chained from the plane origin.
fn loop_end(curves: &[CurveCommand]) -> Vec2 {
    curves.last().map(|c| c.point()).unwrap_or([0.0, 0.0])
}

/// Checks every type invariant: loop closure, declared value ranges, circle
/// placement, extent resolution, and the first-step boolean kind. Violations
/// are data, not errors; an empty list means the sequence is well-formed.
pub fn validate_sequence(seq: &CadSequence) -> Vec<Violation> {
    validate_sequence_eps(seq, EPS_CLOSE_RAW)
}

/// `validate_sequence` with an explicit loop-closure tolerance.
pub fn validate_sequence_eps(seq: &CadSequence, eps_close: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    if seq.steps.is_empty() {
        out.push(Violation::EmptySequence);
        return out;
    }
    for (si, step) in seq.steps.iter().enumerate() {
        if step.profile.loops.is_empty() {
            out.push(Violation::EmptyProfile { step: si });
        }
        for (li, lp) in step.profile.loops.iter().enumerate() {
            if lp.curves.is_empty() {
                out.push(Violation::EmptyLoop { step: si, loop_idx: li });
                continue;
            }
            let mut has_circle = false;
            for (ci, curve) in lp.curves.iter().enumerate() {
                match *curve {
                    CurveCommand::Line { x, y } => {
                        check_coord(&mut out, si, "line.x", x);
                        check_coord(&mut out, si, "line.y", y);
                    }
                    CurveCommand::Arc { x, y, alpha, .. } => {
                        check_coord(&mut out, si, "arc.x", x);
                        check_coord(&mut out, si, "arc.y", y);
                        if !(0.0..=TAU).contains(&alpha) {
                            out.push(Violation::ValueOutOfRange {
                                step: si,
                                field: "arc.alpha".into(),
                                value: alpha,
                            });
                        } else if alpha <= 1e-9 || alpha >= TAU - 1e-9 {
                            out.push(Violation::DegenerateArc {
                                step: si,
                                loop_idx: li,
                                curve_idx: ci,
                            });
                        }
                    }
                    CurveCommand::Circle { x, y, r } => {
                        has_circle = true;
                        check_coord(&mut out, si, "circle.cx", x);
                        check_coord(&mut out, si, "circle.cy", y);
                        if !(0.0..=2.0).contains(&r) {
                            out.push(Violation::ValueOutOfRange {
                                step: si,
                                field: "circle.r".into(),
                                value: r,
                            });
                        } else if r <= 1e-12 {
                            out.push(Violation::DegenerateCircle { step: si, loop_idx: li });
                        }
                        if lp.curves.len() > 1 {
                            out.push(Violation::MisplacedCircle {
                                step: si,
                                loop_idx: li,
                                curve_idx: ci,
                            });
                        }
                    }
                }
            }
            if !has_circle {
                let gap = dist2(loop_end(&lp.curves), [0.0, 0.0]);
                if gap > eps_close {
                    out.push(Violation::OpenLoop { step: si, loop_idx: li, gap });
                }
            }
        }

        let e = &step.extrude;
        check_range(&mut out, si, "extrude.theta", e.theta, 0.0, TAU);
        check_range(&mut out, si, "extrude.phi", e.phi, 0.0, std::f64::consts::PI);
        check_range(&mut out, si, "extrude.gamma", e.gamma, 0.0, TAU);
        check_coord(&mut out, si, "extrude.ox", e.origin[0]);
        check_coord(&mut out, si, "extrude.oy", e.origin[1]);
        check_coord(&mut out, si, "extrude.oz", e.origin[2]);
        check_range(&mut out, si, "extrude.s", e.scale, 0.0, 2.0);
        check_range(&mut out, si, "extrude.e_p", e.extent_pos, 0.0, 2.0);
        check_range(&mut out, si, "extrude.e_n", e.extent_neg, 0.0, 2.0);
        if e.scale <= 0.0 {
            out.push(Violation::NonPositiveScale { step: si, value: e.scale });
        }
        let (z0, z1) = e.extent_interval();
        if z1 - z0 <= 1e-12 {
            out.push(Violation::EmptyExtent { step: si });
        }
        if si == 0 && e.boolean != BooleanKind::NewBody {
            out.push(Violation::FirstStepNotNewBody);
        }
    }
    out
}

fn check_coord(out: &mut Vec<Violation>, step: usize, field: &str, v: f64) {
    check_range(out, step, field, v, -1.0, 1.0);
}

fn check_range(out: &mut Vec<Violation>, step: usize, field: &str, v: f64, lo: f64, hi: f64) {
    if !v.is_finite() || v < lo || v > hi {
        out.push(Violation::ValueOutOfRange {
            step,
            field: field.into(),
            value: v,
        });
    }
}

/// Rescales plane origins, sketch scales, and extents by one isotropic factor
/// plus a translation so the executed geometry fits the [-1, 1] cube.
/// Sketch-local coordinates are untouched; the `s` factor absorbs the scaling.
pub fn normalize_sequence(seq: &CadSequence, bbox: &Aabb) -> Result<CadSequence, CmdSeqError> {
    let ext = bbox.extents();
    if ext.iter().any(|&e| e <= 1e-12) {
        return Err(CmdSeqError::DegenerateBbox(ext));
    }
    let k = 2.0 / bbox.max_extent();
    let c = bbox.center();
    let mut out = seq.clone();
    for step in &mut out.steps {
        let e = &mut step.extrude;
        e.origin = [
            (e.origin[0] - c[0]) * k,
            (e.origin[1] - c[1]) * k,
            (e.origin[2] - c[2]) * k,
        ];
        e.scale *= k;
        e.extent_pos *= k;
        e.extent_neg *= k;
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn unit_square_profile() -> Profile {
        Profile {
            loops: vec![Loop {
                curves: vec![
                    CurveCommand::Line { x: 0.5, y: 0.0 },
                    CurveCommand::Line { x: 0.5, y: 0.5 },
                    CurveCommand::Line { x: 0.0, y: 0.5 },
                    CurveCommand::Line { x: 0.0, y: 0.0 },
                ],
            }],
        }
    }

    pub fn simple_extrude(boolean: BooleanKind) -> ExtrudeCommand {
        ExtrudeCommand {
            theta: 0.0,
            phi: 0.0,
            gamma: 0.0,
            origin: [0.0, 0.0, 0.0],
            scale: 1.0,
            extent_pos: 0.5,
            extent_neg: 0.0,
            boolean,
            extent: ExtentKind::OneSided,
        }
    }

    pub fn square_sequence() -> CadSequence {
        CadSequence::new(vec![Step {
            profile: unit_square_profile(),
            extrude: simple_extrude(BooleanKind::NewBody),
        }])
    }
}
