//! 256-level quantization between command sequences and their vectorized
//! row form.
//!
//! Every command row carries 16 slots in a fixed order; slots a command type
//! does not use hold a placeholder. Continuous slots map their declared range
//! onto 0..=255 with half-up rounding; discrete flags are stored directly.

use super::{
    BooleanKind, CadSequence, CmdSeqError, CurveCommand, ExtentKind, ExtrudeCommand, Loop,
    Profile, Step, EPS_CLOSE_QUANT,
};
use std::f64::consts::{PI, TAU};

pub const SLOT_COUNT: usize = 16;

pub const SLOT_NAMES: [&str; SLOT_COUNT] = [
    "x", "y", "alpha", "f", "r", "theta", "phi", "gamma", "px", "py", "pz", "s", "e_p", "e_n",
    "b", "u",
];

/// Value domain of one slot: a continuous range quantized to 256 levels, or a
/// small discrete index stored as-is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotRange {
    Continuous { lo: f64, hi: f64 },
    Discrete { max: u8 },
}

pub const SLOT_RANGES: [SlotRange; SLOT_COUNT] = [
    SlotRange::Continuous { lo: -1.0, hi: 1.0 }, // x
    SlotRange::Continuous { lo: -1.0, hi: 1.0 }, // y
    SlotRange::Continuous { lo: 0.0, hi: TAU },  // alpha
    SlotRange::Discrete { max: 1 },              // f (ccw flag)
    SlotRange::Continuous { lo: 0.0, hi: 2.0 },  // r
    SlotRange::Continuous { lo: 0.0, hi: TAU },  // theta
    SlotRange::Continuous { lo: 0.0, hi: PI },   // phi
    SlotRange::Continuous { lo: 0.0, hi: TAU },  // gamma
    SlotRange::Continuous { lo: -1.0, hi: 1.0 }, // px
    SlotRange::Continuous { lo: -1.0, hi: 1.0 }, // py
    SlotRange::Continuous { lo: -1.0, hi: 1.0 }, // pz
    SlotRange::Continuous { lo: 0.0, hi: 2.0 },  // s
    SlotRange::Continuous { lo: 0.0, hi: 2.0 },  // e_p
    SlotRange::Continuous { lo: 0.0, hi: 2.0 },  // e_n
    SlotRange::Discrete { max: 3 },              // b (boolean kind)
    SlotRange::Discrete { max: 2 },              // u (extent kind)
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Line,
    Arc,
    Circle,
    Extrude,
    Sos,
    Soe,
    Eos,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Line => "L",
            RowKind::Arc => "A",
            RowKind::Circle => "R",
            RowKind::Extrude => "E",
            RowKind::Sos => "SOS",
            RowKind::Soe => "SOE",
            RowKind::Eos => "EOS",
        }
    }

    /// Slot indices this row type fills; all others must be padding.
    pub fn required_slots(self) -> &'static [usize] {
        match self {
            RowKind::Line => &[0, 1],
            RowKind::Arc => &[0, 1, 2, 3],
            RowKind::Circle => &[0, 1, 4],
            RowKind::Extrude => &[5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15],
            RowKind::Sos | RowKind::Soe | RowKind::Eos => &[],
        }
    }
}

/// One vectorized command: a type plus 16 quantized slots (`None` = padding).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommandRow {
    pub kind: RowKind,
    pub slots: [Option<u8>; SLOT_COUNT],
}

impl CommandRow {
    pub fn empty(kind: RowKind) -> Self {
        CommandRow {
            kind,
            slots: [None; SLOT_COUNT],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorizedSequence {
    pub rows: Vec<CommandRow>,
}

impl VectorizedSequence {
    /// Rows excluding control rows (start markers and the trailing end row).
    pub fn command_rows(&self) -> impl Iterator<Item = &CommandRow> {
        self.rows.iter().filter(|r| {
            !matches!(r.kind, RowKind::Sos | RowKind::Soe | RowKind::Eos)
        })
    }
}

/// Half-up rounding with a small upward nudge. Dequantized sketch
/// coordinates sit exactly on quantization ties after re-anchoring, and a
/// further 9-significant-digit serialization trip can push them up to about
/// 1e-7 of a level below the tie; the nudge keeps re-quantization exact while
/// staying five orders of magnitude under a half level.
fn round_half_up(x: f64) -> f64 {
    (x + 0.5 + 1e-6).floor()
}

/// Maps a continuous value in [lo, hi] onto 0..=255.
pub fn quantize_value(v: f64, lo: f64, hi: f64) -> Result<u8, CmdSeqError> {
    if !v.is_finite() || v < lo || v > hi {
        return Err(CmdSeqError::ValueOutOfRange {
            field: "slot".into(),
            value: v,
            lo,
            hi,
        });
    }
    let q = round_half_up((v - lo) / (hi - lo) * 255.0);
    Ok(q.clamp(0.0, 255.0) as u8)
}

/// Inverse of `quantize_value`: the representative value of level `q`.
pub fn dequantize_value(q: u8, lo: f64, hi: f64) -> f64 {
    lo + q as f64 / 255.0 * (hi - lo)
}

fn cont_range(slot: usize) -> (f64, f64) {
    match SLOT_RANGES[slot] {
        SlotRange::Continuous { lo, hi } => (lo, hi),
        SlotRange::Discrete { .. } => unreachable!("slot {slot} is discrete"),
    }
}

fn q_slot(v: f64, slot: usize) -> Result<u8, CmdSeqError> {
    let (lo, hi) = cont_range(slot);
    quantize_value(v, lo, hi).map_err(|_| CmdSeqError::ValueOutOfRange {
        field: SLOT_NAMES[slot].into(),
        value: v,
        lo,
        hi,
    })
}

fn dq_slot(q: u8, slot: usize) -> f64 {
    let (lo, hi) = cont_range(slot);
    dequantize_value(q, lo, hi)
}

/// Vectorizes a sequence: one row per curve in loop order, one extrude row
/// per step, and a single trailing end row. Loop boundaries are not marked;
/// they are recovered on dequantization by closure detection.
pub fn quantize_sequence(seq: &CadSequence) -> Result<VectorizedSequence, CmdSeqError> {
    let mut rows = Vec::new();
    for step in &seq.steps {
        for lp in &step.profile.loops {
            for curve in &lp.curves {
                rows.push(quantize_curve(curve)?);
            }
        }
        rows.push(quantize_extrude(&step.extrude)?);
    }
    rows.push(CommandRow::empty(RowKind::Eos));
    Ok(VectorizedSequence { rows })
}

fn quantize_curve(curve: &CurveCommand) -> Result<CommandRow, CmdSeqError> {
    match *curve {
        CurveCommand::Line { x, y } => {
            let mut row = CommandRow::empty(RowKind::Line);
            row.slots[0] = Some(q_slot(x, 0)?);
            row.slots[1] = Some(q_slot(y, 1)?);
            Ok(row)
        }
        CurveCommand::Arc { x, y, alpha, ccw } => {
            let mut row = CommandRow::empty(RowKind::Arc);
            row.slots[0] = Some(q_slot(x, 0)?);
            row.slots[1] = Some(q_slot(y, 1)?);
            row.slots[2] = Some(q_slot(alpha, 2)?);
            row.slots[3] = Some(ccw as u8);
            Ok(row)
        }
        CurveCommand::Circle { x, y, r } => {
            let mut row = CommandRow::empty(RowKind::Circle);
            row.slots[0] = Some(q_slot(x, 0)?);
            row.slots[1] = Some(q_slot(y, 1)?);
            row.slots[4] = Some(q_slot(r, 4)?);
            Ok(row)
        }
    }
}

fn quantize_extrude(e: &ExtrudeCommand) -> Result<CommandRow, CmdSeqError> {
    let mut row = CommandRow::empty(RowKind::Extrude);
    row.slots[5] = Some(q_slot(e.theta, 5)?);
    row.slots[6] = Some(q_slot(e.phi, 6)?);
    row.slots[7] = Some(q_slot(e.gamma, 7)?);
    row.slots[8] = Some(q_slot(e.origin[0], 8)?);
    row.slots[9] = Some(q_slot(e.origin[1], 9)?);
    row.slots[10] = Some(q_slot(e.origin[2], 10)?);
    row.slots[11] = Some(q_slot(e.scale, 11)?);
    row.slots[12] = Some(q_slot(e.extent_pos, 12)?);
    row.slots[13] = Some(q_slot(e.extent_neg, 13)?);
    row.slots[14] = Some(e.boolean.as_index());
    row.slots[15] = Some(e.extent.as_index());
    Ok(row)
}

fn require(row: &CommandRow, row_idx: usize, slot: usize) -> Result<u8, CmdSeqError> {
    row.slots[slot].ok_or(CmdSeqError::MissingRequiredSlot {
        row: row_idx,
        kind: row.kind.as_str(),
        slot: SLOT_NAMES[slot],
    })
}

fn check_padding(row: &CommandRow, row_idx: usize) -> Result<(), CmdSeqError> {
    let required = row.kind.required_slots();
    for slot in 0..SLOT_COUNT {
        if !required.contains(&slot) && row.slots[slot].is_some() {
            return Err(CmdSeqError::ExtraneousSlot {
                row: row_idx,
                kind: row.kind.as_str(),
                slot: SLOT_NAMES[slot],
            });
        }
    }
    Ok(())
}

/// Reconstructs a structured sequence from vectorized rows.
///
/// Curve endpoints are re-anchored so the quantized image of the plane origin
/// maps back to exactly (0, 0); loops then close bit-exactly and are
/// recovered by watching the running endpoint return to the origin. Circles
/// always form standalone loops.
pub fn dequantize_sequence(vseq: &VectorizedSequence) -> Result<CadSequence, CmdSeqError> {
    // The quantized level of plane coordinate 0.0 dequantizes to this offset.
    let origin_level = quantize_value(0.0, -1.0, 1.0).expect("0 is in range");
    let anchor = dequantize_value(origin_level, -1.0, 1.0);
    let shift = |v: f64| (v - anchor).clamp(-1.0, 1.0);

    let mut steps: Vec<Step> = Vec::new();
    let mut loops: Vec<Loop> = Vec::new();
    let mut chain: Vec<CurveCommand> = Vec::new();
    let mut saw_eos = false;

    for (ri, row) in vseq.rows.iter().enumerate() {
        if saw_eos {
            return Err(CmdSeqError::TruncatedStream(format!(
                "row {ri} appears after the end row"
            )));
        }
        check_padding(row, ri)?;
        match row.kind {
            RowKind::Sos | RowKind::Soe => {}
            RowKind::Eos => saw_eos = true,
            RowKind::Line => {
                let x = shift(dq_slot(require(row, ri, 0)?, 0));
                let y = shift(dq_slot(require(row, ri, 1)?, 1));
                chain.push(CurveCommand::Line { x, y });
                maybe_close(&mut loops, &mut chain, [x, y]);
            }
            RowKind::Arc => {
                let x = shift(dq_slot(require(row, ri, 0)?, 0));
                let y = shift(dq_slot(require(row, ri, 1)?, 1));
                let alpha = dq_slot(require(row, ri, 2)?, 2);
                let ccw = require(row, ri, 3)? != 0;
                chain.push(CurveCommand::Arc { x, y, alpha, ccw });
                maybe_close(&mut loops, &mut chain, [x, y]);
            }
            RowKind::Circle => {
                let x = shift(dq_slot(require(row, ri, 0)?, 0));
                let y = shift(dq_slot(require(row, ri, 1)?, 1));
                let r = dq_slot(require(row, ri, 4)?, 4);
                loops.push(Loop {
                    curves: vec![CurveCommand::Circle { x, y, r }],
                });
            }
            RowKind::Extrude => {
                if !chain.is_empty() {
                    // Unclosed chain: surface it as an (invalid) loop so
                    // validation reports OpenLoop instead of losing curves.
                    loops.push(Loop {
                        curves: std::mem::take(&mut chain),
                    });
                }
                if loops.is_empty() {
                    return Err(CmdSeqError::ExtrusionWithoutSketch(ri));
                }
                let extrude = dequantize_extrude(row, ri)?;
                steps.push(Step {
                    profile: Profile {
                        loops: std::mem::take(&mut loops),
                    },
                    extrude,
                });
            }
        }
    }
    if !saw_eos {
        return Err(CmdSeqError::MissingEos);
    }
    if !loops.is_empty() || !chain.is_empty() {
        return Err(CmdSeqError::SketchWithoutExtrusion(steps.len()));
    }
    Ok(CadSequence::new(steps))
}

fn maybe_close(loops: &mut Vec<Loop>, chain: &mut Vec<CurveCommand>, endpoint: [f64; 2]) {
    if endpoint[0].hypot(endpoint[1]) <= EPS_CLOSE_QUANT {
        loops.push(Loop {
            curves: std::mem::take(chain),
        });
    }
}

fn dequantize_extrude(row: &CommandRow, ri: usize) -> Result<ExtrudeCommand, CmdSeqError> {
    let b = require(row, ri, 14)?;
    let u = require(row, ri, 15)?;
    let boolean = BooleanKind::from_index(b).ok_or(CmdSeqError::ValueOutOfRange {
        field: "b".into(),
        value: b as f64,
        lo: 0.0,
        hi: 3.0,
    })?;
    let extent = ExtentKind::from_index(u).ok_or(CmdSeqError::ValueOutOfRange {
        field: "u".into(),
        value: u as f64,
        lo: 0.0,
        hi: 2.0,
    })?;
    Ok(ExtrudeCommand {
        theta: dq_slot(require(row, ri, 5)?, 5),
        phi: dq_slot(require(row, ri, 6)?, 6),
        gamma: dq_slot(require(row, ri, 7)?, 7),
        origin: [
            dq_slot(require(row, ri, 8)?, 8),
            dq_slot(require(row, ri, 9)?, 9),
            dq_slot(require(row, ri, 10)?, 10),
        ],
        scale: dq_slot(require(row, ri, 11)?, 11),
        extent_pos: dq_slot(require(row, ri, 12)?, 12),
        extent_neg: dq_slot(require(row, ri, 13)?, 13),
        boolean,
        extent,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::square_sequence;
    use super::*;
    use crate::cmdseq::validate_sequence;

    #[test]
    fn coordinate_endpoints_hit_extreme_levels() {
        assert_eq!(quantize_value(-1.0, -1.0, 1.0).unwrap(), 0);
        assert_eq!(quantize_value(1.0, -1.0, 1.0).unwrap(), 255);
    }

    #[test]
    fn zero_coordinate_rounds_half_up() {
        // (0+1)/2*255 = 127.5, ties round up
        assert_eq!(quantize_value(0.0, -1.0, 1.0).unwrap(), 128);
    }

    #[test]
    fn level_endpoints_dequantize_to_range_bounds() {
        assert_eq!(dequantize_value(0, -1.0, 1.0), -1.0);
        assert_eq!(dequantize_value(255, -1.0, 1.0), 1.0);
        assert_eq!(dequantize_value(0, 0.0, 2.0), 0.0);
        assert_eq!(dequantize_value(255, 0.0, 2.0), 2.0);
    }

    #[test]
    fn quantize_dequantize_identity_all_levels_all_ranges() {
        for range in SLOT_RANGES {
            if let SlotRange::Continuous { lo, hi } = range {
                for q in 0..=255u8 {
                    let v = dequantize_value(q, lo, hi);
                    assert_eq!(quantize_value(v, lo, hi).unwrap(), q, "range [{lo}, {hi}]");
                }
            }
        }
    }

    #[test]
    fn dequantize_quantize_error_within_one_bin() {
        // exhaustive scan over a fine value grid on every continuous range
        for range in SLOT_RANGES {
            if let SlotRange::Continuous { lo, hi } = range {
                let bin = (hi - lo) / 255.0;
                for i in 0..=10_000 {
                    let v = lo + (hi - lo) * i as f64 / 10_000.0;
                    let back = dequantize_value(quantize_value(v, lo, hi).unwrap(), lo, hi);
                    assert!(
                        (back - v).abs() <= bin,
                        "v={v} back={back} bin={bin}"
                    );
                }
            }
        }
    }

    #[test]
    fn out_of_range_value_rejected() {
        assert!(quantize_value(1.1, -1.0, 1.0).is_err());
        assert!(quantize_value(f64::NAN, -1.0, 1.0).is_err());
    }

    #[test]
    fn square_quantizes_to_five_command_rows_plus_end() {
        let v = quantize_sequence(&square_sequence()).unwrap();
        assert_eq!(v.rows.len(), 6);
        assert_eq!(v.rows.last().unwrap().kind, RowKind::Eos);
        assert_eq!(v.command_rows().count(), 5);
    }

    #[test]
    fn dequantized_square_validates_and_requantizes_bit_equal() {
        let v = quantize_sequence(&square_sequence()).unwrap();
        let seq = dequantize_sequence(&v).unwrap();
        assert!(validate_sequence(&seq).is_empty(), "{:?}", validate_sequence(&seq));
        assert_eq!(seq.steps.len(), 1);
        assert_eq!(seq.steps[0].profile.loops.len(), 1);
        let v2 = quantize_sequence(&seq).unwrap();
        assert_eq!(v, v2);
    }

    #[test]
    fn dequantize_error_bounded_by_one_bin() {
        let seq = square_sequence();
        let v = quantize_sequence(&seq).unwrap();
        let back = dequantize_sequence(&v).unwrap();
        let bin = 2.0 / 255.0;
        for (s0, s1) in seq.steps.iter().zip(&back.steps) {
            for (l0, l1) in s0.profile.loops.iter().zip(&s1.profile.loops) {
                for (c0, c1) in l0.curves.iter().zip(&l1.curves) {
                    let p0 = c0.point();
                    let p1 = c1.point();
                    assert!((p0[0] - p1[0]).abs() <= bin);
                    assert!((p0[1] - p1[1]).abs() <= bin);
                }
            }
        }
    }

    #[test]
    fn missing_required_slot_reported() {
        let mut v = quantize_sequence(&square_sequence()).unwrap();
        v.rows[0].slots[0] = None;
        match dequantize_sequence(&v) {
            Err(CmdSeqError::MissingRequiredSlot { row: 0, slot: "x", .. }) => {}
            other => panic!("expected MissingRequiredSlot, got {other:?}"),
        }
    }

    #[test]
    fn extraneous_slot_reported() {
        let mut v = quantize_sequence(&square_sequence()).unwrap();
        v.rows[0].slots[5] = Some(7);
        assert!(matches!(
            dequantize_sequence(&v),
            Err(CmdSeqError::ExtraneousSlot { .. })
        ));
    }

    #[test]
    fn extrude_without_curves_rejected() {
        let mut v = quantize_sequence(&square_sequence()).unwrap();
        v.rows.remove(0);
        v.rows.remove(0);
        v.rows.remove(0);
        v.rows.remove(0);
        assert!(matches!(
            dequantize_sequence(&v),
            Err(CmdSeqError::ExtrusionWithoutSketch(_))
        ));
    }

    #[test]
    fn missing_end_row_rejected() {
        let mut v = quantize_sequence(&square_sequence()).unwrap();
        v.rows.pop();
        assert!(matches!(dequantize_sequence(&v), Err(CmdSeqError::MissingEos)));
    }
}
