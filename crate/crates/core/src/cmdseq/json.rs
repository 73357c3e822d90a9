//! Canonical JSON form of a command sequence.
//!
//! Serialization sorts object keys and rounds every float to 9 significant
//! digits, so structurally equal sequences produce byte-identical text.

use super::{
    BooleanKind, CadSequence, CmdSeqError, CurveCommand, ExtentKind, ExtrudeCommand, Loop,
    Profile, Step,
};
use crate::geom::round_sig9;
use serde_json::{json, Map, Value};
use std::f64::consts::{PI, TAU};

pub fn parse_sequence(text: &str) -> Result<CadSequence, CmdSeqError> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| CmdSeqError::MalformedJson(e.to_string()))?;
    let steps_val = root
        .get("steps")
        .and_then(Value::as_array)
        .ok_or_else(|| CmdSeqError::MalformedJson("missing \"steps\" array".into()))?;

    let mut steps = Vec::with_capacity(steps_val.len());
    for (si, step_val) in steps_val.iter().enumerate() {
        let obj = step_val
            .as_object()
            .ok_or_else(|| CmdSeqError::MalformedJson(format!("step {si} is not an object")))?;
        let profile_val = obj
            .get("profile")
            .ok_or_else(|| CmdSeqError::MalformedJson(format!("step {si} missing \"profile\"")))?;
        let extrude_val = obj
            .get("extrude")
            .ok_or(CmdSeqError::SketchWithoutExtrusion(si))?;
        steps.push(Step {
            profile: parse_profile(profile_val, si)?,
            extrude: parse_extrude(extrude_val, si)?,
        });
    }
    Ok(CadSequence::new(steps))
}

fn parse_profile(v: &Value, si: usize) -> Result<Profile, CmdSeqError> {
    let loops_val = v
        .get("loops")
        .and_then(Value::as_array)
        .ok_or_else(|| CmdSeqError::MalformedJson(format!("step {si} profile missing \"loops\"")))?;
    let mut loops = Vec::with_capacity(loops_val.len());
    for (li, loop_val) in loops_val.iter().enumerate() {
        let obj = loop_val.as_object().ok_or_else(|| {
            CmdSeqError::MalformedJson(format!("step {si} loop {li} is not an object"))
        })?;
        if let Some(c) = obj.get("circle") {
            let x = get_num(c, "cx", si)?;
            let y = get_num(c, "cy", si)?;
            let r = get_num(c, "r", si)?;
            check(si, "circle.cx", x, -1.0, 1.0)?;
            check(si, "circle.cy", y, -1.0, 1.0)?;
            check(si, "circle.r", r, 0.0, 2.0)?;
            loops.push(Loop {
                curves: vec![CurveCommand::Circle { x, y, r }],
            });
        } else if let Some(curves_val) = obj.get("curves").and_then(Value::as_array) {
            let mut curves = Vec::with_capacity(curves_val.len());
            for curve_val in curves_val {
                curves.push(parse_curve(curve_val, si)?);
            }
            loops.push(Loop { curves });
        } else {
            return Err(CmdSeqError::MalformedJson(format!(
                "step {si} loop {li} needs \"circle\" or \"curves\""
            )));
        }
    }
    Ok(Profile { loops })
}

fn parse_curve(v: &Value, si: usize) -> Result<CurveCommand, CmdSeqError> {
    let obj = v
        .as_object()
        .ok_or_else(|| CmdSeqError::MalformedJson(format!("step {si} curve is not an object")))?;
    if obj.len() != 1 {
        return Err(CmdSeqError::MalformedJson(format!(
            "step {si} curve must have exactly one key"
        )));
    }
    let (kind, body) = obj.iter().next().unwrap();
    match kind.as_str() {
        "line" => {
            let x = get_num(body, "x", si)?;
            let y = get_num(body, "y", si)?;
            check(si, "line.x", x, -1.0, 1.0)?;
            check(si, "line.y", y, -1.0, 1.0)?;
            Ok(CurveCommand::Line { x, y })
        }
        "arc" => {
            let x = get_num(body, "x", si)?;
            let y = get_num(body, "y", si)?;
            let alpha = get_num(body, "alpha", si)?;
            let ccw = body.get("ccw").and_then(Value::as_bool).ok_or_else(|| {
                CmdSeqError::MalformedJson(format!("step {si} arc missing boolean \"ccw\""))
            })?;
            check(si, "arc.x", x, -1.0, 1.0)?;
            check(si, "arc.y", y, -1.0, 1.0)?;
            check(si, "arc.alpha", alpha, 0.0, TAU)?;
            Ok(CurveCommand::Arc { x, y, alpha, ccw })
        }
        other => Err(CmdSeqError::UnknownCurveType(other.to_string())),
    }
}

fn parse_extrude(v: &Value, si: usize) -> Result<ExtrudeCommand, CmdSeqError> {
    let theta = get_num(v, "theta", si)?;
    let phi = get_num(v, "phi", si)?;
    let gamma = get_num(v, "gamma", si)?;
    let ox = get_num(v, "ox", si)?;
    let oy = get_num(v, "oy", si)?;
    let oz = get_num(v, "oz", si)?;
    let s = get_num(v, "s", si)?;
    let e_p = get_num(v, "e_p", si)?;
    let e_n = get_num(v, "e_n", si)?;
    check(si, "extrude.theta", theta, 0.0, TAU)?;
    check(si, "extrude.phi", phi, 0.0, PI)?;
    check(si, "extrude.gamma", gamma, 0.0, TAU)?;
    check(si, "extrude.ox", ox, -1.0, 1.0)?;
    check(si, "extrude.oy", oy, -1.0, 1.0)?;
    check(si, "extrude.oz", oz, -1.0, 1.0)?;
    check(si, "extrude.s", s, 0.0, 2.0)?;
    check(si, "extrude.e_p", e_p, 0.0, 2.0)?;
    check(si, "extrude.e_n", e_n, 0.0, 2.0)?;

    let boolean = match get_str(v, "bool", si)? {
        "new" => BooleanKind::NewBody,
        "join" => BooleanKind::Join,
        "intersect" => BooleanKind::Intersect,
        "cut" => BooleanKind::Cut,
        other => {
            return Err(CmdSeqError::MalformedJson(format!(
                "step {si} unknown bool kind {other:?}"
            )))
        }
    };
    let extent = match get_str(v, "extent", si)? {
        "one" => ExtentKind::OneSided,
        "symmetric" => ExtentKind::Symmetric,
        "two" => ExtentKind::TwoSided,
        other => {
            return Err(CmdSeqError::MalformedJson(format!(
                "step {si} unknown extent kind {other:?}"
            )))
        }
    };

    Ok(ExtrudeCommand {
        theta,
        phi,
        gamma,
        origin: [ox, oy, oz],
        scale: s,
        extent_pos: e_p,
        extent_neg: e_n,
        boolean,
        extent,
    })
}

fn get_num(v: &Value, key: &str, si: usize) -> Result<f64, CmdSeqError> {
    v.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| CmdSeqError::MalformedJson(format!("step {si} missing number \"{key}\"")))
}

fn get_str<'a>(v: &'a Value, key: &str, si: usize) -> Result<&'a str, CmdSeqError> {
    v.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| CmdSeqError::MalformedJson(format!("step {si} missing string \"{key}\"")))
}

fn check(si: usize, field: &str, v: f64, lo: f64, hi: f64) -> Result<(), CmdSeqError> {
    if !v.is_finite() || v < lo || v > hi {
        return Err(CmdSeqError::ValueOutOfRange {
            field: format!("step {si} {field}"),
            value: v,
            lo,
            hi,
        });
    }
    Ok(())
}

pub fn serialize_sequence(seq: &CadSequence) -> String {
    let steps: Vec<Value> = seq
        .steps
        .iter()
        .map(|step| {
            let mut obj = Map::new();
            obj.insert("profile".into(), profile_value(&step.profile));
            obj.insert("extrude".into(), extrude_value(&step.extrude));
            Value::Object(obj)
        })
        .collect();
    let root = json!({ "steps": steps });
    serde_json::to_string(&root).expect("sequence JSON serialization cannot fail")
}

fn profile_value(p: &Profile) -> Value {
    let loops: Vec<Value> = p
        .loops
        .iter()
        .map(|lp| {
            if lp.is_circle() {
                if let CurveCommand::Circle { x, y, r } = lp.curves[0] {
                    return json!({ "circle": { "cx": n(x), "cy": n(y), "r": n(r) } });
                }
                unreachable!()
            }
            let curves: Vec<Value> = lp
                .curves
                .iter()
                .map(|c| match *c {
                    CurveCommand::Line { x, y } => json!({ "line": { "x": n(x), "y": n(y) } }),
                    CurveCommand::Arc { x, y, alpha, ccw } => {
                        json!({ "arc": { "x": n(x), "y": n(y), "alpha": n(alpha), "ccw": ccw } })
                    }
                    CurveCommand::Circle { x, y, r } => {
                        json!({ "circle": { "cx": n(x), "cy": n(y), "r": n(r) } })
                    }
                })
                .collect();
            json!({ "curves": curves })
        })
        .collect();
    json!({ "loops": loops })
}

fn extrude_value(e: &ExtrudeCommand) -> Value {
    json!({
        "theta": n(e.theta),
        "phi": n(e.phi),
        "gamma": n(e.gamma),
        "ox": n(e.origin[0]),
        "oy": n(e.origin[1]),
        "oz": n(e.origin[2]),
        "s": n(e.scale),
        "e_p": n(e.extent_pos),
        "e_n": n(e.extent_neg),
        "bool": match e.boolean {
            BooleanKind::NewBody => "new",
            BooleanKind::Join => "join",
            BooleanKind::Intersect => "intersect",
            BooleanKind::Cut => "cut",
        },
        "extent": match e.extent {
            ExtentKind::OneSided => "one",
            ExtentKind::Symmetric => "symmetric",
            ExtentKind::TwoSided => "two",
        },
    })
}

fn n(x: f64) -> f64 {
    round_sig9(x)
}
