//! Point-cloud file formats: binary little-endian PLY and whitespace text
//! with six columns (x y z nx ny nz).

use super::{PointCloud, ReconError};
use crate::geom::fmt_sig9;

/// Binary little-endian PLY with float32 x y z nx ny nz.
pub fn write_ply(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + cloud.len() * 24);
    out.extend_from_slice(
        format!(
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
             property float x\nproperty float y\nproperty float z\n\
             property float nx\nproperty float ny\nproperty float nz\n\
             end_header\n",
            cloud.len()
        )
        .as_bytes(),
    );
    for (p, n) in cloud.points.iter().zip(&cloud.normals) {
        for v in [p[0], p[1], p[2], n[0], n[1], n[2]] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_ply(bytes: &[u8]) -> Result<PointCloud, ReconError> {
    let err = |line: usize, msg: &str| ReconError::CloudParse {
        line,
        msg: msg.to_string(),
    };
    let header_end = bytes
        .windows(11)
        .position(|w| w == b"end_header\n")
        .ok_or_else(|| err(0, "missing end_header"))?
        + 11;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| err(0, "header is not utf-8"))?;
    let mut count = None;
    let mut props: Vec<String> = Vec::new();
    let mut is_double = false;
    for (ln, line) in header.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["ply"] | ["end_header"] | ["comment", ..] => {}
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other, ..] => {
                return Err(err(ln + 1, &format!("unsupported format {other}")))
            }
            ["element", "vertex", n] => {
                count = Some(
                    n.parse::<usize>()
                        .map_err(|_| err(ln + 1, "bad vertex count"))?,
                )
            }
            ["element", ..] => return Err(err(ln + 1, "only vertex elements supported")),
            ["property", ty, name] => {
                match *ty {
                    "float" | "float32" => {}
                    "double" | "float64" => is_double = true,
                    _ => return Err(err(ln + 1, "unsupported property type")),
                }
                props.push((*name).to_string());
            }
            [] => {}
            _ => return Err(err(ln + 1, "unrecognized header line")),
        }
    }
    let count = count.ok_or_else(|| err(0, "missing vertex element"))?;
    let expected = ["x", "y", "z", "nx", "ny", "nz"];
    if props != expected {
        return Err(err(0, "expected properties x y z nx ny nz"));
    }
    let width = if is_double { 8 } else { 4 };
    let body = &bytes[header_end..];
    if body.len() < count * 6 * width {
        return Err(err(0, "truncated vertex data"));
    }
    let mut cloud = PointCloud::default();
    let read_at = |off: usize| -> f64 {
        if is_double {
            f64::from_le_bytes(body[off..off + 8].try_into().unwrap())
        } else {
            f32::from_le_bytes(body[off..off + 4].try_into().unwrap()) as f64
        }
    };
    for i in 0..count {
        let base = i * 6 * width;
        let vals: Vec<f64> = (0..6).map(|k| read_at(base + k * width)).collect();
        cloud.points.push([vals[0], vals[1], vals[2]]);
        cloud.normals.push([vals[3], vals[4], vals[5]]);
    }
    Ok(cloud)
}

/// One `x y z nx ny nz` line per point, 9 significant digits.
pub fn write_xyz(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for (p, n) in cloud.points.iter().zip(&cloud.normals) {
        let fields = [p[0], p[1], p[2], n[0], n[1], n[2]].map(fmt_sig9);
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_xyz(text: &str) -> Result<PointCloud, ReconError> {
    let mut cloud = PointCloud::default();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| ReconError::CloudParse {
                line: ln + 1,
                msg: "non-numeric field".into(),
            })?;
        if vals.len() != 6 {
            return Err(ReconError::CloudParse {
                line: ln + 1,
                msg: format!("expected 6 fields, found {}", vals.len()),
            });
        }
        cloud.points.push([vals[0], vals[1], vals[2]]);
        cloud.normals.push([vals[3], vals[4], vals[5]]);
    }
    Ok(cloud)
}
