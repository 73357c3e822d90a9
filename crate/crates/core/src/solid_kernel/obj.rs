//! Wavefront OBJ export and triangles-only import.

use super::{KernelError, TriMesh};
use crate::geom::fmt_sig9;

/// `v` lines with 9-significant-digit floats, `f` lines with 1-based indices.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 32 + mesh.faces.len() * 16);
    for v in &mesh.vertices {
        out.push_str("v ");
        out.push_str(&fmt_sig9(v[0]));
        out.push(' ');
        out.push_str(&fmt_sig9(v[1]));
        out.push(' ');
        out.push_str(&fmt_sig9(v[2]));
        out.push('\n');
    }
    for f in &mesh.faces {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

/// Reads vertices and faces, fan-triangulating polygonal faces. Texture and
/// normal references (`a/b/c` fields) are accepted; only the vertex index is
/// used. Other line types are ignored.
pub fn read_obj(text: &str) -> Result<TriMesh, KernelError> {
    let mut mesh = TriMesh::empty();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |msg: String| KernelError::ObjParse {
            line: lineno + 1,
            msg,
        };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    *c = fields
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("vertex needs 3 numbers".into()))?;
                }
                mesh.vertices.push(coords);
            }
            Some("f") => {
                let idx: Vec<u32> = fields
                    .map(|field| {
                        let first = field.split('/').next().unwrap_or(field);
                        let i: i64 = first
                            .parse()
                            .map_err(|_| err(format!("bad face index {field:?}")))?;
                        let n = mesh.vertices.len() as i64;
                        let resolved = if i < 0 { n + i } else { i - 1 };
                        if resolved < 0 || resolved >= n {
                            return Err(err(format!("face index {i} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least 3 indices".into()));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}
