//! Wavefront OBJ subset: `v` and triangular `f` records.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Mesh;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;

pub fn load_obj<T: Real>(path: impl AsRef<Path>) -> Result<Mesh<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Parses OBJ text. Only the position index of `f i/t/n` references is read;
/// normals, texture coordinates, groups and materials are ignored.
pub fn parse_obj<T: Real>(text: &str) -> Result<Mesh<T>> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line,
                            message: format!("invalid coordinate {t:?}"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if coords.len() < 3 {
                    return Err(Error::Parse {
                        line,
                        message: format!("vertex needs 3 coordinates, found {}", coords.len()),
                    });
                }
                vertices.push(Vec3::from_f64(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = tokens.collect();
                if refs.len() != 3 {
                    return Err(Error::UnsupportedFormat {
                        line,
                        message: format!(
                            "only triangles are supported, face has {} vertices",
                            refs.len()
                        ),
                    });
                }
                let mut face = [0usize; 3];
                for (slot, r) in face.iter_mut().zip(&refs) {
                    *slot = resolve_index(r, vertices.len(), line)?;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, faces)
}

fn resolve_index(token: &str, defined: usize, line: usize) -> Result<usize> {
    let pos = token.split('/').next().unwrap_or("");
    let idx: i64 = pos.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid vertex reference {token:?}"),
    })?;
    let resolved = match idx {
        0 => None,
        i if i > 0 => Some(i as usize - 1),
        i => (defined as i64 + i).try_into().ok(),
    };
    resolved.ok_or_else(|| Error::Parse {
        line,
        message: format!("vertex reference {idx} out of range"),
    })
}

pub fn save_obj<T: Real>(mesh: &Mesh<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_obj(mesh, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes coordinates with 9 significant digits and 1-based face indices.
pub fn write_obj<T: Real, W: Write>(mesh: &Mesh<T>, w: &mut W) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(
            w,
            "v {} {} {}",
            sig9(v.x.as_f64()),
            sig9(v.y.as_f64()),
            sig9(v.z.as_f64())
        )?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..=9).contains(&magnitude) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
