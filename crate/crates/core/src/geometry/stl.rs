//! Binary and ASCII STL reading, binary STL writing.

use std::path::Path;

use super::{GeometryError, Result, TriangleMesh, Vec3};

/// Vertices closer than this (after scaling) are merged on load.
pub const WELD_TOL: f64 = 1e-7;

fn err(msg: impl Into<String>) -> GeometryError {
    GeometryError::Stl(msg.into())
}

/// Parses STL bytes; coordinates are multiplied by `scale` (e.g. 1e-3 for
/// millimetre files).
pub fn parse(bytes: &[u8], scale: f64) -> Result<TriangleMesh> {
    let tris = if looks_binary(bytes) { parse_binary(bytes)? } else { parse_ascii(bytes)? };
    let mut vertices = Vec::with_capacity(tris.len() * 3);
    let mut faces = Vec::with_capacity(tris.len());
    for t in tris {
        let base = vertices.len() as u32;
        vertices.extend(t.iter().map(|p| p * scale));
        faces.push([base, base + 1, base + 2]);
    }
    let mut m = TriangleMesh::new(vertices, faces)?;
    m.weld(WELD_TOL);
    Ok(m)
}

fn looks_binary(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    bytes.len() == 84 + n * 50 || !bytes.trim_ascii_start().starts_with(b"solid")
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>> {
    let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
    if bytes.len() < 84 + n * 50 {
        return Err(err(format!("truncated binary stl: expected {n} triangles")));
    }
    let f = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
    Ok((0..n)
        .map(|i| {
            let o = 84 + i * 50 + 12;
            let v = |k: usize| Vec3::new(f(o + 12 * k), f(o + 12 * k + 4), f(o + 12 * k + 8));
            [v(0), v(1), v(2)]
        })
        .collect())
}

fn parse_ascii(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>> {
    let text = std::str::from_utf8(bytes).map_err(|e| err(e.to_string()))?;
    let mut tris = Vec::new();
    let mut cur: Vec<Vec3> = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("vertex") => {
                let c: Vec<f64> = it
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad vertex `{line}`: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err(format!("bad vertex `{line}`")));
                }
                cur.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("endfacet") => {
                if cur.len() != 3 {
                    return Err(err("facet without three vertices"));
                }
                tris.push([cur[0], cur[1], cur[2]]);
                cur.clear();
            }
            _ => {}
        }
    }
    if tris.is_empty() {
        return Err(err("no facets"));
    }
    Ok(tris)
}

pub fn read(path: &Path, scale: f64) -> Result<TriangleMesh> {
    let bytes = std::fs::read(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    parse(&bytes, scale)
}

pub fn to_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = vec![0u8; 80];
    out[..9].copy_from_slice(b"aeroprint");
    out.extend_from_slice(&(mesh.faces.len() as u32).to_le_bytes());
    for f in 0..mesh.faces.len() {
        let t = mesh.triangle(f);
        let n = mesh.face_cross(f).try_normalize(0.0).unwrap_or_else(Vec3::zeros);
        for v in std::iter::once(n).chain(t) {
            for c in v.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

pub fn write(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    std::fs::write(path, to_binary(mesh)).map_err(|e| err(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_welds() {
        let m = TriangleMesh::cuboid(Vec3::zeros(), Vec3::new(0.5, 0.25, 0.125));
        let back = parse(&to_binary(&m), 1.0).unwrap();
        assert_eq!(back.vertices.len(), 8);
        assert!(back.is_closed());
        assert!((back.volume().unwrap() - m.volume().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ascii_with_scale() {
        let txt = "solid t\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1000 0 0\n   vertex 0 1000 0\n  endloop\n endfacet\nendsolid t\n";
        let m = parse(txt.as_bytes(), 1e-3).unwrap();
        assert_eq!(m.faces.len(), 1);
        assert!((m.vertices[1].x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(parse(b"solid x\nvertex a b c\nendsolid", 1.0).is_err());
    }
}
