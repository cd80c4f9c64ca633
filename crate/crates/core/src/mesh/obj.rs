use std::path::Path;

use nalgebra::Vector3;

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Parses the `v`/`f` subset of Wavefront OBJ. Other records are skipped.
pub(super) fn parse(text: &str, path: &Path) -> Result<TriangleMesh> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| perr(ln, format!("bad vertex record `{line}`")))?;
                if c.len() != 3 {
                    return Err(perr(ln, format!("vertex needs 3 coordinates: `{line}`")));
                }
                vertices.push(Vector3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                // `f 1/2/3 ...`: only the position index matters.
                let idx: Vec<i64> = tok
                    .map(|t| t.split('/').next().unwrap_or("").parse::<i64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| perr(ln, format!("bad face record `{line}`")))?;
                faces.push((ln, idx));
            }
            _ => {}
        }
    }

    let n = vertices.len() as i64;
    let mut triangles = Vec::with_capacity(faces.len());
    for (ln, idx) in faces {
        if idx.len() != 3 {
            return Err(Error::UnsupportedGeometry {
                path: path.to_path_buf(),
                line: ln,
                msg: format!(
                    "face with {} vertices (only triangles are supported)",
                    idx.len()
                ),
            });
        }
        let mut tri = [0u32; 3];
        for (slot, &i) in tri.iter_mut().zip(&idx) {
            // OBJ indices are 1-based; negative values count back from the end.
            let resolved = match i {
                0 => return Err(perr(ln, "face index 0 (OBJ indices are 1-based)".into())),
                i if i > 0 => i - 1,
                i => n + i,
            };
            if resolved < 0 || resolved >= n {
                return Err(perr(ln, format!("face index {i} out of range (1..={n})")));
            }
            *slot = resolved as u32;
        }
        triangles.push(tri);
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "# tetra\no tetra\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nvn 0 0 1\nf 1 2 3\nf 1/1/1 2/2/1 4/3/1\nf 1 3 4\nf -3 -2 -1\n";

    #[test]
    fn tetrahedron() {
        let m = parse(TETRA, Path::new("t.obj")).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]);
    }

    #[test]
    fn zero_index_is_a_parse_error() {
        let text = TETRA.replace("f 1 2 3", "f 0 2 3");
        assert!(matches!(
            parse(&text, Path::new("z.obj")),
            Err(Error::Parse { line: 8, .. })
        ));
    }

    #[test]
    fn out_of_range_index_is_a_parse_error() {
        let text = TETRA.replace("f 1 3 4", "f 1 3 5");
        assert!(matches!(
            parse(&text, Path::new("o.obj")),
            Err(Error::Parse { line: 10, .. })
        ));
    }

    #[test]
    fn quad_is_unsupported() {
        let text = TETRA.replace("f 1 3 4", "f 1 2 3 4");
        assert!(matches!(
            parse(&text, Path::new("q.obj")),
            Err(Error::UnsupportedGeometry { line: 10, .. })
        ));
    }
}
