//! Triangle meshes, their normalized object coordinate space (NOCS) twin,
//! and per-model metadata used by the metrics.

mod info;
mod nocs;
mod obj;
mod ply;
pub mod primitives;

use std::path::Path;

use nalgebra::Vector3;

use crate::error::{io_err, Error, Result};

pub use info::{compute_model_info, ModelInfo, DIAMETER_VERTEX_CAP};
pub use nocs::{nocs_to_model, normalize_to_nocs, NocsMesh, NocsTransform};

/// Object geometry in the model frame, vertices in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidMesh(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len() as u32;
        if let Some((i, t)) = triangles
            .iter()
            .enumerate()
            .find(|(_, t)| t.iter().any(|&idx| idx >= n))
        {
            return Err(Error::InvalidMesh(format!(
                "triangle {i} {t:?} references a vertex >= {n}"
            )));
        }
        let first = vertices[0];
        if vertices.iter().all(|v| *v == first) {
            return Err(Error::DegenerateMesh("all vertices coincide".into()));
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Returns a copy with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Vector3<f64>) -> Vector3<f64>) -> Result<Self> {
        Self::new(
            self.vertices.iter().map(f).collect(),
            self.triangles.clone(),
        )
    }

    /// Writes the mesh as ASCII PLY.
    pub fn write_ply(&self, path: &Path) -> Result<()> {
        std::fs::write(path, ply::to_ascii(self)).map_err(io_err(path.display().to_string()))
    }
}

/// Loads an ASCII PLY or a minimal (v/f only) OBJ file, chosen by extension.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(io_err(path.display().to_string()))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("obj") => obj::parse(&text, path),
        Some("ply") => ply::parse(&text, path),
        _ if text.starts_with("ply") => ply::parse(&text, path),
        _ => obj::parse(&text, path),
    }
}
