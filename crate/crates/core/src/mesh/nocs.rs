use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Maps model-frame millimeters into the unit cube and back.
///
/// A uniform scale (the longest bounding-box extent) keeps the aspect ratio
/// of the object, so the cube is only filled along the longest axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NocsTransform {
    /// Longest bounding-box extent, mm.
    pub scale: f64,
    /// Bounding-box center, mm.
    pub center: Vector3<f64>,
}

impl NocsTransform {
    pub fn normalize(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (p - self.center) / self.scale + Vector3::repeat(0.5)
    }

    pub fn denormalize(&self, p: &Vector3<f64>) -> Vector3<f64> {
        nocs_to_model(p, self)
    }
}

/// A mesh whose vertices are NOCS coordinates, plus the transform back to
/// the model frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NocsMesh {
    pub mesh: TriangleMesh,
    pub transform: NocsTransform,
}

pub fn normalize_to_nocs(mesh: &TriangleMesh) -> Result<NocsMesh> {
    let (lo, hi) = mesh.bounds();
    let extent = hi - lo;
    let scale = extent.max();
    if !(scale > 0.0) {
        return Err(Error::DegenerateMesh("zero bounding-box extent".into()));
    }
    let transform = NocsTransform {
        scale,
        center: (lo + hi) * 0.5,
    };
    // Clamping only absorbs the last-ulp rounding of the extreme vertices.
    let nocs = mesh.map_vertices(|v| transform.normalize(v).map(|c| c.clamp(0.0, 1.0)))?;
    Ok(NocsMesh {
        mesh: nocs,
        transform,
    })
}

/// NOCS point to model-frame millimeters. Inputs are clamped into `[0, 1]³`
/// first, which absorbs 8-bit decoding slop.
pub fn nocs_to_model(p: &Vector3<f64>, t: &NocsTransform) -> Vector3<f64> {
    (p.map(|c| c.clamp(0.0, 1.0)) - Vector3::repeat(0.5)) * t.scale + t.center
}
