use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::Result;
use crate::geometry::Pose;

/// Above this many vertices the diameter is computed on a fixed-seed
/// subsample of this size.
pub const DIAMETER_VERTEX_CAP: usize = 10_000;
const SUBSAMPLE_SEED: u64 = 0x6e6f_6373_6469_616d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    /// Largest pairwise vertex distance, mm.
    pub diameter: f64,
    /// Model-frame symmetry transforms; always contains the identity first.
    pub symmetries: Vec<Pose>,
}

impl ModelInfo {
    /// Validates the symmetry list and makes sure the identity is in it.
    pub fn new(diameter: f64, mut symmetries: Vec<Pose>) -> Result<Self> {
        if !(diameter > 0.0) || !diameter.is_finite() {
            return Err(crate::Error::Validation(format!(
                "diameter must be positive, got {diameter}"
            )));
        }
        for s in &symmetries {
            s.validate()?;
        }
        let is_identity = |s: &Pose| {
            (s.rotation - nalgebra::Matrix3::identity()).amax() < 1e-12
                && s.translation.amax() < 1e-12
        };
        if !symmetries.iter().any(is_identity) {
            symmetries.insert(0, Pose::identity());
        }
        Ok(Self {
            diameter,
            symmetries,
        })
    }
}

pub fn compute_model_info(mesh: &TriangleMesh, symmetries: Vec<Pose>) -> Result<ModelInfo> {
    ModelInfo::new(diameter(mesh), symmetries)
}

fn diameter(mesh: &TriangleMesh) -> f64 {
    let verts = mesh.vertices();
    let sampled: Vec<_>;
    let pts = if verts.len() > DIAMETER_VERTEX_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
        let mut idx =
            rand::seq::index::sample(&mut rng, verts.len(), DIAMETER_VERTEX_CAP).into_vec();
        idx.sort_unstable();
        sampled = idx.into_iter().map(|i| verts[i]).collect();
        &sampled[..]
    } else {
        verts
    };
    let mut best = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            best = best.max((a - b).norm_squared());
        }
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use nalgebra::Vector3;

    #[test]
    fn two_points() {
        let m = TriangleMesh::new(
            vec![
                Vector3::zeros(),
                Vector3::new(3.0, 4.0, 0.0),
                Vector3::new(1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(compute_model_info(&m, vec![]).unwrap().diameter, 5.0);
    }

    #[test]
    fn cube_diagonal() {
        let info = compute_model_info(&primitives::cuboid(100.0, 100.0, 100.0), vec![]).unwrap();
        assert!((info.diameter - 100.0 * 3f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn identity_inserted() {
        let info = compute_model_info(&primitives::cuboid(1.0, 1.0, 1.0), vec![]).unwrap();
        assert_eq!(info.symmetries, vec![Pose::identity()]);
        let flip = Pose::new(
            nalgebra::Matrix3::from_diagonal(&Vector3::new(-1.0, -1.0, 1.0)),
            Vector3::zeros(),
        )
        .unwrap();
        let info = compute_model_info(&primitives::cuboid(1.0, 1.0, 1.0), vec![flip]).unwrap();
        assert_eq!(info.symmetries, vec![Pose::identity(), flip]);
    }

    #[test]
    fn rejects_improper_symmetry() {
        let mirror = Pose {
            rotation: nalgebra::Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0)),
            translation: Vector3::zeros(),
        };
        assert!(compute_model_info(&primitives::cuboid(1.0, 1.0, 1.0), vec![mirror]).is_err());
    }
}
