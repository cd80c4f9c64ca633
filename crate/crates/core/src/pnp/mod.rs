//! Correspondence decoding and pose recovery (EPnP inside RANSAC).

mod epnp;
mod ransac;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, MIN_DEPTH};
use crate::crop::CropInfo;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::mesh::{nocs_to_model, NocsTransform};
use crate::render::CorrespondenceMap;

pub use epnp::{epnp, PLANARITY_RATIO};
pub use ransac::{ransac_pnp, PoseEstimate, RansacParams};

/// A full-image pixel paired with the model-frame point (mm) it depicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence2D3D {
    pub pixel: Vector2<f64>,
    pub point: Vector3<f64>,
}

impl Correspondence2D3D {
    pub fn new(pixel: Vector2<f64>, point: Vector3<f64>) -> Self {
        Self { pixel, point }
    }
}

/// Reprojection distance in pixels; `+∞` when the point falls behind the
/// camera under `pose`.
#[inline]
pub fn reprojection_error(c: &Correspondence2D3D, pose: &Pose, k: &CameraIntrinsics) -> f64 {
    let pc = pose.transform(&c.point);
    if !(pc.z > MIN_DEPTH) {
        return f64::INFINITY;
    }
    (k.project_camera_unchecked(&pc) - c.pixel).norm()
}

/// Decodes every valid pixel on a `stride` grid of a (possibly cropped)
/// map into a correspondence, in row-major order.
pub fn extract_correspondences(
    map: &CorrespondenceMap,
    crop: &CropInfo,
    t: &NocsTransform,
    stride: u32,
) -> Result<Vec<Correspondence2D3D>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    if crop.out_w != map.width() || crop.out_h != map.height() {
        return Err(Error::DimensionMismatch(format!(
            "crop info is {}×{} but the map is {}×{}",
            crop.out_w,
            crop.out_h,
            map.width(),
            map.height()
        )));
    }
    let mut out = Vec::new();
    for j in (0..map.height()).step_by(stride as usize) {
        for i in (0..map.width()).step_by(stride as usize) {
            if let Some(c) = map.coord(i, j) {
                out.push(Correspondence2D3D::new(
                    crop.to_full(i, j),
                    nocs_to_model(&c, t),
                ));
            }
        }
    }
    Ok(out)
}
