//! Pinhole camera model.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Points closer to the image plane than this (camera-frame z, mm) cannot be
/// projected.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::Validation(format!(
                "intrinsics need positive focal lengths (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Validation("image size must be at least 1×1".into()));
        }
        Ok(())
    }

    /// Image diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    /// Projects a camera-frame point. No depth check.
    #[inline]
    pub fn project_camera_unchecked(&self, pc: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(
            self.fx * pc.x / pc.z + self.cx,
            self.fy * pc.y / pc.z + self.cy,
        )
    }

    /// Projects a camera-frame point, failing when it is not in front of the camera.
    pub fn project_camera(&self, pc: &Vector3<f64>) -> Result<Vector2<f64>> {
        if pc.z <= MIN_DEPTH || !pc.z.is_finite() {
            return Err(Error::BehindCamera { z: pc.z });
        }
        Ok(self.project_camera_unchecked(pc))
    }

    /// Pixel to normalized image-plane coordinates `((u − cx)/fx, (v − cy)/fy)`.
    #[inline]
    pub fn normalize(&self, pixel: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new((pixel.x - self.cx) / self.fx, (pixel.y - self.cy) / self.fy)
    }

    pub fn contains(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= self.width as f64
            && pixel.y <= self.height as f64
    }
}

/// Projects a model-frame point (mm) through `pose` and `k`.
///
/// Pixel coordinates are continuous: pixel `(x, y)` covers
/// `[x, x+1) × [y, y+1)` and its center is `(x + 0.5, y + 0.5)`.
pub fn project(p: &Vector3<f64>, pose: &Pose, k: &CameraIntrinsics) -> Result<Vector2<f64>> {
    k.project_camera(&pose.transform(p))
}
