//! On-disk representation of correspondence maps: an 8-bit RGB PNG for the
//! coordinates (`round(c · 255)` per channel), an 8-bit grayscale PNG for the
//! mask (0 / 255), and a JSON sidecar with the sample geometry.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::CameraIntrinsics;
use crate::crop::{CropInfo, Roi};
use crate::error::{io_err, Error, Result};
use crate::geometry::Pose;
use crate::mesh::NocsTransform;
use crate::render::CorrespondenceMap;

#[inline]
pub fn quantize(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn dequantize(v: u8) -> f64 {
    v as f64 / 255.0
}

pub fn map_to_images(map: &CorrespondenceMap) -> (RgbImage, GrayImage) {
    let mut rgb = RgbImage::new(map.width(), map.height());
    let mut mask = GrayImage::new(map.width(), map.height());
    for (i, (c, &m)) in map.coords().iter().zip(map.mask()).enumerate() {
        let (x, y) = (i as u32 % map.width(), i as u32 / map.width());
        if m {
            rgb.put_pixel(x, y, Rgb([quantize(c.x), quantize(c.y), quantize(c.z)]));
            mask.put_pixel(x, y, Luma([255]));
        }
    }
    (rgb, mask)
}

/// Decodes 8-bit images into a map. Mask pixels ≥ 128 count as valid. Depth
/// is not stored and comes back absent.
pub fn map_from_images(rgb: &RgbImage, mask: &GrayImage) -> Result<CorrespondenceMap> {
    if rgb.dimensions() != mask.dimensions() {
        return Err(Error::DimensionMismatch(format!(
            "coordinate image {:?} vs mask {:?}",
            rgb.dimensions(),
            mask.dimensions()
        )));
    }
    let coords = rgb
        .pixels()
        .map(|p| Vector3::new(dequantize(p[0]), dequantize(p[1]), dequantize(p[2])))
        .collect();
    let valid = mask.pixels().map(|p| p[0] >= 128).collect();
    CorrespondenceMap::from_parts(rgb.width(), rgb.height(), coords, valid, None)
}

pub fn save_map_png(map: &CorrespondenceMap, coords_path: &Path, mask_path: &Path) -> Result<()> {
    let (rgb, mask) = map_to_images(map);
    rgb.save(coords_path)?;
    mask.save(mask_path)?;
    Ok(())
}

pub fn load_map_png(coords_path: &Path, mask_path: &Path) -> Result<CorrespondenceMap> {
    let rgb = image::open(coords_path)?.to_rgb8();
    let mask = image::open(mask_path)?.to_luma8();
    map_from_images(&rgb, &mask)
}

/// Per-sample JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub pose: Pose,
    pub intrinsics: CameraIntrinsics,
    pub nocs_transform: NocsTransform,
    pub roi: Roi,
    pub crop: CropInfo,
}

impl Sidecar {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(io_err(path.display().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path.display().to_string()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_within_half_step() {
        let coords = vec![
            Vector3::new(0.0, 0.5, 1.0),
            Vector3::new(0.123, 0.456, 0.789),
            Vector3::zeros(),
            Vector3::new(0.999, 0.001, 0.3),
        ];
        let map = CorrespondenceMap::from_parts(2, 2, coords, vec![true, true, false, true], None)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("c.png"), dir.path().join("m.png"));
        save_map_png(&map, &a, &b).unwrap();
        let back = load_map_png(&a, &b).unwrap();
        assert_eq!(back.mask(), map.mask());
        for (p, q) in back.coords().iter().zip(map.coords()) {
            assert!((p - q).amax() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn sidecar_json_shape() {
        let s = Sidecar {
            pose: Pose::from_translation(Vector3::new(0.0, 0.0, 500.0)),
            intrinsics: CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap(),
            nocs_transform: NocsTransform {
                scale: 100.0,
                center: Vector3::zeros(),
            },
            roi: Roi::new(1, 2, 3, 4),
            crop: CropInfo::from_roi(&Roi::new(1, 2, 3, 4)),
        };
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["pose"]["rotation"].as_array().unwrap().len(), 9);
        assert_eq!(v["pose"]["translation"][2], 500.0);
        assert_eq!(v["roi"]["out_size"], 128);
        let back: Sidecar = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
