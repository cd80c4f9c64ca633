//! Region-of-interest cropping and resizing.
//!
//! Correspondence maps are resampled nearest-neighbor so no NOCS value is
//! invented at object boundaries; RGB crops are resampled bilinearly.
//! Parts of the ROI outside the image read as background / black.

use image::{Rgb, RgbImage};
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::CorrespondenceMap;

pub const DEFAULT_CROP_SIZE: u32 = 128;

/// Region of interest in full-image pixels, resized to `out_size`².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
    #[serde(default = "default_out_size")]
    pub out_size: u32,
}

fn default_out_size() -> u32 {
    DEFAULT_CROP_SIZE
}

impl Roi {
    pub fn new(x: i64, y: i64, w: u32, h: u32) -> Self {
        Self {
            x,
            y,
            w,
            h,
            out_size: DEFAULT_CROP_SIZE,
        }
    }

    pub fn with_out_size(mut self, out_size: u32) -> Self {
        self.out_size = out_size;
        self
    }

    pub fn intersects(&self, width: u32, height: u32) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x < width as i64
            && self.y < height as i64
            && self.x + self.w as i64 > 0
            && self.y + self.h as i64 > 0
    }

    /// Square ROI centered on a box, with side `max(w, h) · (1 + pad)`.
    pub fn square_around(x: u32, y: u32, w: u32, h: u32, pad: f64) -> Self {
        let side = ((w.max(h) as f64) * (1.0 + pad)).ceil().max(1.0) as u32;
        let cx = x as f64 + w as f64 / 2.0;
        let cy = y as f64 + h as f64 / 2.0;
        Roi::new(
            (cx - side as f64 / 2.0).floor() as i64,
            (cy - side as f64 / 2.0).floor() as i64,
            side,
            side,
        )
    }

    fn check(&self, width: u32, height: u32) -> Result<()> {
        if self.out_size == 0 || !self.intersects(width, height) {
            return Err(Error::EmptyRoi);
        }
        Ok(())
    }
}

/// Everything needed to map crop pixels back into the full image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropInfo {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
    pub out_w: u32,
    pub out_h: u32,
}

impl CropInfo {
    pub fn from_roi(roi: &Roi) -> Self {
        Self {
            x: roi.x,
            y: roi.y,
            w: roi.w,
            h: roi.h,
            out_w: roi.out_size,
            out_h: roi.out_size,
        }
    }

    /// Identity crop of a full image.
    pub fn full(width: u32, height: u32) -> Self {
        Self {
            x: 0,
            y: 0,
            w: width,
            h: height,
            out_w: width,
            out_h: height,
        }
    }

    /// Horizontal and vertical scale factors (source pixels per crop pixel).
    pub fn scale(&self) -> (f64, f64) {
        (
            self.w as f64 / self.out_w as f64,
            self.h as f64 / self.out_h as f64,
        )
    }

    /// Full-image pixel that nearest-neighbor resampling reads for crop
    /// pixel `(i, j)`: `x + ⌊(i + ½)·w / out_w⌋`, in exact integer arithmetic.
    #[inline]
    pub fn source_pixel(&self, i: u32, j: u32) -> (i64, i64) {
        let sx = ((2 * i as u64 + 1) * self.w as u64) / (2 * self.out_w as u64);
        let sy = ((2 * j as u64 + 1) * self.h as u64) / (2 * self.out_h as u64);
        (self.x + sx as i64, self.y + sy as i64)
    }

    /// Center of [`Self::source_pixel`] in continuous full-image coordinates.
    #[inline]
    pub fn to_full(&self, i: u32, j: u32) -> Vector2<f64> {
        let (sx, sy) = self.source_pixel(i, j);
        Vector2::new(sx as f64 + 0.5, sy as f64 + 0.5)
    }

    /// Continuous full-image coordinates to continuous crop coordinates.
    pub fn to_crop(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let (sx, sy) = self.scale();
        Vector2::new((p.x - self.x as f64) / sx, (p.y - self.y as f64) / sy)
    }
}

pub fn crop_map(map: &CorrespondenceMap, roi: &Roi) -> Result<(CorrespondenceMap, CropInfo)> {
    roi.check(map.width(), map.height())?;
    let info = CropInfo::from_roi(roi);
    let n = roi.out_size as usize * roi.out_size as usize;
    let mut coords = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut depth = map.depth().map(|_| Vec::with_capacity(n));
    for j in 0..roi.out_size {
        for i in 0..roi.out_size {
            let (sx, sy) = info.source_pixel(i, j);
            let inside = sx >= 0 && sy >= 0 && sx < map.width() as i64 && sy < map.height() as i64;
            if inside {
                let s = map.index(sx as u32, sy as u32);
                coords.push(map.coords()[s]);
                mask.push(map.mask()[s]);
                if let (Some(d), Some(src)) = (&mut depth, map.depth()) {
                    d.push(src[s]);
                }
            } else {
                coords.push(nalgebra::Vector3::zeros());
                mask.push(false);
                if let Some(d) = &mut depth {
                    d.push(f64::NAN);
                }
            }
        }
    }
    let out = CorrespondenceMap::from_parts(roi.out_size, roi.out_size, coords, mask, depth)?;
    Ok((out, info))
}

pub fn crop_rgb(img: &RgbImage, roi: &Roi) -> Result<(RgbImage, CropInfo)> {
    roi.check(img.width(), img.height())?;
    let info = CropInfo::from_roi(roi);
    let (scale_x, scale_y) = info.scale();
    let fetch = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
            [0.0; 3]
        } else {
            img.get_pixel(x as u32, y as u32).0.map(f64::from)
        }
    };
    let mut out = RgbImage::new(roi.out_size, roi.out_size);
    for j in 0..roi.out_size {
        for i in 0..roi.out_size {
            // Source position in pixel-index space (pixel centers at integers).
            let u = roi.x as f64 + (i as f64 + 0.5) * scale_x - 0.5;
            let v = roi.y as f64 + (j as f64 + 0.5) * scale_y - 0.5;
            let (u0, v0) = (u.floor(), v.floor());
            let (fu, fv) = (u - u0, v - v0);
            let (u0, v0) = (u0 as i64, v0 as i64);
            let p00 = fetch(u0, v0);
            let p10 = fetch(u0 + 1, v0);
            let p01 = fetch(u0, v0 + 1);
            let p11 = fetch(u0 + 1, v0 + 1);
            let mut px = [0u8; 3];
            for c in 0..3 {
                let top = p00[c] * (1.0 - fu) + p10[c] * fu;
                let bot = p01[c] * (1.0 - fu) + p11[c] * fu;
                px[c] = (top * (1.0 - fv) + bot * fv).round().clamp(0.0, 255.0) as u8;
            }
            out.put_pixel(i, j, Rgb(px));
        }
    }
    Ok((out, info))
}
