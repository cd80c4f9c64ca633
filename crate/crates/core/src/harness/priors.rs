use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::crop::Roi;
use crate::error::{io_err, Error, Result};

/// An externally computed detection used to place the crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationPrior {
    pub image_id: u64,
    pub obj_id: u64,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub score: f64,
}

impl LocationPrior {
    /// Square crop around the box, padded by `pad`.
    pub fn roi(&self, pad: f64, out_size: u32) -> Roi {
        let [x, y, w, h] = self.bbox;
        let (x0, y0) = (x.floor().max(0.0) as u32, y.floor().max(0.0) as u32);
        let (x1, y1) = ((x + w).ceil() as u32, (y + h).ceil() as u32);
        Roi::square_around(x0, y0, (x1 - x0).max(1), (y1 - y0).max(1), pad).with_out_size(out_size)
    }
}

/// Parses priors from JSON text. Scores outside `[0, 1]` are an error;
/// boxes are clamped to the image, and boxes entirely outside it are
/// dropped, both with a warning.
pub fn parse_location_priors(text: &str, width: u32, height: u32) -> Result<Vec<LocationPrior>> {
    let raw: Vec<LocationPrior> = serde_json::from_str(text)?;
    let (wf, hf) = (width as f64, height as f64);
    let mut out = Vec::with_capacity(raw.len());
    for (i, mut p) in raw.into_iter().enumerate() {
        if !(0.0..=1.0).contains(&p.score) {
            return Err(Error::Validation(format!("prior {i}: score {} outside [0, 1]", p.score)));
        }
        let [x, y, w, h] = p.bbox;
        if !p.bbox.iter().all(|v| v.is_finite()) || w < 0.0 || h < 0.0 {
            return Err(Error::Validation(format!("prior {i}: invalid box {:?}", p.bbox)));
        }
        let (x0, y0) = (x.max(0.0), y.max(0.0));
        let (x1, y1) = ((x + w).min(wf), (y + h).min(hf));
        if x1 <= x0 || y1 <= y0 {
            warn!("prior {i} (image {}, object {}): box {:?} is outside the image; rejected", p.image_id, p.obj_id, p.bbox);
            continue;
        }
        let clamped = [x0, y0, x1 - x0, y1 - y0];
        if clamped != p.bbox {
            warn!("prior {i} (image {}, object {}): box {:?} clamped to {:?}", p.image_id, p.obj_id, p.bbox, clamped);
            p.bbox = clamped;
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_location_priors(path: &Path, width: u32, height: u32) -> Result<Vec<LocationPrior>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path.display().to_string()))?;
    parse_location_priors(&text, width, height)
}
