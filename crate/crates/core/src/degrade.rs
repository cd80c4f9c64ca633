//! Correspondence-map degradation: stands in for a learned image-to-image
//! model by reproducing its error modes on a perfect map.
//!
//! Severity units depend on the kind: pixels for the morphological kinds
//! and the blur, a fraction of valid pixels for dropout, and NOCS units for
//! the additive kinds. For a fixed seed, damage is nested in severity:
//! erosion and dropout remove supersets, and noise scales one fixed field.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3x2, Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::CorrespondenceMap;

/// Side of one checker cell of the pattern artifact, pixels.
pub const PATTERN_PERIOD: u32 = 4;
/// Dropout block side as a fraction of √(valid pixel count).
const DROPOUT_BLOCK_FRACTION: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DegradationKind {
    BoundaryErode,
    BoundaryDilate,
    GaussianBlurCoords,
    CoarseDropoutMask,
    PatternArtifact,
    SurfaceNoise,
    MaskBleed,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 7] = [
        DegradationKind::BoundaryErode,
        DegradationKind::BoundaryDilate,
        DegradationKind::GaussianBlurCoords,
        DegradationKind::CoarseDropoutMask,
        DegradationKind::PatternArtifact,
        DegradationKind::SurfaceNoise,
        DegradationKind::MaskBleed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DegradationKind::BoundaryErode => "boundary_erode",
            DegradationKind::BoundaryDilate => "boundary_dilate",
            DegradationKind::GaussianBlurCoords => "gaussian_blur_coords",
            DegradationKind::CoarseDropoutMask => "coarse_dropout_mask",
            DegradationKind::PatternArtifact => "pattern_artifact",
            DegradationKind::SurfaceNoise => "surface_noise",
            DegradationKind::MaskBleed => "mask_bleed",
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

impl TryFrom<String> for DegradationKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DegradationKind> for String {
    fn from(k: DegradationKind) -> String {
        k.as_str().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    pub severity: f64,
}

impl DegradationSpec {
    pub fn new(kind: DegradationKind, severity: f64) -> Self {
        Self { kind, severity }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.severity >= 0.0) || !self.severity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "severity must be finite and ≥ 0, got {}",
                self.severity
            )));
        }
        if self.kind == DegradationKind::CoarseDropoutMask && self.severity > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "dropout severity is a fraction, got {}",
                self.severity
            )));
        }
        Ok(())
    }
}

/// Applies one degradation. Deterministic in `(map, spec, seed)`; zero
/// severity returns the input unchanged.
pub fn degrade_map(map: &CorrespondenceMap, spec: &DegradationSpec, seed: u64) -> Result<CorrespondenceMap> {
    spec.validate()?;
    if spec.severity == 0.0 {
        return Ok(map.clone());
    }
    let s = spec.severity;
    Ok(match spec.kind {
        DegradationKind::BoundaryErode => erode(map, s),
        DegradationKind::BoundaryDilate => grow(map, s, false),
        DegradationKind::MaskBleed => grow(map, s, true),
        DegradationKind::GaussianBlurCoords => blur_coords(map, s),
        DegradationKind::CoarseDropoutMask => coarse_dropout(map, s, seed),
        DegradationKind::PatternArtifact => pattern(map, s),
        DegradationKind::SurfaceNoise => noise(map, s, seed),
    })
}

/// Removes every valid pixel that has a background pixel (or the image
/// border) within Euclidean distance `radius`: erosion by a disk.
fn erode(map: &CorrespondenceMap, radius: f64) -> CorrespondenceMap {
    let (w, h) = (map.width() as usize, map.height() as usize);
    // One-pixel background frame so the border erodes too.
    let (pw, ph) = (w + 2, h + 2);
    let mut feature = vec![true; pw * ph];
    for y in 0..h {
        for x in 0..w {
            feature[(y + 1) * pw + x + 1] = !map.mask()[y * w + x];
        }
    }
    let (dist, _) = feature_transform(&feature, pw, ph);
    let r2 = radius * radius;
    let mut out = map.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if map.mask()[i] && dist[(y + 1) * pw + x + 1] <= r2 {
                out.clear(i);
            }
        }
    }
    out
}

/// Marks every background pixel within `radius` of the object valid. Plain
/// dilation copies the nearest object coordinate; bleeding extrapolates it
/// linearly along the local surface gradient.
fn grow(map: &CorrespondenceMap, radius: f64, extrapolate: bool) -> CorrespondenceMap {
    let (w, h) = (map.width() as usize, map.height() as usize);
    let (dist, nearest) = feature_transform(map.mask(), w, h);
    let r2 = radius * radius;
    let mut out = map.clone();
    out.drop_depth();
    for i in 0..w * h {
        if map.mask()[i] || dist[i] > r2 {
            continue;
        }
        let q = nearest[i];
        let base = map.coords()[q];
        let c = if extrapolate {
            let grad = local_gradient(map, q % w, q / w);
            let step = Vector2::new((i % w) as f64 - (q % w) as f64, (i / w) as f64 - (q / w) as f64);
            base + grad * step
        } else {
            base
        };
        out.set(i, c);
    }
    out
}

/// `∂c/∂x, ∂c/∂y` at a valid pixel from valid neighbors (central where
/// possible, one-sided otherwise, zero when isolated).
fn local_gradient(map: &CorrespondenceMap, x: usize, y: usize) -> Matrix3x2<f64> {
    let (w, h) = (map.width() as usize, map.height() as usize);
    let at = |x: isize, y: isize| -> Option<Vector3<f64>> {
        (x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h)
            .then(|| map.coord(x as u32, y as u32))
            .flatten()
    };
    let (xi, yi) = (x as isize, y as isize);
    let c = map.coords()[y * w + x];
    let diff = |prev: Option<Vector3<f64>>, next: Option<Vector3<f64>>| match (prev, next) {
        (Some(p), Some(n)) => (n - p) * 0.5,
        (None, Some(n)) => n - c,
        (Some(p), None) => c - p,
        (None, None) => Vector3::zeros(),
    };
    let gx = diff(at(xi - 1, yi), at(xi + 1, yi));
    let gy = diff(at(xi, yi - 1), at(xi, yi + 1));
    Matrix3x2::from_columns(&[gx, gy])
}

/// Exact squared Euclidean distance transform with nearest-feature indices
/// (two separable passes of the lower-envelope algorithm). Pixels with no
/// feature anywhere get `f64::INFINITY` and index `usize::MAX`.
pub(crate) fn feature_transform(feature: &[bool], w: usize, h: usize) -> (Vec<f64>, Vec<usize>) {
    // Column pass: distance to, and row of, the nearest feature in the column.
    let mut col_d = vec![f64::INFINITY; w * h];
    let mut col_row = vec![usize::MAX; w * h];
    let mut f = vec![0.0; h.max(w)];
    let mut d = vec![0.0; h.max(w)];
    let mut arg = vec![0usize; h.max(w)];
    for x in 0..w {
        for y in 0..h {
            f[y] = if feature[y * w + x] { 0.0 } else { f64::INFINITY };
        }
        dt_1d(&f[..h], &mut d[..h], &mut arg[..h]);
        for y in 0..h {
            col_d[y * w + x] = d[y];
            col_row[y * w + x] = arg[y];
        }
    }
    // Row pass over the column distances.
    let mut dist = vec![f64::INFINITY; w * h];
    let mut nearest = vec![usize::MAX; w * h];
    for y in 0..h {
        f[..w].copy_from_slice(&col_d[y * w..(y + 1) * w]);
        dt_1d(&f[..w], &mut d[..w], &mut arg[..w]);
        for x in 0..w {
            if d[x].is_finite() {
                dist[y * w + x] = d[x];
                let fx = arg[x];
                nearest[y * w + x] = col_row[y * w + fx] * w + fx;
            }
        }
    }
    (dist, nearest)
}

/// `d[q] = min_p (q − p)² + f[p]` and its argmin, over finite `f[p]`.
fn dt_1d(f: &[f64], d: &mut [f64], arg: &mut [usize]) {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&p| f[p].is_finite()).collect();
    if sites.is_empty() {
        d.fill(f64::INFINITY);
        arg.fill(usize::MAX);
        return;
    }
    let mut v: Vec<usize> = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    let inter = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    for &q in &sites {
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.clear();
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = inter(q, p);
                    if s <= *z.last().expect("z tracks v") {
                        v.pop();
                        z.pop();
                        if v.is_empty() {
                            z.clear();
                        }
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    let mut j = 0;
    for q in 0..n {
        while j + 1 < v.len() && z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
        arg[q] = p;
    }
}

/// Gaussian blur of the coordinates inside the mask (normalized
/// convolution: background neither contributes nor receives values).
fn blur_coords(map: &CorrespondenceMap, sigma: f64) -> CorrespondenceMap {
    let (w, h) = (map.width() as usize, map.height() as usize);
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    // Channels 0..3: mask-weighted coordinates, channel 3: mask weight.
    let mut buf: Vec<[f64; 4]> = map
        .coords()
        .iter()
        .zip(map.mask())
        .map(|(c, &m)| if m { [c.x, c.y, c.z, 1.0] } else { [0.0; 4] })
        .collect();
    let mut tmp = vec![[0.0; 4]; w * h];
    for pass in 0..2 {
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; 4];
                for (t, kv) in kernel.iter().enumerate() {
                    let o = t as isize - r;
                    let (sx, sy) = if pass == 0 { (x as isize + o, y as isize) } else { (x as isize, y as isize + o) };
                    if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize {
                        continue;
                    }
                    let s = buf[sy as usize * w + sx as usize];
                    for c in 0..4 {
                        acc[c] += kv * s[c];
                    }
                }
                tmp[y * w + x] = acc;
            }
        }
        std::mem::swap(&mut buf, &mut tmp);
    }
    let mut out = map.clone();
    for i in 0..w * h {
        if map.mask()[i] {
            let [a, b, c, wt] = buf[i];
            out.set(i, Vector3::new(a, b, c) / wt);
        }
    }
    out
}

pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Deletes square blocks centered on randomly ordered valid pixels until
/// `fraction` of the valid pixels is gone.
fn coarse_dropout(map: &CorrespondenceMap, fraction: f64, seed: u64) -> CorrespondenceMap {
    let (w, h) = (map.width() as i64, map.height() as i64);
    let mut valid: Vec<usize> = (0..map.len()).filter(|&i| map.mask()[i]).collect();
    let target = (fraction * valid.len() as f64).round() as usize;
    let side = ((valid.len() as f64).sqrt() * DROPOUT_BLOCK_FRACTION).round().max(1.0) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    valid.shuffle(&mut rng);
    let mut out = map.clone();
    let mut removed = 0;
    'centers: for &center in &valid {
        if removed >= target {
            break;
        }
        if !out.mask()[center] {
            continue;
        }
        let (cx, cy) = (center as i64 % w, center as i64 / w);
        let y0 = cy - side / 2;
        let x0 = cx - side / 2;
        for y in y0.max(0)..(y0 + side).min(h) {
            for x in x0.max(0)..(x0 + side).min(w) {
                let i = (y * w + x) as usize;
                if out.mask()[i] {
                    out.clear(i);
                    removed += 1;
                    if removed >= target {
                        break 'centers;
                    }
                }
            }
        }
    }
    out
}

/// Fixed-frequency checkerboard offset of ±`amplitude` on all channels.
fn pattern(map: &CorrespondenceMap, amplitude: f64) -> CorrespondenceMap {
    let w = map.width();
    let mut out = map.clone();
    for i in 0..map.len() {
        if map.mask()[i] {
            let (x, y) = (i as u32 % w, i as u32 / w);
            let sign = if (x / PATTERN_PERIOD + y / PATTERN_PERIOD) % 2 == 0 { 1.0 } else { -1.0 };
            out.set(i, map.coords()[i].add_scalar(sign * amplitude));
        }
    }
    out
}

/// Additive iid Gaussian noise with standard deviation `sigma`, drawn for
/// valid pixels in row-major order, clamped into the unit cube.
fn noise(map: &CorrespondenceMap, sigma: f64, seed: u64) -> CorrespondenceMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = map.clone();
    for i in 0..map.len() {
        if map.mask()[i] {
            let z: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            out.set(i, map.coords()[i] + Vector3::from(z) * sigma);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_map(w: u32, h: u32, r: f64) -> CorrespondenceMap {
        let mut coords = Vec::new();
        let mut mask = Vec::new();
        let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let inside = dx * dx + dy * dy <= r * r;
                mask.push(inside);
                coords.push(if inside {
                    Vector3::new(0.5 + dx / (4.0 * r), 0.5 + dy / (4.0 * r), 0.5)
                } else {
                    Vector3::zeros()
                });
            }
        }
        CorrespondenceMap::from_parts(w, h, coords, mask, None).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in DegradationKind::ALL {
            assert_eq!(k.as_str().parse::<DegradationKind>().unwrap(), k);
        }
        assert!(matches!("smudge".parse::<DegradationKind>(), Err(Error::UnknownKind(_))));
        let e = serde_json::from_str::<DegradationSpec>(r#"{"kind":"smudge","severity":1}"#);
        assert!(e.unwrap_err().to_string().contains("unknown degradation kind"));
    }

    #[test]
    fn zero_severity_is_identity() {
        let map = disk_map(40, 30, 10.0);
        for k in DegradationKind::ALL {
            assert_eq!(degrade_map(&map, &DegradationSpec::new(k, 0.0), 1).unwrap(), map);
        }
    }

    #[test]
    fn negative_severity_is_rejected() {
        let map = disk_map(8, 8, 3.0);
        let spec = DegradationSpec::new(DegradationKind::SurfaceNoise, -0.1);
        assert!(degrade_map(&map, &spec, 0).is_err());
        let spec = DegradationSpec::new(DegradationKind::CoarseDropoutMask, 1.5);
        assert!(degrade_map(&map, &spec, 0).is_err());
    }

    #[test]
    fn dilate_grows_mask() {
        let map = disk_map(64, 64, 10.0);
        let spec = DegradationSpec::new(DegradationKind::BoundaryDilate, 3.0);
        let out = degrade_map(&map, &spec, 0).unwrap();
        assert!(out.valid_count() > map.valid_count());
        for i in 0..map.len() {
            if map.mask()[i] {
                assert!(out.mask()[i]);
                assert_eq!(out.coords()[i], map.coords()[i]);
            }
        }
    }

    #[test]
    fn bleed_extrapolates_linear_field() {
        let map = disk_map(64, 64, 12.0);
        let spec = DegradationSpec::new(DegradationKind::MaskBleed, 2.0);
        let out = degrade_map(&map, &spec, 0).unwrap();
        // The disk carries a linear field, so extrapolation continues it.
        let r = 12.0;
        for y in 0..64u32 {
            for x in 0..64u32 {
                let i = out.index(x, y);
                if out.mask()[i] && !map.mask()[i] {
                    let (dx, dy) = (x as f64 + 0.5 - 32.0, y as f64 + 0.5 - 32.0);
                    let want = Vector3::new(0.5 + dx / (4.0 * r), 0.5 + dy / (4.0 * r), 0.5);
                    assert!((out.coords()[i] - want).amax() < 1e-9, "{x},{y}");
                }
            }
        }
    }

    #[test]
    fn blur_of_constant_field_is_constant() {
        let mut map = disk_map(32, 32, 10.0);
        for i in 0..map.len() {
            if map.mask()[i] {
                map.set(i, Vector3::new(0.2, 0.4, 0.6));
            }
        }
        let out = degrade_map(&map, &DegradationSpec::new(DegradationKind::GaussianBlurCoords, 2.0), 0).unwrap();
        assert_eq!(out.mask(), map.mask());
        for i in 0..map.len() {
            if map.mask()[i] {
                assert!((out.coords()[i] - Vector3::new(0.2, 0.4, 0.6)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn pattern_alternates() {
        let mut map = CorrespondenceMap::empty(8, 8);
        for i in 0..64 {
            map.set(i, Vector3::repeat(0.5));
        }
        let out = degrade_map(&map, &DegradationSpec::new(DegradationKind::PatternArtifact, 0.1), 0).unwrap();
        assert!((out.coord(0, 0).unwrap().x - 0.6).abs() < 1e-12);
        assert!((out.coord(4, 0).unwrap().x - 0.4).abs() < 1e-12);
        assert!((out.coord(4, 4).unwrap().x - 0.6).abs() < 1e-12);
    }

    #[test]
    fn distance_transform_matches_scan() {
        let map = disk_map(23, 17, 6.0);
        let feat: Vec<bool> = map.mask().iter().map(|m| !m).collect();
        let (d, idx) = feature_transform(&feat, 23, 17);
        for q in 0..23 * 17 {
            let (qx, qy) = ((q % 23) as f64, (q / 23) as f64);
            let best = (0..23 * 17)
                .filter(|&p| feat[p])
                .map(|p| {
                    let (px, py) = ((p % 23) as f64, (p / 23) as f64);
                    (px - qx).powi(2) + (py - qy).powi(2)
                })
                .fold(f64::INFINITY, f64::min);
            assert_eq!(d[q], best);
            let (px, py) = ((idx[q] % 23) as f64, (idx[q] / 23) as f64);
            assert_eq!((px - qx).powi(2) + (py - qy).powi(2), best);
        }
    }

    #[test]
    fn distance_transform_without_features() {
        let (d, idx) = feature_transform(&[false; 6], 3, 2);
        assert!(d.iter().all(|v| v.is_infinite()));
        assert!(idx.iter().all(|&i| i == usize::MAX));
    }
}
