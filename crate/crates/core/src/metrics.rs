//! Pose and map-quality metrics: ADD(-S), MSSD, MSPD, the VSD-free average
//! recall AR*, MSE and IoU.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, MIN_DEPTH};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::mesh::ModelInfo;
use crate::render::CorrespondenceMap;

/// ADD(-S) acceptance threshold as a fraction of the object diameter.
pub const ADD_RECALL_FRACTION: f64 = 0.1;

/// Metrics for one pose estimate and its correspondence map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "add_mm")]
    pub add: f64,
    #[serde(rename = "add_pass")]
    pub add_recall_pass: bool,
    pub mse: f64,
    pub iou: f64,
    #[serde(rename = "mssd_mm")]
    pub mssd: f64,
    #[serde(rename = "mspd_px")]
    pub mspd: f64,
}

impl MetricReport {
    pub const CSV_HEADER: [&'static str; 6] =
        ["add_mm", "add_pass", "mse", "iou", "mssd_mm", "mspd_px"];

    /// Computes every metric for an estimate against ground truth.
    pub fn evaluate(
        gt: &Pose,
        est: &Pose,
        points: &[Vector3<f64>],
        info: &ModelInfo,
        k: &CameraIntrinsics,
        est_map: &CorrespondenceMap,
        gt_map: &CorrespondenceMap,
    ) -> Result<Self> {
        let add = add_metric(gt, est, points, &info.symmetries)?;
        Ok(Self {
            add,
            add_recall_pass: add_recall(add, info, ADD_RECALL_FRACTION),
            mse: mse_maps(est_map, gt_map)?,
            iou: iou_maps(est_map, gt_map)?,
            mssd: mssd(gt, est, points, &info.symmetries)?,
            mspd: mspd(gt, est, points, &info.symmetries, k)?,
        })
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.add, self.add_recall_pass, self.mse, self.iou, self.mssd, self.mspd
        )
    }
}

fn is_identity(s: &Pose) -> bool {
    s.rotation == nalgebra::Matrix3::identity() && s.translation == Vector3::zeros()
}

fn check_symmetries(symmetries: &[Pose]) -> Result<()> {
    if !symmetries.iter().any(is_identity) {
        return Err(Error::InvalidParameter(
            "symmetry list must contain the identity".into(),
        ));
    }
    Ok(())
}

/// Average model-point distance between the ground-truth and estimated
/// poses.
///
/// With only the identity symmetry, points are compared one-to-one. Any
/// other symmetry selects the symmetric branch: each ground-truth point is
/// matched to the nearest estimated model point (over all model points, not
/// over the symmetry transforms).
pub fn add_metric(
    gt: &Pose,
    est: &Pose,
    points: &[Vector3<f64>],
    symmetries: &[Pose],
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    check_symmetries(symmetries)?;
    let n = points.len() as f64;
    if symmetries.len() == 1 {
        let sum: f64 = points
            .iter()
            .map(|x| (gt.transform(x) - est.transform(x)).norm())
            .sum();
        return Ok(sum / n);
    }
    let est_pts: Vec<Vector3<f64>> = points.iter().map(|x| est.transform(x)).collect();
    let grid = PointGrid::new(&est_pts);
    let sum: f64 = points
        .iter()
        .map(|x| grid.nearest_distance(&gt.transform(x)))
        .sum();
    Ok(sum / n)
}

/// `add ≤ k_m · diameter`.
pub fn add_recall(add: f64, info: &ModelInfo, k_m: f64) -> bool {
    add <= k_m * info.diameter
}

/// Maximum symmetry-aware surface distance, mm.
pub fn mssd(gt: &Pose, est: &Pose, points: &[Vector3<f64>], symmetries: &[Pose]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    check_symmetries(symmetries)?;
    let gt_pts: Vec<Vector3<f64>> = points.iter().map(|x| gt.transform(x)).collect();
    Ok(symmetries
        .iter()
        .map(|s| {
            let e = est.compose(s);
            points
                .iter()
                .zip(&gt_pts)
                .map(|(x, g)| (g - e.transform(x)).norm())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min))
}

/// Maximum symmetry-aware projection distance, pixels. Points that fall
/// behind the camera under either pose count as infinitely far.
pub fn mspd(
    gt: &Pose,
    est: &Pose,
    points: &[Vector3<f64>],
    symmetries: &[Pose],
    k: &CameraIntrinsics,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    check_symmetries(symmetries)?;
    let proj = |p: &Pose, x: &Vector3<f64>| {
        let c = p.transform(x);
        (c.z > MIN_DEPTH).then(|| k.project_camera_unchecked(&c))
    };
    let gt_px: Vec<_> = points.iter().map(|x| proj(gt, x)).collect();
    Ok(symmetries
        .iter()
        .map(|s| {
            let e = est.compose(s);
            points
                .iter()
                .zip(&gt_px)
                .map(|(x, g)| match (g, proj(&e, x)) {
                    (Some(g), Some(q)) => (g - q).norm(),
                    _ => f64::INFINITY,
                })
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min))
}

/// MSSD thresholds: 0.05·d to 0.5·d in steps of 0.05·d.
pub fn mssd_thresholds(diameter: f64) -> Vec<f64> {
    (1..=10).map(|i| 0.05 * i as f64 * diameter).collect()
}

/// MSPD thresholds: 5·r to 50·r in steps of 5·r, with r = image diagonal / 1000.
pub fn mspd_thresholds(k: &CameraIntrinsics) -> Vec<f64> {
    mspd_thresholds_for_diagonal(k.diagonal())
}

pub fn mspd_thresholds_for_diagonal(diagonal: f64) -> Vec<f64> {
    let r = diagonal / 1000.0;
    (1..=10).map(|i| 5.0 * i as f64 * r).collect()
}

/// Mean over thresholds of the fraction of errors strictly below each.
pub fn average_recall(errors: &[f64], thresholds: &[f64]) -> f64 {
    if errors.is_empty() || thresholds.is_empty() {
        return 0.0;
    }
    let hits: usize = thresholds
        .iter()
        .map(|&t| errors.iter().filter(|&&e| e < t).count())
        .sum();
    hits as f64 / (errors.len() * thresholds.len()) as f64
}

/// AR*: mean of the MSSD and MSPD average recalls. This is the BOP average
/// recall without its VSD term, so it is not comparable to published AR.
/// Failed estimates should be passed as `f64::INFINITY`.
pub fn average_recall_star(
    mssd_values: &[f64],
    mspd_values: &[f64],
    info: &ModelInfo,
    k: &CameraIntrinsics,
) -> Result<f64> {
    if mssd_values.is_empty() || mspd_values.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let ar_mssd = average_recall(mssd_values, &mssd_thresholds(info.diameter));
    let ar_mspd = average_recall(mspd_values, &mspd_thresholds(k));
    Ok(0.5 * (ar_mssd + ar_mspd))
}

/// Row-major multi-channel image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn new(width: u32, height: u32, channels: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != (width * height * channels) as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}×{height}×{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// The three coordinate channels of a map; background reads as 0.
    pub fn from_map(map: &CorrespondenceMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            channels: 3,
            data: map.coords().iter().flat_map(|c| [c.x, c.y, c.z]).collect(),
        }
    }
}

/// Mean squared error over all pixel-channel entries.
pub fn mse(est: &FloatImage, gt: &FloatImage) -> Result<f64> {
    if (est.width, est.height, est.channels) != (gt.width, gt.height, gt.channels) {
        return Err(Error::DimensionMismatch(format!(
            "{}×{}×{} vs {}×{}×{}",
            est.width, est.height, est.channels, gt.width, gt.height, gt.channels
        )));
    }
    if est.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = est
        .data
        .iter()
        .zip(&gt.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / est.data.len() as f64)
}

pub fn mse_maps(est: &CorrespondenceMap, gt: &CorrespondenceMap) -> Result<f64> {
    mse(&FloatImage::from_map(est), &FloatImage::from_map(gt))
}

/// Intersection over union of two masks; 1.0 when both are empty.
pub fn iou(est: &[bool], gt: &[bool]) -> Result<f64> {
    if est.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask sizes {} vs {}",
            est.len(),
            gt.len()
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in est.iter().zip(gt) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

pub fn iou_maps(est: &CorrespondenceMap, gt: &CorrespondenceMap) -> Result<f64> {
    if (est.width(), est.height()) != (gt.width(), gt.height()) {
        return Err(Error::DimensionMismatch(format!(
            "{}×{} vs {}×{}",
            est.width(),
            est.height(),
            gt.width(),
            gt.height()
        )));
    }
    iou(est.mask(), gt.mask())
}

/// Uniform grid over a point set for exact nearest-neighbor queries.
struct PointGrid<'a> {
    points: &'a [Vector3<f64>],
    origin: Vector3<f64>,
    cell: f64,
    dims: [usize; 3],
    /// CSR layout: points of cell `c` are `order[starts[c]..starts[c + 1]]`.
    starts: Vec<usize>,
    order: Vec<u32>,
}

impl<'a> PointGrid<'a> {
    fn new(points: &'a [Vector3<f64>]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).max();
        let target = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = if extent > 0.0 { extent / target } else { 1.0 };
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1));
        let mut grid = Self {
            points,
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let ncells = dims[0] * dims[1] * dims[2];
        let cell_of: Vec<usize> = points.iter().map(|p| grid.flat(grid.cell_of(p))).collect();
        let mut counts = vec![0usize; ncells + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for i in 0..ncells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0u32; points.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c]] = i as u32;
            fill[c] += 1;
        }
        grid.starts = counts;
        grid.order = order;
        grid
    }

    fn cell_of(&self, p: &Vector3<f64>) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let f = ((p[a] - self.origin[a]) / self.cell).floor();
            (f.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    #[inline]
    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Exact Euclidean distance to the nearest grid point.
    ///
    /// Cells are visited in Chebyshev rings around the query cell; after
    /// ring `r`, every unvisited point is at least `r · cell` away.
    fn nearest_distance(&self, q: &Vector3<f64>) -> f64 {
        let c = self.cell_of(q);
        let max_r = *self.dims.iter().max().expect("three axes");
        let mut best = f64::INFINITY;
        for r in 0..=max_r {
            let r_i = r as isize;
            for dz in -r_i..=r_i {
                for dy in -r_i..=r_i {
                    for dx in -r_i..=r_i {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r_i {
                            continue;
                        }
                        let cc = [c[0] as isize + dx, c[1] as isize + dy, c[2] as isize + dz];
                        if (0..3).any(|a| cc[a] < 0 || cc[a] >= self.dims[a] as isize) {
                            continue;
                        }
                        let f = self.flat(cc.map(|v| v as usize));
                        for &i in &self.order[self.starts[f]..self.starts[f + 1]] {
                            best = best.min((self.points[i as usize] - q).norm_squared());
                        }
                    }
                }
            }
            let bound = r as f64 * self.cell;
            if best <= bound * bound {
                break;
            }
        }
        best.sqrt()
    }
}
