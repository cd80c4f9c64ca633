use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{epnp, reprojection_error, Correspondence2D3D};
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::Pose;

const SAMPLE_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub max_iterations: usize,
    /// Reprojection error bound for inliers, pixels.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    /// Early-exit confidence that an all-inlier sample has been drawn.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            inlier_threshold: 2.0,
            min_inliers: 6,
            confidence: 0.99,
            seed: 0,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter("max_iterations must be ≥ 1".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "inlier_threshold must be > 0".into(),
            ));
        }
        if self.min_inliers < SAMPLE_SIZE {
            return Err(Error::InvalidParameter("min_inliers must be ≥ 4".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidParameter(
                "confidence must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub pose: Pose,
    /// Indices into the input correspondences, ascending.
    pub inlier_indices: Vec<usize>,
    pub mean_inlier_reprojection_error: f64,
}

#[derive(Serialize)]
struct PoseEstimateRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
    inlier_count: usize,
    mean_error: f64,
}

impl Serialize for PoseEstimate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let t = self.pose.translation;
        PoseEstimateRepr {
            rotation: self.pose.rotation_row_major(),
            translation: [t.x, t.y, t.z],
            inlier_count: self.inlier_indices.len(),
            mean_error: self.mean_inlier_reprojection_error,
        }
        .serialize(s)
    }
}

struct Scored {
    pose: Pose,
    inliers: Vec<usize>,
    mean_error: f64,
}

impl Scored {
    fn better_than(&self, other: &Scored) -> bool {
        self.inliers.len() > other.inliers.len()
            || (self.inliers.len() == other.inliers.len() && self.mean_error < other.mean_error)
    }
}

fn score(corrs: &[Correspondence2D3D], pose: Pose, k: &CameraIntrinsics, threshold: f64) -> Scored {
    let mut inliers = Vec::new();
    let mut sum = 0.0;
    for (i, c) in corrs.iter().enumerate() {
        let e = reprojection_error(c, &pose, k);
        if e <= threshold {
            inliers.push(i);
            sum += e;
        }
    }
    let mean_error = if inliers.is_empty() {
        f64::INFINITY
    } else {
        sum / inliers.len() as f64
    };
    Scored {
        pose,
        inliers,
        mean_error,
    }
}

/// Iterations needed to draw one all-inlier sample with `confidence`, given
/// inlier ratio `w`.
fn required_iterations(w: f64, confidence: f64) -> f64 {
    let p_good = w.powi(SAMPLE_SIZE as i32);
    if p_good >= 1.0 {
        return 0.0;
    }
    if p_good <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - confidence).ln() / (1.0 - p_good).ln()
}

/// Hypothesize-and-verify pose estimation.
///
/// Each iteration solves EPnP on 4 distinct correspondences drawn from a
/// seeded generator and counts inliers; ties in inlier count go to the lower
/// mean error, then to the earlier hypothesis. The winner is re-estimated on
/// all of its inliers and kept if that does not lose inliers.
pub fn ransac_pnp(
    corrs: &[Correspondence2D3D],
    k: &CameraIntrinsics,
    params: &RansacParams,
) -> Result<PoseEstimate> {
    params.validate()?;
    if corrs.len() < params.min_inliers {
        return Err(Error::InsufficientData {
            needed: params.min_inliers,
            got: corrs.len(),
        });
    }
    let n = corrs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Scored> = None;
    let mut sample = Vec::with_capacity(SAMPLE_SIZE);

    for it in 0..params.max_iterations {
        sample.clear();
        sample.extend(
            rand::seq::index::sample(&mut rng, n, SAMPLE_SIZE)
                .iter()
                .map(|i| corrs[i]),
        );
        let Ok(pose) = epnp(&sample, k) else {
            continue;
        };
        let cand = score(corrs, pose, k, params.inlier_threshold);
        if best.as_ref().is_none_or(|b| cand.better_than(b)) {
            best = Some(cand);
        }
        let b = best.as_ref().expect("set above");
        let w = b.inliers.len() as f64 / n as f64;
        if (it + 1) as f64 >= required_iterations(w, params.confidence) {
            break;
        }
    }

    let best_count = best.as_ref().map_or(0, |b| b.inliers.len());
    let Some(best) = best.filter(|b| b.inliers.len() >= params.min_inliers) else {
        return Err(Error::NoConsensus {
            best: best_count,
            required: params.min_inliers,
        });
    };

    let subset: Vec<Correspondence2D3D> = best.inliers.iter().map(|&i| corrs[i]).collect();
    let refined = epnp(&subset, k)
        .ok()
        .map(|pose| score(corrs, pose, k, params.inlier_threshold))
        .filter(|r| r.inliers.len() >= best.inliers.len());
    let chosen = refined.unwrap_or(best);
    Ok(PoseEstimate {
        pose: chosen.pose,
        inlier_indices: chosen.inliers,
        mean_inlier_reprojection_error: chosen.mean_error,
    })
}
