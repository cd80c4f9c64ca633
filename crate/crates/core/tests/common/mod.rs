//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use nocs_pose::geometry::random_rotation;
use nocs_pose::{project, CameraIntrinsics, CorrespondenceMap, Pose};
use rand::Rng;

pub fn lm_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(572.4114, 573.57043, 325.2611, 242.04899, 640, 480).unwrap()
}

/// Pose with a random rotation and the origin at depth `z` near the optical axis.
pub fn random_pose<R: Rng>(rng: &mut R, z: (f64, f64)) -> Pose {
    let t = Vector3::new(
        rng.random_range(-60.0..60.0),
        rng.random_range(-60.0..60.0),
        rng.random_range(z.0..z.1),
    );
    Pose::new(random_rotation(rng), t).unwrap()
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, half: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)))
        .collect()
}

pub fn rotation_about_origin<R: Rng>(rng: &mut R) -> Pose {
    Pose::new(random_rotation(rng), Vector3::zeros()).unwrap()
}

pub fn add_oracle(gt: &Pose, est: &Pose, pts: &[Vector3<f64>]) -> f64 {
    pts.iter().map(|p| (gt.transform(p) - est.transform(p)).norm()).sum::<f64>() / pts.len() as f64
}

pub fn adds_oracle(gt: &Pose, est: &Pose, pts: &[Vector3<f64>]) -> f64 {
    pts.iter()
        .map(|p| {
            let g = gt.transform(p);
            pts.iter().map(|q| (g - est.transform(q)).norm()).fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / pts.len() as f64
}

pub fn mssd_oracle(gt: &Pose, est: &Pose, pts: &[Vector3<f64>], syms: &[Pose]) -> f64 {
    let mut best = f64::INFINITY;
    for s in syms {
        let mut worst: f64 = 0.0;
        for p in pts {
            let e = est.transform(&s.transform(p));
            worst = worst.max((e - gt.transform(p)).norm());
        }
        best = best.min(worst);
    }
    best
}

pub fn mspd_oracle(gt: &Pose, est: &Pose, pts: &[Vector3<f64>], syms: &[Pose], k: &CameraIntrinsics) -> f64 {
    let mut best = f64::INFINITY;
    for s in syms {
        let mut worst: f64 = 0.0;
        for p in pts {
            let e = project(&s.transform(p), est, k).unwrap();
            worst = worst.max((e - project(p, gt, k).unwrap()).norm());
        }
        best = best.min(worst);
    }
    best
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for t in i..=j {
                r[idx[t]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Disk of valid pixels (pixel centers within `r` of the image center)
/// carrying a smooth coordinate field.
pub fn disk_map(w: u32, h: u32, r: f64) -> CorrespondenceMap {
    let mut coords = Vec::new();
    let mut mask = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 + 0.5 - w as f64 / 2.0;
            let dy = y as f64 + 0.5 - h as f64 / 2.0;
            let inside = dx * dx + dy * dy <= r * r;
            mask.push(inside);
            coords.push(if inside {
                Vector3::new(0.5 + 0.4 * dx / r, 0.5 + 0.4 * dy / r, 0.5 + 0.2 * (dx * dy) / (r * r))
            } else {
                Vector3::zeros()
            });
        }
    }
    CorrespondenceMap::from_parts(w, h, coords, mask, None).unwrap()
}

/// Erosion by the disk `{(dx, dy) : dx² + dy² ≤ r²}` by direct scan; pixels
/// outside the image count as background.
pub fn erosion_oracle(mask: &[bool], w: usize, h: usize, r: f64) -> Vec<bool> {
    let ri = r.floor() as isize;
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            if !mask[y as usize * w + x as usize] {
                continue;
            }
            let mut keep = true;
            'scan: for dy in -ri..=ri {
                for dx in -ri..=ri {
                    if ((dx * dx + dy * dy) as f64) > r * r {
                        continue;
                    }
                    let (sx, sy) = (x + dx, y + dy);
                    if sx < 0 || sy < 0 || sx >= w as isize || sy >= h as isize || !mask[sy as usize * w + sx as usize] {
                        keep = false;
                        break 'scan;
                    }
                }
            }
            out[y as usize * w + x as usize] = keep;
        }
    }
    out
}

pub fn is_rotation(m: &Matrix3<f64>) -> bool {
    (m.transpose() * m - Matrix3::identity()).amax() < 1e-9 && (m.determinant() - 1.0).abs() < 1e-9
}
