//! EPnP: the 3D points are expressed as affine combinations of a few
//! control points, whose camera-frame positions are recovered from the null
//! space of a linear system and the rigidity of the control-point
//! distances.
//!
//! Four control points are used in general position. When the points are
//! planar (smallest principal extent below [`PLANARITY_RATIO`] of the
//! largest) three in-plane control points are used instead.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::Correspondence2D3D;
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Principal-extent ratio below which points count as planar, and (for the
/// second axis) as collinear.
pub const PLANARITY_RATIO: f64 = 1e-6;

const GAUSS_NEWTON_ITERATIONS: usize = 50;
const STEP_HALVINGS: usize = 8;

struct ControlFrame {
    /// Control points in the model frame.
    world: Vec<Vector3<f64>>,
    /// Per-point affine weights, `alphas[i][j]` for control point `j`.
    alphas: Vec<[f64; 4]>,
}

pub fn epnp(corrs: &[Correspondence2D3D], k: &CameraIntrinsics) -> Result<Pose> {
    if corrs.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: corrs.len(),
        });
    }
    let frame = control_frame(corrs)?;
    let nc = frame.world.len();

    let mtm = build_mtm(corrs, &frame, k);
    let eig = SymmetricEigen::new(mtm);
    let mut order: Vec<usize> = (0..3 * nc).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    // Null-space basis, smallest eigenvalue first.
    let kernel: Vec<DVector<f64>> = order[..nc]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();

    let pairs: Vec<(usize, usize)> = (0..nc)
        .flat_map(|a| (a + 1..nc).map(move |b| (a, b)))
        .collect();
    let rho = DVector::from_iterator(
        pairs.len(),
        pairs
            .iter()
            .map(|&(a, b)| (frame.world[a] - frame.world[b]).norm_squared()),
    );
    let l = BetaSystem::new(&kernel, &pairs, nc);

    let mut guesses = l.initial_guesses(&rho);
    for depths in weak_perspective_depths(corrs, k) {
        guesses.extend(
            ray_depth_guess(corrs, &frame, &kernel, k, &depths).and_then(|b| l.fit_scale(b, &rho)),
        );
    }

    let mut best: Option<(f64, Pose)> = None;
    for init in guesses {
        let betas = l.gauss_newton(init, &rho);
        let Some(pose) = pose_from_betas(&betas, &kernel, &frame) else {
            continue;
        };
        let err = mean_reprojection_error(corrs, &pose, k);
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, pose));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::DegenerateConfiguration("no finite EPnP solution".into()))
}

fn control_frame(corrs: &[Correspondence2D3D]) -> Result<ControlFrame> {
    let n = corrs.len() as f64;
    let centroid = corrs.iter().map(|c| c.point).sum::<Vector3<f64>>() / n;
    let cov = corrs.iter().fold(Matrix3::zeros(), |acc, c| {
        let d = c.point - centroid;
        acc + d * d.transpose()
    });
    if !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateConfiguration(
            "non-finite 3D points".into(),
        ));
    }
    let eig = SymmetricEigen::new(cov);
    let mut axes: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| {
            (
                eig.eigenvalues[i].max(0.0),
                eig.eigenvectors.column(i).into_owned(),
            )
        })
        .collect();
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let extent: Vec<f64> = axes.iter().map(|a| (a.0 / n).sqrt()).collect();
    if !(extent[0] > 0.0) {
        return Err(Error::DegenerateConfiguration(
            "all 3D points coincide".into(),
        ));
    }
    if extent[1] < PLANARITY_RATIO * extent[0] {
        return Err(Error::DegenerateConfiguration(
            "3D points are collinear".into(),
        ));
    }
    let planar = extent[2] < PLANARITY_RATIO * extent[0];
    let used = if planar { 2 } else { 3 };

    let mut world = vec![centroid];
    world.extend((0..used).map(|a| centroid + axes[a].1 * extent[a]));
    // The control axes are orthogonal, so the affine weights are plain
    // projections onto them.
    let alphas = corrs
        .iter()
        .map(|c| {
            let d = c.point - centroid;
            let mut w = [0.0; 4];
            for a in 0..used {
                w[a + 1] = axes[a].1.dot(&d) / extent[a];
            }
            w[0] = 1.0 - w[1..].iter().sum::<f64>();
            w
        })
        .collect();
    Ok(ControlFrame { world, alphas })
}

/// `MᵀM` where each correspondence contributes the two rows
/// `[αⱼ, 0, −αⱼ·u]` and `[0, αⱼ, −αⱼ·v]` (normalized image coordinates).
fn build_mtm(
    corrs: &[Correspondence2D3D],
    frame: &ControlFrame,
    k: &CameraIntrinsics,
) -> DMatrix<f64> {
    let nc = frame.world.len();
    let dim = 3 * nc;
    let mut mtm = DMatrix::<f64>::zeros(dim, dim);
    let mut r1 = vec![0.0; dim];
    let mut r2 = vec![0.0; dim];
    for (c, alpha) in corrs.iter().zip(&frame.alphas) {
        let uv = k.normalize(&c.pixel);
        for j in 0..nc {
            let a = alpha[j];
            r1[3 * j] = a;
            r1[3 * j + 1] = 0.0;
            r1[3 * j + 2] = -a * uv.x;
            r2[3 * j] = 0.0;
            r2[3 * j + 1] = a;
            r2[3 * j + 2] = -a * uv.y;
        }
        for i in 0..dim {
            let (a1, a2) = (r1[i], r2[i]);
            if a1 == 0.0 && a2 == 0.0 {
                continue;
            }
            for j in i..dim {
                mtm[(i, j)] += a1 * r1[j] + a2 * r2[j];
            }
        }
    }
    mtm.fill_lower_triangle_with_upper_triangle();
    mtm
}

/// The quadratic system `L · ββ = ρ` relating products of null-space
/// weights to squared control-point distances.
struct BetaSystem {
    /// Columns indexed by `product_index(a, b)` for `a ≤ b`.
    l: DMatrix<f64>,
    nc: usize,
}

#[inline]
fn product_index(a: usize, b: usize, nc: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    // Row-major upper triangle.
    a * nc - a * (a + 1) / 2 + b
}

impl BetaSystem {
    fn new(kernel: &[DVector<f64>], pairs: &[(usize, usize)], nc: usize) -> Self {
        let cols = nc * (nc + 1) / 2;
        let mut l = DMatrix::zeros(pairs.len(), cols);
        for (row, &(i, j)) in pairs.iter().enumerate() {
            let dv: Vec<Vector3<f64>> = kernel
                .iter()
                .map(|v| {
                    Vector3::new(v[3 * i], v[3 * i + 1], v[3 * i + 2])
                        - Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2])
                })
                .collect();
            for a in 0..nc {
                for b in a..nc {
                    let f = if a == b { 1.0 } else { 2.0 };
                    l[(row, product_index(a, b, nc))] = f * dv[a].dot(&dv[b]);
                }
            }
        }
        Self { l, nc }
    }

    fn solve_columns(&self, cols: &[usize], rho: &DVector<f64>) -> Option<DVector<f64>> {
        let sub = DMatrix::from_fn(self.l.nrows(), cols.len(), |r, c| self.l[(r, cols[c])]);
        sub.svd(true, true).solve(rho, 1e-12).ok()
    }

    /// The linearized initializations: every β scaled off β₁, then the
    /// two- and three-vector relaxations.
    fn initial_guesses(&self, rho: &DVector<f64>) -> Vec<Vec<f64>> {
        let nc = self.nc;
        let pi = |a, b| product_index(a, b, nc);
        let mut out = Vec::new();

        let cols: Vec<usize> = (0..nc).map(|b| pi(0, b)).collect();
        if let Some(x) = self.solve_columns(&cols, rho) {
            let mut betas = vec![0.0; nc];
            let b0 = x[0].abs().sqrt();
            if b0 > 0.0 {
                let sign = if x[0] < 0.0 { -1.0 } else { 1.0 };
                betas[0] = b0;
                for b in 1..nc {
                    betas[b] = sign * x[b] / b0;
                }
                out.push(betas);
            }
        }

        let two = |x: &DVector<f64>| -> Vec<f64> {
            let mut betas = vec![0.0; nc];
            if x[0] < 0.0 {
                betas[0] = (-x[0]).sqrt();
                betas[1] = if x[2] < 0.0 { (-x[2]).sqrt() } else { 0.0 };
            } else {
                betas[0] = x[0].sqrt();
                betas[1] = if x[2] > 0.0 { x[2].sqrt() } else { 0.0 };
            }
            if x[1] < 0.0 {
                betas[0] = -betas[0];
            }
            betas
        };
        if let Some(x) = self.solve_columns(&[pi(0, 0), pi(0, 1), pi(1, 1)], rho) {
            out.push(two(&x));
        }
        if nc == 4 {
            if let Some(x) =
                self.solve_columns(&[pi(0, 0), pi(0, 1), pi(1, 1), pi(0, 2), pi(1, 2)], rho)
            {
                let mut betas = two(&x);
                if betas[0] != 0.0 {
                    betas[2] = x[3] / betas[0];
                }
                out.push(betas);
            }
        }
        out.retain(|b| b.iter().all(|v| v.is_finite()));
        out
    }

    /// Rescales `betas` so the distances best match `rho` in least squares.
    fn fit_scale(&self, betas: Vec<f64>, rho: &DVector<f64>) -> Option<Vec<f64>> {
        let pred = rho - self.residual(&betas, rho);
        let s2 = pred.dot(rho) / pred.norm_squared();
        (s2 > 0.0 && s2.is_finite()).then(|| betas.iter().map(|b| b * s2.sqrt()).collect())
    }

    fn residual(&self, betas: &[f64], rho: &DVector<f64>) -> DVector<f64> {
        let nc = self.nc;
        let mut prod = DVector::zeros(self.l.ncols());
        for a in 0..nc {
            for b in a..nc {
                prod[product_index(a, b, nc)] = betas[a] * betas[b];
            }
        }
        rho - &self.l * prod
    }

    /// Gauss-Newton on the distance constraints over all β.
    fn gauss_newton(&self, mut betas: Vec<f64>, rho: &DVector<f64>) -> Vec<f64> {
        let nc = self.nc;
        let mut r = self.residual(&betas, rho);
        let mut cost = r.norm_squared();
        for _ in 0..GAUSS_NEWTON_ITERATIONS {
            // d(L·ββ)/dβₖ = Σⱼ L[(k,j)]·βⱼ, with the diagonal term doubled.
            let jac = DMatrix::from_fn(self.l.nrows(), nc, |row, kk| {
                (0..nc)
                    .map(|j| {
                        let c = self.l[(row, product_index(kk, j, nc))];
                        if j == kk {
                            2.0 * c * betas[j]
                        } else {
                            c * betas[j]
                        }
                    })
                    .sum()
            });
            let Ok(step) = jac.svd(true, true).solve(&r, 1e-12) else {
                break;
            };
            // Full Gauss-Newton step, halved until the cost drops.
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..STEP_HALVINGS {
                let trial: Vec<f64> = betas.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
                let tr = self.residual(&trial, rho);
                let tc = tr.norm_squared();
                if tc < cost {
                    betas = trial;
                    r = tr;
                    cost = tc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        betas
    }
}

/// Depths of the reference points under a scaled-orthographic fit of the
/// observations, one set per branch of the weak-perspective depth-flip
/// ambiguity. Close to the truth whenever the object is small relative to
/// its distance; this is what makes the four-point case (four-dimensional
/// kernel) converge.
fn weak_perspective_depths(corrs: &[Correspondence2D3D], k: &CameraIntrinsics) -> Vec<Vec<f64>> {
    let n = corrs.len() as f64;
    let rays: Vec<_> = corrs.iter().map(|c| k.normalize(&c.pixel)).collect();
    let c3 = corrs.iter().map(|c| c.point).sum::<Vector3<f64>>() / n;
    let c2 = rays.iter().sum::<nalgebra::Vector2<f64>>() / n;
    let mut cross = nalgebra::Matrix2x3::<f64>::zeros();
    let mut cov = Matrix3::<f64>::zeros();
    for (c, r) in corrs.iter().zip(&rays) {
        let d3 = c.point - c3;
        cross += (r - c2) * d3.transpose();
        cov += d3 * d3.transpose();
    }
    // Affine camera `A` with `r − r̄ ≈ A·(X − X̄)`; pseudo-inverse covers planar sets.
    let Some(cov_inv) = cov.pseudo_inverse(1e-12 * cov.amax()).ok() else {
        return Vec::new();
    };
    let affine = cross * cov_inv;
    let svd = affine.svd(true, true);
    let (Some(u), Some(vt)) = (svd.u, svd.v_t) else {
        return Vec::new();
    };
    let scale = 0.5 * (svd.singular_values[0] + svd.singular_values[1]);
    if !(scale > 0.0) {
        return Vec::new();
    }
    let rows = u * vt;
    let axis = Vector3::new(rows[(0, 0)], rows[(0, 1)], rows[(0, 2)])
        .cross(&Vector3::new(rows[(1, 0)], rows[(1, 1)], rows[(1, 2)]));
    [1.0, -1.0]
        .iter()
        .map(|sign| {
            corrs
                .iter()
                .map(|c| 1.0 / scale + sign * axis.dot(&(c.point - c3)))
                .collect()
        })
        .collect()
}

/// Kernel weights of the control points that best place every reference
/// point on its viewing ray at the given depth.
fn ray_depth_guess(
    corrs: &[Correspondence2D3D],
    frame: &ControlFrame,
    kernel: &[DVector<f64>],
    k: &CameraIntrinsics,
    depths: &[f64],
) -> Option<Vec<f64>> {
    let nc = frame.world.len();
    let a = DMatrix::from_fn(corrs.len(), nc, |i, j| frame.alphas[i][j]);
    let targets = DMatrix::from_fn(corrs.len(), 3, |i, axis| {
        let uv = k.normalize(&corrs[i].pixel);
        depths[i] * [uv.x, uv.y, 1.0][axis]
    });
    let ctrl = a.svd(true, true).solve(&targets, 1e-12).ok()?;
    let x = DVector::from_iterator(
        3 * nc,
        (0..nc).flat_map(|j| (0..3).map(move |c| (j, c))).map(|(j, c)| ctrl[(j, c)]),
    );
    Some(kernel.iter().map(|v| v.dot(&x)).collect())
}

fn pose_from_betas(betas: &[f64], kernel: &[DVector<f64>], frame: &ControlFrame) -> Option<Pose> {
    let nc = frame.world.len();
    let mut ctrl: Vec<Vector3<f64>> = (0..nc)
        .map(|j| {
            kernel
                .iter()
                .zip(betas)
                .fold(Vector3::zeros(), |acc, (v, &b)| {
                    acc + Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]) * b
                })
        })
        .collect();
    // The kernel is sign-ambiguous: put the reference points in front.
    let depth_sum: f64 = frame
        .alphas
        .iter()
        .map(|a| (0..nc).map(|j| a[j] * ctrl[j].z).sum::<f64>())
        .sum();
    if depth_sum < 0.0 {
        for c in &mut ctrl {
            *c = -*c;
        }
    }
    let pose = procrustes(&frame.world, &ctrl)?;
    pose.rotation
        .iter()
        .chain(pose.translation.iter())
        .all(|v| v.is_finite())
        .then_some(pose)
}

/// Rigid transform `R, t` minimizing `Σ ‖R·src + t − dst‖²`.
fn procrustes(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Option<Pose> {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let h = src.iter().zip(dst).fold(Matrix3::zeros(), |acc, (s, d)| {
        acc + (d - cd) * (s - cs).transpose()
    });
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let d = (u * vt).determinant().signum();
    let rotation = u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt;
    Some(Pose {
        rotation,
        translation: cd - rotation * cs,
    })
}

fn mean_reprojection_error(corrs: &[Correspondence2D3D], pose: &Pose, k: &CameraIntrinsics) -> f64 {
    corrs
        .iter()
        .map(|c| super::reprojection_error(c, pose, k))
        .sum::<f64>()
        / corrs.len() as f64
}
