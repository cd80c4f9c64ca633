//! Correspondence maps and the z-buffered software rasterizer that renders
//! them.
//!
//! Pixel `(x, y)` is sampled at `(x + 0.5, y + 0.5)`. Shared edges follow the
//! top-left rule, so every pixel on an edge between two triangles is drawn
//! exactly once.

use image::{Rgb, RgbImage};
use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::mesh::{nocs_to_model, NocsMesh};

/// Triangles with any vertex closer than this to the camera plane (mm) are
/// culled.
pub const NEAR_PLANE: f64 = 1.0;
/// Replaces an exact `(0, 0, 0)` on a valid pixel so it cannot be mistaken
/// for the background sentinel.
pub const ORIGIN_LIFT: f64 = 1e-9;

fn lift_origin(c: Vector3<f64>) -> Vector3<f64> {
    if c == Vector3::zeros() {
        Vector3::repeat(ORIGIN_LIFT)
    } else {
        c
    }
}

const BAND_ROWS: usize = 16;

/// Per-pixel NOCS coordinates with a validity mask and optional depth.
///
/// Background pixels hold the `(0, 0, 0)` sentinel and no depth.
/// Equality compares depth bit-for-bit, so absent (NaN) entries match.
#[derive(Debug, Clone)]
pub struct CorrespondenceMap {
    width: u32,
    height: u32,
    coords: Vec<Vector3<f64>>,
    mask: Vec<bool>,
    depth: Option<Vec<f64>>,
}

impl PartialEq for CorrespondenceMap {
    fn eq(&self, o: &Self) -> bool {
        let depth_eq = match (&self.depth, &o.depth) {
            (None, None) => true,
            (Some(a), Some(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            _ => false,
        };
        self.width == o.width && self.height == o.height && self.mask == o.mask && self.coords == o.coords && depth_eq
    }
}

impl CorrespondenceMap {
    /// All-background map.
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            coords: vec![Vector3::zeros(); n],
            mask: vec![false; n],
            depth: None,
        }
    }

    /// Builds a map from raw channels and checks the background and range
    /// invariants. `depth` entries of background pixels are ignored.
    pub fn from_parts(
        width: u32,
        height: u32,
        coords: Vec<Vector3<f64>>,
        mask: Vec<bool>,
        depth: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = width as usize * height as usize;
        if coords.len() != n || mask.len() != n || depth.as_ref().is_some_and(|d| d.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "channels do not match {width}×{height}"
            )));
        }
        let mut map = Self {
            width,
            height,
            coords,
            mask,
            depth,
        };
        for i in 0..n {
            if map.mask[i] {
                let c = map.coords[i];
                if !c.iter().all(|v| (0.0..=1.0).contains(v)) {
                    return Err(Error::Validation(format!(
                        "pixel {i} has coordinates {c:?} outside [0,1]"
                    )));
                }
                map.coords[i] = lift_origin(c);
            } else {
                map.clear(i);
            }
        }
        Ok(map)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn coords(&self) -> &[Vector3<f64>] {
        &self.coords
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn depth(&self) -> Option<&[f64]> {
        self.depth.as_deref()
    }

    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        self.mask[self.index(x, y)]
    }

    pub fn coord(&self, x: u32, y: u32) -> Option<Vector3<f64>> {
        let i = self.index(x, y);
        self.mask[i].then(|| self.coords[i])
    }

    pub fn depth_at(&self, x: u32, y: u32) -> Option<f64> {
        let i = self.index(x, y);
        match &self.depth {
            Some(d) if self.mask[i] && d[i].is_finite() => Some(d[i]),
            _ => None,
        }
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Marks pixel `i` as background.
    pub fn clear(&mut self, i: usize) {
        self.mask[i] = false;
        self.coords[i] = Vector3::zeros();
        if let Some(d) = &mut self.depth {
            d[i] = f64::NAN;
        }
    }

    /// Marks pixel `i` valid with `c` (clamped into the unit cube).
    pub fn set(&mut self, i: usize, c: Vector3<f64>) {
        self.mask[i] = true;
        self.coords[i] = lift_origin(c.map(|v| v.clamp(0.0, 1.0)));
    }

    pub fn drop_depth(&mut self) {
        self.depth = None;
    }

    /// Tight bounding box `(x, y, w, h)` of the valid pixels.
    pub fn mask_bbox(&self) -> Option<(u32, u32, u32, u32)> {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.mask[self.index(x, y)] {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        any.then(|| (x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

/// A triangle in screen space, oriented with positive area.
struct ScreenTri {
    p: [Vector2<f64>; 3],
    inv_z: [f64; 3],
    nocs: [Vector3<f64>; 3],
    area: f64,
    x_range: (usize, usize),
    y_range: (usize, usize),
    id: u32,
}

#[derive(Clone, Copy)]
struct Fragment {
    z: f64,
    nocs: Vector3<f64>,
    tri: u32,
}

#[inline]
fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// With positive-area orientation and y pointing down, edges going up are
/// left edges and horizontal edges going right are top edges.
#[inline]
fn is_top_left(a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

fn setup(nocs: &NocsMesh, pose: &Pose, k: &CameraIntrinsics) -> Vec<ScreenTri> {
    let cam: Vec<Vector3<f64>> = nocs
        .mesh
        .vertices()
        .iter()
        .map(|v| pose.transform(&nocs_to_model(v, &nocs.transform)))
        .collect();
    let (w, h) = (k.width as f64, k.height as f64);
    let mut out = Vec::new();
    for (id, t) in nocs.mesh.triangles().iter().enumerate() {
        let idx = t.map(|i| i as usize);
        if idx.iter().any(|&i| cam[i].z < NEAR_PLANE) {
            continue;
        }
        let mut p = idx.map(|i| k.project_camera_unchecked(&cam[i]));
        let mut inv_z = idx.map(|i| 1.0 / cam[i].z);
        let mut n = idx.map(|i| nocs.mesh.vertices()[i]);
        let mut area = edge(&p[0], &p[1], &p[2]);
        if !(area.abs() > 0.0) {
            continue;
        }
        if area < 0.0 {
            p.swap(1, 2);
            inv_z.swap(1, 2);
            n.swap(1, 2);
            area = -area;
        }
        let (lo_x, hi_x) = (
            p[0].x.min(p[1].x).min(p[2].x),
            p[0].x.max(p[1].x).max(p[2].x),
        );
        let (lo_y, hi_y) = (
            p[0].y.min(p[1].y).min(p[2].y),
            p[0].y.max(p[1].y).max(p[2].y),
        );
        if hi_x < 0.0 || hi_y < 0.0 || lo_x > w || lo_y > h {
            continue;
        }
        // Pixel x is covered only if its center x + 0.5 lies inside.
        let x0 = (lo_x - 0.5).ceil().max(0.0) as usize;
        let x1 = ((hi_x - 0.5).floor() + 1.0).clamp(0.0, w) as usize;
        let y0 = (lo_y - 0.5).ceil().max(0.0) as usize;
        let y1 = ((hi_y - 0.5).floor() + 1.0).clamp(0.0, h) as usize;
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        out.push(ScreenTri {
            p,
            inv_z,
            nocs: n,
            area,
            x_range: (x0, x1),
            y_range: (y0, y1),
            id: id as u32,
        });
    }
    out
}

/// Rasterizes all triangles into a per-pixel fragment buffer. Bands of rows
/// are processed in parallel; each pixel sees the triangles in index order
/// and keeps the strictly nearest one, so banding does not affect the result.
fn rasterize(tris: &[ScreenTri], width: u32, height: u32) -> Vec<Option<Fragment>> {
    let w = width as usize;
    let mut frags: Vec<Option<Fragment>> = vec![None; w * height as usize];
    frags
        .par_chunks_mut(w * BAND_ROWS)
        .enumerate()
        .for_each(|(band, rows)| {
            let row0 = band * BAND_ROWS;
            let row1 = row0 + rows.len() / w;
            for t in tris {
                let ys = t.y_range.0.max(row0);
                let ye = t.y_range.1.min(row1);
                let [a, b, c] = &t.p;
                let (tl_bc, tl_ca, tl_ab) =
                    (is_top_left(b, c), is_top_left(c, a), is_top_left(a, b));
                for y in ys..ye {
                    for x in t.x_range.0..t.x_range.1 {
                        let s = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                        let w0 = edge(b, c, &s);
                        let w1 = edge(c, a, &s);
                        let w2 = edge(a, b, &s);
                        let inside = |w: f64, tl: bool| w > 0.0 || (w == 0.0 && tl);
                        if !(inside(w0, tl_bc) && inside(w1, tl_ca) && inside(w2, tl_ab)) {
                            continue;
                        }
                        // Perspective-correct interpolation: screen-space
                        // barycentrics weighted by 1/z.
                        let l = [w0 / t.area, w1 / t.area, w2 / t.area];
                        let wz = [l[0] * t.inv_z[0], l[1] * t.inv_z[1], l[2] * t.inv_z[2]];
                        let s_inv = wz[0] + wz[1] + wz[2];
                        let z = 1.0 / s_inv;
                        let slot = &mut rows[(y - row0) * w + x];
                        if slot.is_some_and(|f| f.z <= z) {
                            continue;
                        }
                        let nocs =
                            (t.nocs[0] * wz[0] + t.nocs[1] * wz[1] + t.nocs[2] * wz[2]) / s_inv;
                        *slot = Some(Fragment {
                            z,
                            nocs: nocs.map(|v| v.clamp(0.0, 1.0)),
                            tri: t.id,
                        });
                    }
                }
            }
        });
    frags
}

/// Renders the ground-truth correspondence map of `nocs` seen under `pose`.
///
/// `pose` maps model-frame millimeters (not NOCS) into the camera frame.
pub fn render_nocs_map(
    nocs: &NocsMesh,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<CorrespondenceMap> {
    pose.validate()?;
    k.validate()?;
    let frags = rasterize(&setup(nocs, pose, k), k.width, k.height);
    let n = frags.len();
    let mut coords = Vec::with_capacity(n);
    let mut mask = Vec::with_capacity(n);
    let mut depth = Vec::with_capacity(n);
    for f in frags {
        match f {
            Some(f) => {
                coords.push(lift_origin(f.nocs));
                mask.push(true);
                depth.push(f.z);
            }
            None => {
                coords.push(Vector3::zeros());
                mask.push(false);
                depth.push(f64::NAN);
            }
        }
    }
    Ok(CorrespondenceMap {
        width: k.width,
        height: k.height,
        coords,
        mask,
        depth: Some(depth),
    })
}

/// Flat-shaded RGB render (Lambertian with a camera-mounted light) on a
/// black background.
pub fn render_shaded(
    nocs: &NocsMesh,
    pose: &Pose,
    k: &CameraIntrinsics,
    albedo: [u8; 3],
) -> Result<RgbImage> {
    pose.validate()?;
    k.validate()?;
    let frags = rasterize(&setup(nocs, pose, k), k.width, k.height);
    let model: Vec<Vector3<f64>> = nocs
        .mesh
        .vertices()
        .iter()
        .map(|v| pose.transform(&nocs_to_model(v, &nocs.transform)))
        .collect();
    let shade: Vec<f64> = nocs
        .mesh
        .triangles()
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| model[i as usize]);
            let n = (b - a).cross(&(c - a));
            let view = -(a + b + c) / 3.0;
            let cos = match (n.try_normalize(0.0), view.try_normalize(0.0)) {
                (Some(n), Some(v)) => n.dot(&v).abs(),
                _ => 0.0,
            };
            0.25 + 0.75 * cos
        })
        .collect();
    let mut img = RgbImage::new(k.width, k.height);
    for (i, f) in frags.iter().enumerate() {
        if let Some(f) = f {
            let s = shade[f.tri as usize];
            let px = albedo.map(|c| (c as f64 * s).round().clamp(0.0, 255.0) as u8);
            img.put_pixel(i as u32 % k.width, i as u32 / k.width, Rgb(px));
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::project;
    use crate::geometry::random_rotation;
    use crate::mesh::{normalize_to_nocs, primitives, TriangleMesh};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn square(side: f64, z: f64) -> TriangleMesh {
        let h = side / 2.0;
        TriangleMesh::new(
            vec![
                Vector3::new(-h, -h, z),
                Vector3::new(h, -h, z),
                Vector3::new(h, h, z),
                Vector3::new(-h, h, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn object_behind_camera_renders_nothing() {
        let nocs = normalize_to_nocs(&primitives::cuboid(50.0, 50.0, 50.0)).unwrap();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, -500.0));
        let map = render_nocs_map(&nocs, &pose, &cam()).unwrap();
        assert_eq!(map.valid_count(), 0);
    }

    #[test]
    fn facing_square_matches_analytic_projection() {
        // Corners at ±50 mm, 1000 mm away: ±25 px around the principal point.
        let nocs = normalize_to_nocs(&square(100.0, 0.0)).unwrap();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        let map = render_nocs_map(&nocs, &pose, &cam()).unwrap();
        let (x, y, w, h) = map.mask_bbox().unwrap();
        let corners: Vec<_> = [(-50.0, -50.0), (50.0, 50.0)]
            .iter()
            .map(|&(a, b)| project(&Vector3::new(a, b, 0.0), &pose, &cam()).unwrap())
            .collect();
        assert!((x as f64 - corners[0].x).abs() <= 1.0);
        assert!((y as f64 - corners[0].y).abs() <= 1.0);
        assert!(((x + w) as f64 - corners[1].x).abs() <= 1.0);
        assert!(((y + h) as f64 - corners[1].y).abs() <= 1.0);
        let analytic = (corners[1].x - corners[0].x) * (corners[1].y - corners[0].y);
        let perimeter = 2.0 * ((corners[1].x - corners[0].x) + (corners[1].y - corners[0].y));
        assert!((map.valid_count() as f64 - analytic).abs() <= perimeter);
        // Filled rectangle: no holes along the shared diagonal.
        assert_eq!(map.valid_count(), (w * h) as usize);
    }

    #[test]
    fn nearer_square_wins_contested_pixels() {
        let near = square(100.0, -100.0);
        let far = square(160.0, 100.0);
        let mut verts = far.vertices().to_vec();
        verts.extend_from_slice(near.vertices());
        let mut tris = far.triangles().to_vec();
        tris.extend(near.triangles().iter().map(|t| t.map(|i| i + 4)));
        let mesh = TriangleMesh::new(verts, tris).unwrap();
        let nocs = normalize_to_nocs(&mesh).unwrap();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 1000.0));
        let map = render_nocs_map(&nocs, &pose, &cam()).unwrap();
        // Near square: 100 mm at 900 mm; its pixels all carry z = 900 and NOCS z = 0.
        let half = 500.0 * 50.0 / 900.0;
        let mut contested = 0;
        for y in 0..480 {
            for x in 0..640 {
                let (u, v) = (x as f64 + 0.5 - 320.0, y as f64 + 0.5 - 240.0);
                if u.abs() < half - 1.0 && v.abs() < half - 1.0 {
                    contested += 1;
                    assert!((map.depth_at(x, y).unwrap() - 900.0).abs() < 1e-9);
                    assert!(map.coord(x, y).unwrap().z.abs() < 1e-12);
                }
            }
        }
        assert!(contested > 2000);
    }

    #[test]
    fn valid_pixels_reproject_onto_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nocs = normalize_to_nocs(&primitives::blob([60.0, 45.0, 35.0], 3)).unwrap();
        for _ in 0..3 {
            let pose =
                Pose::new(random_rotation(&mut rng), Vector3::new(10.0, -20.0, 600.0)).unwrap();
            let map = render_nocs_map(&nocs, &pose, &cam()).unwrap();
            assert!(map.valid_count() > 1000);
            let mut worst = 0.0f64;
            for y in 0..480 {
                for x in 0..640 {
                    if let Some(c) = map.coord(x, y) {
                        let p = nocs_to_model(&c, &nocs.transform);
                        let uv = project(&p, &pose, &cam()).unwrap();
                        let d = (uv - Vector2::new(x as f64 + 0.5, y as f64 + 0.5)).norm();
                        worst = worst.max(d);
                    }
                }
            }
            assert!(worst <= 0.75, "worst reprojection {worst}");
        }
    }

    #[test]
    fn background_invariants_hold() {
        let nocs = normalize_to_nocs(&primitives::cylinder(30.0, 80.0, 24)).unwrap();
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 500.0));
        let map = render_nocs_map(&nocs, &pose, &cam()).unwrap();
        for i in 0..map.len() {
            let c = map.coords()[i];
            if map.mask()[i] {
                assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!(map.depth().unwrap()[i].is_finite());
            } else {
                assert_eq!(c, Vector3::zeros());
                assert!(map.depth().unwrap()[i].is_nan());
            }
        }
    }

    #[test]
    fn shaded_render_covers_same_pixels() {
        let nocs = normalize_to_nocs(&primitives::cuboid(60.0, 40.0, 30.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pose = Pose::new(random_rotation(&mut rng), Vector3::new(0.0, 0.0, 500.0)).unwrap();
        let map = render_nocs_map(&nocs, &pose, &cam()).unwrap();
        let img = render_shaded(&nocs, &pose, &cam(), [200, 180, 160]).unwrap();
        for (i, p) in img.pixels().enumerate() {
            assert_eq!(p.0 != [0, 0, 0], map.mask()[i]);
        }
    }
}
