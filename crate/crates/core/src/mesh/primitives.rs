//! Procedural test objects in millimeters, centered near the origin.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{Error, Result};

/// Serializable description of a procedural mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Primitive {
    Cuboid {
        size: [f64; 3],
    },
    Cylinder {
        radius: f64,
        height: f64,
        segments: u32,
    },
    LBlock {
        long: f64,
        short: f64,
        thickness: f64,
        depth: f64,
    },
    Blob {
        radii: [f64; 3],
        subdivisions: u32,
    },
}

impl Primitive {
    /// Builds the mesh; non-positive or non-finite dimensions give a
    /// degenerate-mesh error.
    pub fn build(&self) -> Result<TriangleMesh> {
        let dims: Vec<f64> = match *self {
            Primitive::Cuboid { size } => size.to_vec(),
            Primitive::Cylinder { radius, height, .. } => vec![radius, height],
            Primitive::LBlock { long, short, thickness, depth } => vec![long, short, thickness, depth],
            Primitive::Blob { radii, .. } => radii.to_vec(),
        };
        if let Some(d) = dims.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::DegenerateMesh(format!("{self:?} has dimension {d}")));
        }
        if let Primitive::LBlock { long, short, thickness, .. } = *self {
            if thickness >= long.min(short) {
                return Err(Error::DegenerateMesh("L-block thickness must be below both arm lengths".into()));
            }
        }
        Ok(match *self {
            Primitive::Cuboid { size } => cuboid(size[0], size[1], size[2]),
            Primitive::Cylinder { radius, height, segments } => cylinder(radius, height, segments),
            Primitive::LBlock { long, short, thickness, depth } => l_block(long, short, thickness, depth),
            Primitive::Blob { radii, subdivisions } => blob(radii, subdivisions),
        })
    }
}

pub fn cuboid(sx: f64, sy: f64, sz: f64) -> TriangleMesh {
    let (verts, tris) = box_parts(
        Vector3::new(-sx, -sy, -sz) * 0.5,
        Vector3::new(sx, sy, sz) * 0.5,
        0,
    );
    TriangleMesh::new(verts, tris).expect("cuboid with a nonzero side")
}

fn box_parts(lo: Vector3<f64>, hi: Vector3<f64>, base: u32) -> (Vec<Vector3<f64>>, Vec<[u32; 3]>) {
    let verts = (0..8)
        .map(|i| {
            Vector3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    const QUADS: [[u32; 4]; 6] = [
        [0, 2, 3, 1], // z-
        [4, 5, 7, 6], // z+
        [0, 1, 5, 4], // y-
        [2, 6, 7, 3], // y+
        [0, 4, 6, 2], // x-
        [1, 3, 7, 5], // x+
    ];
    let tris = QUADS
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .map(|t| t.map(|i| i + base))
        .collect();
    (verts, tris)
}

/// Closed cylinder along z.
pub fn cylinder(radius: f64, height: f64, segments: u32) -> TriangleMesh {
    let n = segments.max(3);
    let h = height * 0.5;
    let mut verts = Vec::with_capacity(2 * n as usize + 2);
    for i in 0..n {
        let a = TAU * i as f64 / n as f64;
        let (s, c) = a.sin_cos();
        verts.push(Vector3::new(radius * c, radius * s, -h));
        verts.push(Vector3::new(radius * c, radius * s, h));
    }
    let bottom = 2 * n;
    let top = 2 * n + 1;
    verts.push(Vector3::new(0.0, 0.0, -h));
    verts.push(Vector3::new(0.0, 0.0, h));
    let mut tris = Vec::with_capacity(4 * n as usize);
    for i in 0..n {
        let j = (i + 1) % n;
        let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        tris.push([b0, b1, t1]);
        tris.push([b0, t1, t0]);
        tris.push([bottom, b1, b0]);
        tris.push([top, t0, t1]);
    }
    TriangleMesh::new(verts, tris).expect("cylinder with positive radius")
}

/// Two boxes forming an "L" in the xy-plane; has no nontrivial symmetry.
pub fn l_block(long: f64, short: f64, thickness: f64, depth: f64) -> TriangleMesh {
    let (mut verts, mut tris) = box_parts(
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(long, thickness, depth),
        0,
    );
    let (v2, t2) = box_parts(
        Vector3::new(0.0, thickness, 0.0),
        Vector3::new(thickness, short, depth),
        8,
    );
    verts.extend(v2);
    tris.extend(t2);
    let offset = Vector3::new(long, short, depth) * 0.5;
    for v in &mut verts {
        *v -= offset;
    }
    TriangleMesh::new(verts, tris).expect("L-block with positive sides")
}

/// Subdivided icosahedron with a deterministic, asymmetric radial bump field,
/// stretched to `radii`.
pub fn blob(radii: [f64; 3], subdivisions: u32) -> TriangleMesh {
    let (dirs, tris) = icosphere(subdivisions);
    let verts = dirs
        .iter()
        .map(|d| {
            let theta = d.z.clamp(-1.0, 1.0).acos();
            let phi = d.y.atan2(d.x);
            let bump = 1.0
                + 0.18 * (3.0 * theta).sin() * (2.0 * phi + 0.4).cos()
                + 0.10 * (5.0 * phi).sin() * theta.sin()
                + 0.08 * (theta - PI / 3.0).cos();
            Vector3::new(d.x * radii[0], d.y * radii[1], d.z * radii[2]) * bump
        })
        .collect();
    TriangleMesh::new(verts, tris).expect("blob with positive radii")
}

fn icosphere(subdivisions: u32) -> (Vec<Vector3<f64>>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints = std::collections::HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    (verts, tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_counts() {
        assert_eq!(cuboid(1.0, 2.0, 3.0).vertices().len(), 8);
        assert_eq!(cuboid(1.0, 2.0, 3.0).triangles().len(), 12);
        assert_eq!(cylinder(1.0, 1.0, 16).triangles().len(), 64);
        assert_eq!(l_block(80.0, 60.0, 20.0, 30.0).triangles().len(), 24);
        assert_eq!(blob([1.0; 3], 2).vertices().len(), 162);
    }

    #[test]
    fn primitive_json() {
        let p: Primitive =
            serde_json::from_str(r#"{"shape":"cylinder","radius":30,"height":80,"segments":24}"#)
                .unwrap();
        assert_eq!(p.build().unwrap().vertices().len(), 50);
    }
}
