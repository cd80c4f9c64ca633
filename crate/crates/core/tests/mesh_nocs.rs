use nalgebra::Vector3;
use nocs_pose::mesh::primitives::{blob, cuboid, cylinder, l_block};
use nocs_pose::{compute_model_info, load_mesh, nocs_to_model, normalize_to_nocs, TriangleMesh};
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = Vec<Vector3<f64>>> {
    prop::collection::vec(prop::array::uniform3(-500.0f64..500.0), 3..40)
        .prop_map(|v| v.into_iter().map(Vector3::from).collect())
}

fn mesh_of(v: Vec<Vector3<f64>>) -> TriangleMesh {
    let tris = (0..v.len() as u32 - 2).map(|i| [i, i + 1, i + 2]).collect();
    TriangleMesh::new(v, tris).unwrap()
}

proptest! {
    #[test]
    fn nocs_fills_unit_cube(v in cloud()) {
        let mesh = mesh_of(v);
        let n = normalize_to_nocs(&mesh).unwrap();
        let (lo, hi) = n.mesh.bounds();
        prop_assert!(lo.iter().all(|&c| c >= 0.0) && hi.iter().all(|&c| c <= 1.0));
        let ext = hi - lo;
        prop_assert!((ext.max() - 1.0).abs() < 1e-12);
        for a in 0..3 {
            prop_assert!(((lo[a] + hi[a]) / 2.0 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn nocs_round_trips(v in cloud()) {
        let mesh = mesh_of(v);
        let n = normalize_to_nocs(&mesh).unwrap();
        for (p, q) in mesh.vertices().iter().zip(n.mesh.vertices()) {
            prop_assert!((nocs_to_model(q, &n.transform) - p).amax() <= 1e-9 * n.transform.scale);
        }
    }

    #[test]
    fn nocs_ignores_translation_and_scale(v in cloud(), t in prop::array::uniform3(-1e3f64..1e3), s in 0.01f64..100.0) {
        let mesh = mesh_of(v);
        let moved = mesh.map_vertices(|p| p * s + Vector3::from(t)).unwrap();
        let (a, b) = (normalize_to_nocs(&mesh).unwrap(), normalize_to_nocs(&moved).unwrap());
        for (p, q) in a.mesh.vertices().iter().zip(b.mesh.vertices()) {
            prop_assert!((p - q).amax() < 1e-9);
        }
    }

    #[test]
    fn diameter_is_max_pairwise(v in cloud()) {
        let mesh = mesh_of(v.clone());
        let info = compute_model_info(&mesh, vec![]).unwrap();
        let mut best: f64 = 0.0;
        for a in &v {
            for b in &v {
                best = best.max((a - b).norm());
            }
        }
        prop_assert_eq!(info.diameter, best);
    }
}

#[test]
fn primitives_survive_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (i, m) in [cuboid(60.0, 40.0, 20.0), cylinder(30.0, 80.0, 24), l_block(90.0, 50.0, 20.0, 30.0), blob([50.0, 35.0, 25.0], 2)]
        .into_iter()
        .enumerate()
    {
        let path = dir.path().join(format!("m{i}.ply"));
        m.write_ply(&path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back, m);
        normalize_to_nocs(&back).unwrap();
    }
}

#[test]
fn obj_and_ply_agree() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("tri.obj");
    std::fs::write(&obj, "# tri\nv 0 0 0\nv 10 0 0\nv 0 5 0\nvt 0 0\nf 1/1 2/1 3/1\n").unwrap();
    let ply = dir.path().join("tri.ply");
    std::fs::write(
        &ply,
        "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n10 0 0\n0 5 0\n3 0 1 2\n",
    )
    .unwrap();
    assert_eq!(load_mesh(&obj).unwrap(), load_mesh(&ply).unwrap());
}

#[test]
fn quad_face_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("quad.obj");
    std::fs::write(&obj, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
    let err = load_mesh(&obj).unwrap_err().to_string();
    assert!(err.contains(":5:"), "{err}");
}
