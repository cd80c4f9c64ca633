mod common;

use common::{lm_camera, random_pose};
use nalgebra::Vector2;
use nocs_pose::mesh::primitives::{blob, l_block};
use nocs_pose::render::render_shaded;
use nocs_pose::{crop_map, normalize_to_nocs, project, render_nocs_map, nocs_to_model, CropInfo, Roi};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn rendering_is_independent_of_thread_count() {
    let nocs = normalize_to_nocs(&l_block(90.0, 50.0, 20.0, 30.0)).unwrap();
    let k = lm_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..5 {
        let pose = random_pose(&mut rng, (300.0, 600.0));
        let render = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| (render_nocs_map(&nocs, &pose, &k).unwrap(), render_shaded(&nocs, &pose, &k, [200, 200, 200]).unwrap()))
        };
        let a = render(1);
        assert!(a.0.valid_count() > 0);
        assert_eq!(a, render(4));
        assert_eq!(a, render(7));
    }
}

#[test]
fn rendered_pixels_reproject() {
    let nocs = normalize_to_nocs(&blob([50.0, 35.0, 25.0], 3)).unwrap();
    let k = lm_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let pose = random_pose(&mut rng, (300.0, 900.0));
        let map = render_nocs_map(&nocs, &pose, &k).unwrap();
        for y in 0..k.height {
            for x in 0..k.width {
                if let Some(c) = map.coord(x, y) {
                    let p = project(&nocs_to_model(&c, &nocs.transform), &pose, &k).unwrap();
                    assert!((p - Vector2::new(x as f64 + 0.5, y as f64 + 0.5)).norm() <= 0.75);
                }
            }
        }
    }
}

#[test]
fn mask_and_sentinel_agree() {
    let nocs = normalize_to_nocs(&l_block(90.0, 50.0, 20.0, 30.0)).unwrap();
    let k = lm_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let map = render_nocs_map(&nocs, &random_pose(&mut rng, (400.0, 500.0)), &k).unwrap();
    for i in 0..map.len() {
        let zero = map.coords()[i] == nalgebra::Vector3::zeros();
        assert_eq!(!map.mask()[i], zero);
        assert_eq!(map.mask()[i], !map.depth().unwrap()[i].is_nan());
    }
}

#[test]
fn crop_is_128_by_default() {
    let nocs = normalize_to_nocs(&l_block(90.0, 50.0, 20.0, 30.0)).unwrap();
    let k = lm_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let map = render_nocs_map(&nocs, &random_pose(&mut rng, (400.0, 500.0)), &k).unwrap();
    let (x, y, w, h) = map.mask_bbox().unwrap();
    let (crop, info) = crop_map(&map, &Roi::square_around(x, y, w, h, 0.1)).unwrap();
    assert_eq!((crop.width(), crop.height(), info.out_w, info.out_h), (128, 128, 128, 128));
    for j in 0..128 {
        for i in 0..128 {
            let (sx, sy) = info.source_pixel(i, j);
            let inside = sx >= 0 && sy >= 0 && sx < 640 && sy < 480;
            let src = if inside { map.coord(sx as u32, sy as u32) } else { None };
            assert_eq!(crop.coord(i, j), src);
        }
    }
}

proptest! {
    #[test]
    fn crop_pixels_map_back_exactly(x in -50i64..600, y in -50i64..400, w in 1u32..300, h in 1u32..300, out in 1u32..200) {
        let info = CropInfo::from_roi(&Roi::new(x, y, w, h).with_out_size(out));
        for j in 0..out.min(40) {
            for i in 0..out.min(40) {
                let full = info.to_full(i, j);
                let (sx, sy) = info.source_pixel(i, j);
                prop_assert_eq!(full, Vector2::new(sx as f64 + 0.5, sy as f64 + 0.5));
                prop_assert!(sx >= x && sx < x + w as i64 && sy >= y && sy < y + h as i64);
            }
        }
    }
}
