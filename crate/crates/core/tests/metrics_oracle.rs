mod common;

use common::*;
use nalgebra::Vector3;
use nocs_pose::metrics::{add_metric, average_recall_star, iou, mse, mspd, mssd, FloatImage};
use nocs_pose::{ModelInfo, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(rng: &mut ChaCha8Rng) -> (Pose, Pose, Vec<Vector3<f64>>, Vec<Pose>) {
    let gt = random_pose(rng, (400.0, 900.0));
    let est = random_pose(rng, (400.0, 900.0));
    let n = rng.random_range(1..=50);
    let pts = random_points(rng, n, 60.0);
    let mut syms = vec![Pose::identity()];
    for _ in 0..rng.random_range(0..=3) {
        syms.push(rotation_about_origin(rng));
    }
    (gt, est, pts, syms)
}

#[test]
fn metrics_match_brute_force() {
    let k = lm_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (gt, est, pts, syms) = instance(&mut rng);
        let id = [Pose::identity()];
        assert!((add_metric(&gt, &est, &pts, &id).unwrap() - add_oracle(&gt, &est, &pts)).abs() < 1e-9);
        if syms.len() > 1 {
            assert!((add_metric(&gt, &est, &pts, &syms).unwrap() - adds_oracle(&gt, &est, &pts)).abs() < 1e-9);
        }
        assert!((mssd(&gt, &est, &pts, &syms).unwrap() - mssd_oracle(&gt, &est, &pts, &syms)).abs() < 1e-9);
        assert!((mspd(&gt, &est, &pts, &syms, &k).unwrap() - mspd_oracle(&gt, &est, &pts, &syms, &k)).abs() < 1e-9);
    }
}

fn rot_z(quarter_turns: u32) -> Pose {
    let a = std::f64::consts::FRAC_PI_2 * quarter_turns as f64;
    let r = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), a).into_inner();
    Pose::new(r, Vector3::zeros()).unwrap()
}

#[test]
fn symmetric_metrics_invariant_under_symmetry() {
    let k = lm_camera();
    let group: Vec<Pose> = (0..4).map(rot_z).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let gt = random_pose(&mut rng, (400.0, 900.0));
        let est = random_pose(&mut rng, (400.0, 900.0));
        let base = random_points(&mut rng, 12, 50.0);
        let pts: Vec<_> = base.iter().flat_map(|p| group.iter().map(move |s| s.transform(p))).collect();
        let add_s = add_metric(&gt, &est, &pts, &group).unwrap();
        assert!(add_s <= add_metric(&gt, &est, &pts, &[Pose::identity()]).unwrap() + 1e-12);
        for s in &group[1..] {
            let es = est.compose(s);
            assert!((add_metric(&gt, &es, &pts, &group).unwrap() - add_s).abs() < 1e-9);
            assert!((mssd(&gt, &es, &pts, &group).unwrap() - mssd(&gt, &est, &pts, &group).unwrap()).abs() < 1e-9);
            assert!((mspd(&gt, &es, &pts, &group, &k).unwrap() - mspd(&gt, &est, &pts, &group, &k).unwrap()).abs() < 1e-9);
            assert!(mssd(&gt, &gt.compose(s), &pts, &group).unwrap() < 1e-9);
            assert!(mspd(&gt, &gt.compose(s), &pts, &group, &k).unwrap() < 1e-9);
        }
    }
}

#[test]
fn identical_rotations_reduce_to_translation_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let gt = random_pose(&mut rng, (400.0, 900.0));
        let est = Pose::new(gt.rotation, gt.translation + Vector3::new(rng.random(), rng.random(), rng.random())).unwrap();
        let pts = random_points(&mut rng, 30, 50.0);
        let m = add_metric(&gt, &est, &pts, &[Pose::identity()]).unwrap();
        assert!((m - (gt.translation - est.translation).norm()).abs() < 1e-9);
    }
}

#[test]
fn mse_and_iou_are_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let a: Vec<f64> = (0..48).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..48).map(|_| rng.random()).collect();
        let (fa, fb) = (FloatImage::new(4, 4, 3, a).unwrap(), FloatImage::new(4, 4, 3, b).unwrap());
        assert_eq!(mse(&fa, &fb).unwrap(), mse(&fb, &fa).unwrap());
        let ma: Vec<bool> = (0..16).map(|_| rng.random()).collect();
        let mb: Vec<bool> = (0..16).map(|_| rng.random()).collect();
        assert_eq!(iou(&ma, &mb).unwrap(), iou(&mb, &ma).unwrap());
    }
}

#[test]
fn ar_star_hand_example() {
    let k = lm_camera();
    let info = ModelInfo::new(100.0, vec![]).unwrap();
    assert_eq!(average_recall_star(&[26.0], &[0.0], &info, &k).unwrap(), 0.75);
    assert_eq!(average_recall_star(&[0.0], &[0.0], &info, &k).unwrap(), 1.0);
    assert_eq!(average_recall_star(&[1e9], &[1e9], &info, &k).unwrap(), 0.0);
}
