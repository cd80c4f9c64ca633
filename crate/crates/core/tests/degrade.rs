mod common;

use common::{disk_map, erosion_oracle, spearman};
use nalgebra::Vector3;
use nocs_pose::metrics::{iou_maps, mse_maps};
use nocs_pose::{degrade_map, CorrespondenceMap, DegradationKind, DegradationSpec};

fn severities(kind: DegradationKind) -> [f64; 5] {
    match kind {
        DegradationKind::BoundaryErode => [0.0, 1.0, 2.0, 4.0, 6.0],
        DegradationKind::CoarseDropoutMask => [0.0, 0.1, 0.2, 0.4, 0.6],
        _ => [0.0, 0.02, 0.05, 0.1, 0.2],
    }
}

#[test]
fn erosion_matches_scan_oracle() {
    let map = disk_map(128, 128, 40.0);
    let out = degrade_map(&map, &DegradationSpec::new(DegradationKind::BoundaryErode, 3.0), 0).unwrap();
    let want = erosion_oracle(map.mask(), 128, 128, 3.0);
    assert_eq!(out.valid_count(), want.iter().filter(|&&b| b).count());
    assert_eq!(out.mask(), &want[..]);
}

#[test]
fn erosion_matches_oracle_for_fractional_radii() {
    let map = disk_map(60, 50, 17.0);
    for r in [0.5, 1.0, 1.5, 2.3, 4.9] {
        let out = degrade_map(&map, &DegradationSpec::new(DegradationKind::BoundaryErode, r), 0).unwrap();
        assert_eq!(out.mask(), &erosion_oracle(map.mask(), 60, 50, r)[..], "r = {r}");
    }
}

#[test]
fn dropout_fraction_over_seeds() {
    let map = disk_map(128, 128, 40.0);
    let spec = DegradationSpec::new(DegradationKind::CoarseDropoutMask, 0.3);
    let mean = (0..10)
        .map(|seed| {
            let out = degrade_map(&map, &spec, seed).unwrap();
            1.0 - out.valid_count() as f64 / map.valid_count() as f64
        })
        .sum::<f64>()
        / 10.0;
    assert!((mean - 0.3).abs() <= 0.05, "{mean}");
}

fn check_invariants(out: &CorrespondenceMap) {
    for i in 0..out.len() {
        let c = out.coords()[i];
        assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(out.mask()[i], c != Vector3::zeros(), "pixel {i}");
    }
}

#[test]
fn outputs_stay_in_range_and_deterministic() {
    let map = disk_map(96, 80, 30.0);
    for kind in DegradationKind::ALL {
        for s in [0.0f64, 0.3, 1.0, 3.0] {
            let spec = DegradationSpec::new(kind, if kind == DegradationKind::CoarseDropoutMask { s.min(1.0) } else { s });
            let a = degrade_map(&map, &spec, 11).unwrap();
            check_invariants(&a);
            assert_eq!(a, degrade_map(&map, &spec, 11).unwrap());
        }
    }
}

#[test]
fn damage_is_nested_for_a_seed() {
    let map = disk_map(96, 96, 35.0);
    for kind in [DegradationKind::BoundaryErode, DegradationKind::CoarseDropoutMask] {
        let outs: Vec<_> = severities(kind)
            .iter()
            .map(|&s| degrade_map(&map, &DegradationSpec::new(kind, s), 4).unwrap())
            .collect();
        for w in outs.windows(2) {
            assert!(w[1].mask().iter().zip(w[0].mask()).all(|(&b, &a)| !b || a));
        }
    }
}

/// Expected IoU falls and expected MSE rises with severity, over an
/// ensemble of 50 maps of different sizes.
#[test]
fn monotone_damage_over_ensemble() {
    let maps: Vec<_> = (0..50).map(|i| disk_map(64, 64, 12.0 + 0.3 * i as f64)).collect();
    for kind in [DegradationKind::BoundaryErode, DegradationKind::CoarseDropoutMask, DegradationKind::SurfaceNoise] {
        let sev = severities(kind);
        let mut mean_iou = Vec::new();
        let mut mean_mse = Vec::new();
        for &s in &sev {
            let spec = DegradationSpec::new(kind, s);
            let (mut iou, mut mse) = (0.0, 0.0);
            for (i, m) in maps.iter().enumerate() {
                let out = degrade_map(m, &spec, i as u64).unwrap();
                iou += iou_maps(&out, m).unwrap();
                mse += mse_maps(&out, m).unwrap();
            }
            mean_iou.push(iou / 50.0);
            mean_mse.push(mse / 50.0);
        }
        assert!(mean_mse.windows(2).all(|w| w[1] > w[0]), "{kind}: {mean_mse:?}");
        assert!(spearman(&sev, &mean_mse) >= 0.95);
        if kind != DegradationKind::SurfaceNoise {
            assert!(mean_iou.windows(2).all(|w| w[1] < w[0]), "{kind}: {mean_iou:?}");
            assert!(spearman(&sev, &mean_iou) <= -0.95);
        }
    }
}

#[test]
fn unknown_kind_in_json_is_an_error() {
    assert!(serde_json::from_str::<DegradationSpec>(r#"{"kind": "blur", "severity": 1.0}"#).is_err());
    let spec: DegradationSpec = serde_json::from_str(r#"{"kind": "mask_bleed", "severity": 2.5}"#).unwrap();
    assert_eq!(spec, DegradationSpec::new(DegradationKind::MaskBleed, 2.5));
}
