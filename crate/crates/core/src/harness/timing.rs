use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::config::{derive_seed, ExperimentConfig};
use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pnp::{extract_correspondences, ransac_pnp, RansacParams};

/// Published RANSAC+PnP time per instance, seconds.
pub const PAPER_RANSAC_PNP_SECONDS: f64 = 0.050;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub name: &'static str,
    pub mean_s: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub stages: Vec<StageTiming>,
    pub mean_correspondences: f64,
    pub paper_ransac_pnp_s: f64,
}

impl TimingReport {
    pub fn stage(&self, name: &str) -> Option<&StageTiming> {
        self.stages.iter().find(|s| s.name == name)
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "stage,mean_s,runs,paper_s")?;
        for s in &self.stages {
            let paper = if s.name == "ransac_pnp" { self.paper_ransac_pnp_s.to_string() } else { String::new() };
            writeln!(f, "{},{:.6},{},{}", s.name, s.mean_s, s.runs, paper)?;
        }
        write!(f, "# mean correspondences per instance: {:.1}", self.mean_correspondences)
    }
}

/// Times correspondence extraction and RANSAC+PnP on the stored crops,
/// cycling through samples for `cfg.timing_runs` instances on one thread.
pub fn time_pipeline(cfg: &ExperimentConfig, dataset_root: &Path) -> Result<TimingReport> {
    cfg.validate()?;
    let ds = Dataset::open(dataset_root)?;
    let inputs = ds
        .index
        .samples
        .iter()
        .map(|s| Ok((ds.load_crop_map(s)?, ds.load_sidecar(s)?)))
        .collect::<Result<Vec<_>>>()?;
    if inputs.is_empty() {
        return Err(Error::Validation("dataset has no samples".into()));
    }
    let (mut extract_s, mut solve_s, mut corr_total) = (0.0, 0.0, 0usize);
    for run in 0..cfg.timing_runs {
        let (map, side) = &inputs[run % inputs.len()];
        let t0 = Instant::now();
        let corrs = extract_correspondences(map, &side.crop, &side.nocs_transform, cfg.stride)?;
        let t1 = Instant::now();
        let params = RansacParams { seed: derive_seed(cfg.seed, run as u64), ..cfg.ransac };
        // Failed solves still cost time and are counted.
        let _ = std::hint::black_box(ransac_pnp(&corrs, &side.intrinsics, &params));
        let t2 = Instant::now();
        extract_s += (t1 - t0).as_secs_f64();
        solve_s += (t2 - t1).as_secs_f64();
        corr_total += corrs.len();
    }
    let n = cfg.timing_runs as f64;
    Ok(TimingReport {
        stages: vec![
            StageTiming { name: "extract", mean_s: extract_s / n, runs: cfg.timing_runs },
            StageTiming { name: "ransac_pnp", mean_s: solve_s / n, runs: cfg.timing_runs },
        ],
        mean_correspondences: corr_total as f64 / n,
        paper_ransac_pnp_s: PAPER_RANSAC_PNP_SECONDS,
    })
}
