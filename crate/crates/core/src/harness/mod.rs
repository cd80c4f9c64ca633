//! Experiment harness: synthetic datasets, degradation sweeps, reports
//! and timing.

pub mod config;
pub mod dataset;
pub mod priors;
pub mod report;
pub mod sweep;
pub mod timing;

pub use config::{derive_seed, ExperimentConfig, MeshEntry, MeshSource, PoseSampler};
pub use dataset::{generate_dataset, sample_pose, Dataset, DatasetIndex};
pub use priors::{load_location_priors, parse_location_priors, LocationPrior};
pub use report::{report, summarize, Report, SpecSummary, PAPER_BASELINES};
pub use sweep::{load_sweep_csv, read_sweep_csv, run_sweep, save_sweep_csv, write_sweep_csv, SolveStatus, SweepRow};
pub use timing::{time_pipeline, TimingReport, PAPER_RANSAC_PNP_SECONDS};

use crate::error::{Error, Result};

pub(crate) fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::camera::CameraIntrinsics;
    use crate::mesh::primitives::Primitive;

    /// Small camera and a single box so harness tests stay fast.
    pub(crate) fn small_config(count: usize) -> ExperimentConfig {
        let mesh = MeshEntry {
            name: "box".into(),
            source: MeshSource::Primitive { primitive: Primitive::Cuboid { size: [80.0, 50.0, 30.0] } },
            symmetries: vec![],
        };
        let k = CameraIntrinsics::new(300.0, 300.0, 80.0, 60.0, 160, 120).unwrap();
        let mut cfg = ExperimentConfig::new(vec![mesh], k);
        cfg.image_count = count;
        cfg.pose_sampler.distance_mm = [400.0, 600.0];
        cfg.crop_size = 64;
        cfg.seed = 5;
        cfg
    }
}
