use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugSpec;
use crate::camera::CameraIntrinsics;
use crate::crop::DEFAULT_CROP_SIZE;
use crate::degrade::DegradationSpec;
use crate::error::{io_err, Error, Result};
use crate::geometry::Pose;
use crate::mesh::primitives::Primitive;
use crate::mesh::{load_mesh, TriangleMesh};
use crate::pnp::RansacParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    /// PLY or OBJ file in millimeters; relative paths resolve against the
    /// config file's directory.
    File { path: PathBuf },
    Primitive { primitive: Primitive },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshEntry {
    pub name: String,
    #[serde(flatten)]
    pub source: MeshSource,
    /// Model-frame symmetry transforms; the identity is implied.
    #[serde(default)]
    pub symmetries: Vec<Pose>,
}

impl MeshEntry {
    pub fn load(&self) -> Result<TriangleMesh> {
        match &self.source {
            MeshSource::File { path } => load_mesh(path),
            MeshSource::Primitive { primitive } => primitive.build(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseSampler {
    /// Camera-frame depth range of the model origin, mm.
    pub distance_mm: [f64; 2],
    /// Largest rotation angle from the identity; 180 samples all of SO(3).
    pub max_rotation_deg: f64,
    /// The model origin projects into this centered fraction of the frame.
    pub center_fraction: f64,
}

impl Default for PoseSampler {
    fn default() -> Self {
        Self {
            distance_mm: [400.0, 1200.0],
            max_rotation_deg: 180.0,
            center_fraction: 0.6,
        }
    }
}

fn default_image_count() -> usize {
    1
}
fn default_stride() -> u32 {
    1
}
fn default_roi_padding() -> f64 {
    0.1
}
fn default_crop_size() -> u32 {
    DEFAULT_CROP_SIZE
}
fn default_timing_runs() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub meshes: Vec<MeshEntry>,
    pub intrinsics: CameraIntrinsics,
    #[serde(default)]
    pub pose_sampler: PoseSampler,
    /// Total number of samples; meshes are assigned round-robin.
    #[serde(default = "default_image_count")]
    pub image_count: usize,
    #[serde(default = "default_stride")]
    pub stride: u32,
    #[serde(default)]
    pub ransac: RansacParams,
    #[serde(default)]
    pub sweeps: Vec<DegradationSpec>,
    /// Augment the stored RGB crops.
    #[serde(default)]
    pub augment: bool,
    #[serde(default)]
    pub aug_spec: AugSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for sweeps; `None` uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_roi_padding")]
    pub roi_padding: f64,
    #[serde(default = "default_crop_size")]
    pub crop_size: u32,
    #[serde(default = "default_timing_runs")]
    pub timing_runs: usize,
}

impl ExperimentConfig {
    /// Config with the given meshes and camera and defaults elsewhere.
    pub fn new(meshes: Vec<MeshEntry>, intrinsics: CameraIntrinsics) -> Self {
        Self {
            meshes,
            intrinsics,
            pose_sampler: PoseSampler::default(),
            image_count: default_image_count(),
            stride: default_stride(),
            ransac: RansacParams::default(),
            sweeps: Vec::new(),
            augment: false,
            aug_spec: AugSpec::default(),
            seed: 0,
            output_dir: None,
            workers: None,
            roi_padding: default_roi_padding(),
            crop_size: default_crop_size(),
            timing_runs: default_timing_runs(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, resolves relative mesh paths and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path.display().to_string()))?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for m in &mut cfg.meshes {
            if let MeshSource::File { path } = &mut m.source {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.image_count < 1 {
            return bad("image_count must be at least 1".into());
        }
        if self.meshes.is_empty() {
            return bad("at least one mesh is required".into());
        }
        for m in &self.meshes {
            if let MeshSource::File { path } = &m.source {
                if !path.is_file() {
                    return bad(format!("mesh file {} does not exist", path.display()));
                }
            }
            for s in &m.symmetries {
                s.validate()?;
            }
        }
        let mut names: Vec<&str> = self.meshes.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("mesh names must be unique".into());
        }
        if names.iter().any(|n| n.is_empty() || n.contains(['/', '\\', ','])) {
            return bad("mesh names must be non-empty without '/', '\\' or ','".into());
        }
        self.intrinsics.validate()?;
        let [lo, hi] = self.pose_sampler.distance_mm;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("invalid distance range [{lo}, {hi}]"));
        }
        let f = self.pose_sampler.center_fraction;
        if !(0.0..=1.0).contains(&f) {
            return bad(format!("center_fraction must be in [0, 1], got {f}"));
        }
        if !(0.0..=180.0).contains(&self.pose_sampler.max_rotation_deg) {
            return bad("max_rotation_deg must be in [0, 180]".into());
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.roi_padding >= 0.0 && self.roi_padding.is_finite()) {
            return bad("roi_padding must be ≥ 0".into());
        }
        if self.crop_size == 0 {
            return bad("crop_size must be at least 1".into());
        }
        if self.timing_runs == 0 {
            return bad("timing_runs must be at least 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        self.ransac.validate()?;
        for s in &self.sweeps {
            s.validate()?;
        }
        self.aug_spec.validate()
    }
}

/// Mixes a master seed with an index (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
