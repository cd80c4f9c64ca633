use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ExperimentConfig, PoseSampler};
use crate::augment::apply_photometric_aug;
use crate::camera::CameraIntrinsics;
use crate::crop::{crop_map, crop_rgb, Roi};
use crate::error::{io_err, Error, Result};
use crate::geometry::{random_rotation, Pose};
use crate::io::{load_map_png, save_map_png, Sidecar};
use crate::mesh::{compute_model_info, load_mesh, normalize_to_nocs, ModelInfo, NocsMesh, TriangleMesh};
use crate::render::{render_nocs_map, render_shaded, CorrespondenceMap};

pub const INDEX_FILE: &str = "index.json";
pub const COORDS_PNG: &str = "coords.png";
pub const MASK_PNG: &str = "mask.png";
pub const CROP_COORDS_PNG: &str = "crop_coords.png";
pub const CROP_MASK_PNG: &str = "crop_mask.png";
pub const RGB_PNG: &str = "rgb.png";
pub const SIDECAR_JSON: &str = "sidecar.json";
pub const DATASET_VERSION: u32 = 1;

/// Pose draws per sample before giving up on getting the object in view.
const MAX_POSE_ATTEMPTS: usize = 100;

const ALBEDOS: [[u8; 3]; 4] = [[200, 170, 120], [120, 170, 210], [190, 110, 110], [140, 190, 130]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub name: String,
    /// PLY in model millimeters, relative to the dataset root.
    pub file: String,
    pub info: ModelInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub mesh: String,
    /// Sample directory relative to the dataset root.
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub version: u32,
    pub intrinsics: CameraIntrinsics,
    pub meshes: Vec<MeshRecord>,
    pub samples: Vec<SampleRecord>,
}

/// A mesh from the dataset with everything the solver and metrics need.
#[derive(Debug, Clone)]
pub struct LoadedMesh {
    pub name: String,
    pub mesh: TriangleMesh,
    pub nocs: NocsMesh,
    pub info: ModelInfo,
}

/// An opened dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub index: DatasetIndex,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(io_err(format!("dataset index {}", path.display())))?;
        let index: DatasetIndex = serde_json::from_str(&text)?;
        if index.version != DATASET_VERSION {
            return Err(Error::Validation(format!("unsupported dataset version {}", index.version)));
        }
        Ok(Self { root: root.to_path_buf(), index })
    }

    pub fn sample_dir(&self, s: &SampleRecord) -> PathBuf {
        self.root.join(&s.dir)
    }

    pub fn load_meshes(&self) -> Result<Vec<LoadedMesh>> {
        self.index
            .meshes
            .iter()
            .map(|r| {
                let mesh = load_mesh(self.root.join(&r.file))?;
                let nocs = normalize_to_nocs(&mesh)?;
                Ok(LoadedMesh { name: r.name.clone(), mesh, nocs, info: r.info.clone() })
            })
            .collect()
    }

    pub fn mesh_for<'a>(&self, meshes: &'a [LoadedMesh], s: &SampleRecord) -> Result<&'a LoadedMesh> {
        meshes
            .iter()
            .find(|m| m.name == s.mesh)
            .ok_or_else(|| Error::Validation(format!("sample {} names unknown mesh {}", s.id, s.mesh)))
    }

    pub fn load_sidecar(&self, s: &SampleRecord) -> Result<Sidecar> {
        Sidecar::load(&self.sample_dir(s).join(SIDECAR_JSON))
    }

    /// The stored (8-bit) cropped correspondence map.
    pub fn load_crop_map(&self, s: &SampleRecord) -> Result<CorrespondenceMap> {
        let dir = self.sample_dir(s);
        load_map_png(&dir.join(CROP_COORDS_PNG), &dir.join(CROP_MASK_PNG))
    }
}

/// Draws a pose whose translation (the model origin in the camera frame)
/// has depth in the configured range and projects into the central part of
/// the frame.
pub fn sample_pose<R: Rng + ?Sized>(sampler: &PoseSampler, k: &CameraIntrinsics, rng: &mut R) -> Pose {
    let rotation = if sampler.max_rotation_deg >= 180.0 {
        random_rotation(rng)
    } else {
        let axis = loop {
            let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
            let v = Vector3::from(v);
            if v.norm() > 1e-9 {
                break Unit::new_normalize(v);
            }
        };
        let angle = sampler.max_rotation_deg.to_radians() * rng.random::<f64>();
        UnitQuaternion::from_axis_angle(&axis, angle).to_rotation_matrix().into_inner()
    };
    let [lo, hi] = sampler.distance_mm;
    let z = lo + (hi - lo) * rng.random::<f64>();
    let f = sampler.center_fraction;
    let u = k.width as f64 * (0.5 + f * (rng.random::<f64>() - 0.5));
    let v = k.height as f64 * (0.5 + f * (rng.random::<f64>() - 0.5));
    Pose { rotation, translation: Vector3::new((u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z) }
}

/// Renders and writes the dataset under `out`. Meshes that cannot be
/// normalized are skipped with a warning.
pub fn generate_dataset(cfg: &ExperimentConfig, out: &Path) -> Result<DatasetIndex> {
    cfg.validate()?;
    let mesh_dir = out.join("meshes");
    std::fs::create_dir_all(&mesh_dir).map_err(io_err(format!("creating {}", mesh_dir.display())))?;

    let mut meshes = Vec::new();
    let mut records = Vec::new();
    for entry in &cfg.meshes {
        let loaded = entry.load().and_then(|m| Ok((normalize_to_nocs(&m)?, m)));
        let (nocs, mesh) = match loaded {
            Ok(pair) => pair,
            Err(e @ Error::DegenerateMesh(_)) => {
                warn!("skipping mesh {}: {e}", entry.name);
                continue;
            }
            Err(e) => return Err(e),
        };
        let info = compute_model_info(&mesh, entry.symmetries.clone())?;
        let file = format!("meshes/{}.ply", entry.name);
        mesh.write_ply(&out.join(&file))?;
        records.push(MeshRecord { name: entry.name.clone(), file, info: info.clone() });
        meshes.push(LoadedMesh { name: entry.name.clone(), mesh, nocs, info });
    }
    if meshes.is_empty() {
        return Err(Error::Validation("no usable meshes".into()));
    }

    let samples: Vec<SampleRecord> = (0..cfg.image_count)
        .map(|id| SampleRecord {
            id,
            mesh: meshes[id % meshes.len()].name.clone(),
            dir: format!("samples/{id:06}"),
        })
        .collect();
    let pool = super::thread_pool(cfg.workers)?;
    pool.install(|| {
        samples
            .par_iter()
            .try_for_each(|s| write_sample(cfg, out, s, &meshes[s.id % meshes.len()], s.id % meshes.len()))
    })?;

    let index = DatasetIndex {
        version: DATASET_VERSION,
        intrinsics: cfg.intrinsics,
        meshes: records,
        samples,
    };
    let path = out.join(INDEX_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&index)?).map_err(io_err(path.display().to_string()))?;
    Ok(index)
}

fn write_sample(cfg: &ExperimentConfig, out: &Path, s: &SampleRecord, m: &LoadedMesh, mesh_index: usize) -> Result<()> {
    let k = &cfg.intrinsics;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, s.id as u64));
    let mut found = None;
    for _ in 0..MAX_POSE_ATTEMPTS {
        let pose = sample_pose(&cfg.pose_sampler, k, &mut rng);
        let map = render_nocs_map(&m.nocs, &pose, k)?;
        if let Some(bbox) = map.mask_bbox() {
            found = Some((pose, map, bbox));
            break;
        }
    }
    let (pose, map, (bx, by, bw, bh)) = found.ok_or_else(|| {
        Error::Validation(format!("sample {}: object never visible in {MAX_POSE_ATTEMPTS} pose draws", s.id))
    })?;
    let roi = Roi::square_around(bx, by, bw, bh, cfg.roi_padding).with_out_size(cfg.crop_size);

    let dir = out.join(&s.dir);
    std::fs::create_dir_all(&dir).map_err(io_err(format!("creating {}", dir.display())))?;
    save_map_png(&map, &dir.join(COORDS_PNG), &dir.join(MASK_PNG))?;
    let (crop, info) = crop_map(&map, &roi)?;
    save_map_png(&crop, &dir.join(CROP_COORDS_PNG), &dir.join(CROP_MASK_PNG))?;

    let shaded = render_shaded(&m.nocs, &pose, k, ALBEDOS[mesh_index % ALBEDOS.len()])?;
    let (mut rgb, _) = crop_rgb(&shaded, &roi)?;
    let aug_seed: u64 = rng.random();
    if cfg.augment {
        rgb = apply_photometric_aug(&rgb, &cfg.aug_spec, aug_seed)?;
    }
    let rgb_path = dir.join(RGB_PNG);
    rgb.save(&rgb_path)?;

    Sidecar { pose, intrinsics: *k, nocs_transform: m.nocs.transform, roi, crop: info }.save(&dir.join(SIDECAR_JSON))
}
