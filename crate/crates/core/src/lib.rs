//! Geometric half of dense-correspondence 6D object pose estimation.
//!
//! Meshes are normalized into the unit cube ([`mesh`]), rendered into
//! per-pixel correspondence maps ([`render`]), cropped ([`crop`]), decoded
//! into 2D-3D correspondences and solved with EPnP inside RANSAC ([`pnp`]),
//! and scored with ADD(-S), MSSD, MSPD, MSE and IoU ([`metrics`]).
//! [`degrade`] corrupts perfect maps with the error modes of learned
//! image-to-image models, [`augment`] holds the photometric augmentation
//! pipeline, and [`harness`] drives datasets, sweeps and reports.

pub mod augment;
pub mod camera;
pub mod crop;
pub mod degrade;
mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod pnp;
pub mod render;

pub use augment::{apply_photometric_aug, AugSpec};
pub use camera::{project, CameraIntrinsics};
pub use crop::{crop_map, crop_rgb, CropInfo, Roi};
pub use degrade::{degrade_map, DegradationKind, DegradationSpec};
pub use error::{Error, Result};
pub use geometry::Pose;
pub use mesh::{
    compute_model_info, load_mesh, nocs_to_model, normalize_to_nocs, ModelInfo, NocsMesh,
    NocsTransform, TriangleMesh,
};
pub use metrics::MetricReport;
pub use pnp::{
    epnp, extract_correspondences, ransac_pnp, reprojection_error, Correspondence2D3D,
    PoseEstimate, RansacParams,
};
pub use render::{render_nocs_map, CorrespondenceMap};
