use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ExperimentConfig};
use super::dataset::{Dataset, LoadedMesh, SampleRecord};
use crate::crop::crop_map;
use crate::degrade::{degrade_map, DegradationKind, DegradationSpec};
use crate::error::{io_err, Error, Result};
use crate::metrics::{add_metric, add_recall, iou_maps, mse_maps, mspd, mssd, ADD_RECALL_FRACTION};
use crate::pnp::{extract_correspondences, ransac_pnp};
use crate::render::render_nocs_map;

/// First line of every sweep CSV.
pub const CSV_VERSION_LINE: &str = "# nocs-pose sweep csv v1";

pub const SWEEP_COLUMNS: [&str; 17] = [
    "sample_id",
    "mesh",
    "kind",
    "severity",
    "status",
    "add_mm",
    "add_pass",
    "mse",
    "iou",
    "mssd_mm",
    "mspd_px",
    "correspondences",
    "inliers",
    "rot_err_deg",
    "trans_err_mm",
    "diameter_mm",
    "image_diag_px",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Ok,
    NoConsensus,
}

/// One (sample, degradation) result. Pose metrics are empty when the
/// solver found no consensus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sample_id: usize,
    pub mesh: String,
    pub kind: DegradationKind,
    pub severity: f64,
    pub status: SolveStatus,
    pub add_mm: Option<f64>,
    pub add_pass: bool,
    pub mse: f64,
    pub iou: f64,
    pub mssd_mm: Option<f64>,
    pub mspd_px: Option<f64>,
    pub correspondences: usize,
    pub inliers: usize,
    pub rot_err_deg: Option<f64>,
    pub trans_err_mm: Option<f64>,
    pub diameter_mm: f64,
    pub image_diag_px: f64,
}

/// Runs every configured degradation on every sample of the dataset. Rows
/// are ordered by sample, then by spec, independent of the worker count.
pub fn run_sweep(cfg: &ExperimentConfig, dataset_root: &Path) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if cfg.sweeps.is_empty() {
        return Err(Error::Validation("config lists no degradation specs".into()));
    }
    let ds = Dataset::open(dataset_root)?;
    let meshes = ds.load_meshes()?;
    let pool = super::thread_pool(cfg.workers)?;
    let per_sample: Vec<Vec<SweepRow>> = pool.install(|| {
        ds.index
            .samples
            .par_iter()
            .map(|s| sweep_sample(cfg, &ds, ds.mesh_for(&meshes, s)?, s))
            .collect::<Result<_>>()
    })?;
    Ok(per_sample.into_iter().flatten().collect())
}

fn sweep_sample(cfg: &ExperimentConfig, ds: &Dataset, m: &LoadedMesh, s: &SampleRecord) -> Result<Vec<SweepRow>> {
    let side = ds.load_sidecar(s)?;
    let k = &side.intrinsics;
    let stored = ds.load_crop_map(s)?;
    // Float reference: the stored map carries 8-bit quantization.
    let (clean, _) = crop_map(&render_nocs_map(&m.nocs, &side.pose, k)?, &side.roi)?;
    let sample_seed = derive_seed(cfg.seed, s.id as u64);
    let points = m.mesh.vertices();

    cfg.sweeps
        .iter()
        .map(|spec| {
            // Shared across severities of a kind so the damage is nested.
            let seed = derive_seed(sample_seed, 1 + spec.kind as u64);
            let degraded = degrade_map(&stored, spec, seed)?;
            let corrs = extract_correspondences(&degraded, &side.crop, &side.nocs_transform, cfg.stride)?;
            let params = crate::pnp::RansacParams { seed, ..cfg.ransac };
            let mut row = SweepRow {
                sample_id: s.id,
                mesh: m.name.clone(),
                kind: spec.kind,
                severity: spec.severity,
                status: SolveStatus::NoConsensus,
                add_mm: None,
                add_pass: false,
                mse: mse_maps(&degraded, &clean)?,
                iou: iou_maps(&degraded, &clean)?,
                mssd_mm: None,
                mspd_px: None,
                correspondences: corrs.len(),
                inliers: 0,
                rot_err_deg: None,
                trans_err_mm: None,
                diameter_mm: m.info.diameter,
                image_diag_px: k.diagonal(),
            };
            match ransac_pnp(&corrs, k, &params) {
                Ok(est) => {
                    let add = add_metric(&side.pose, &est.pose, points, &m.info.symmetries)?;
                    row.status = SolveStatus::Ok;
                    row.add_mm = Some(add);
                    row.add_pass = add_recall(add, &m.info, ADD_RECALL_FRACTION);
                    row.mssd_mm = Some(mssd(&side.pose, &est.pose, points, &m.info.symmetries)?);
                    row.mspd_px = Some(mspd(&side.pose, &est.pose, points, &m.info.symmetries, k)?);
                    row.inliers = est.inlier_indices.len();
                    row.rot_err_deg = Some(side.pose.rotation_error_deg(&est.pose));
                    row.trans_err_mm = Some(side.pose.translation_error(&est.pose));
                }
                Err(
                    Error::NoConsensus { .. }
                    | Error::InsufficientData { .. }
                    | Error::DegenerateConfiguration(_),
                ) => {}
                Err(e) => return Err(e),
            }
            Ok(row)
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}").map_err(io_err("writing sweep CSV"))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err("writing sweep CSV"))
}

pub fn save_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    write_sweep_csv(rows, std::io::BufWriter::new(f))
}

/// Parses a sweep CSV. Errors carry the 1-based line number.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err("reading sweep CSV"))?;
    if first.trim_end() != CSV_VERSION_LINE {
        return Err(Error::MalformedCsv { row: 1, msg: format!("expected `{CSV_VERSION_LINE}`") });
    }
    let malformed = |line: u64, msg: String| Error::MalformedCsv { row: line as usize + 1, msg };
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?;
    if headers.iter().ne(SWEEP_COLUMNS) {
        return Err(malformed(1, "unexpected header".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let row: SweepRow = rec.deserialize(None).map_err(|e| malformed(line, e.to_string()))?;
        if !row.severity.is_finite() || row.severity < 0.0 {
            return Err(malformed(line, format!("invalid severity {}", row.severity)));
        }
        if (row.status == SolveStatus::Ok) != row.add_mm.is_some() {
            return Err(malformed(line, "status and add_mm disagree".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let f = std::fs::File::open(path).map_err(io_err(format!("opening {}", path.display())))?;
    read_sweep_csv(f)
}

/// Convenience for the specs of one kind at several severities.
pub fn severity_ladder(kind: DegradationKind, severities: &[f64]) -> Vec<DegradationSpec> {
    severities.iter().map(|&s| DegradationSpec::new(kind, s)).collect()
}
