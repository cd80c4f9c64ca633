use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::sweep::{load_sweep_csv, SolveStatus, SweepRow};
use crate::degrade::DegradationKind;
use crate::error::{io_err, Result};
use crate::metrics::{average_recall, mspd_thresholds_for_diagonal, mssd_thresholds};

pub const BASELINE_LABEL: &str = "paper baseline, not reproduced";

/// Published LMO numbers, in percent, shown for context only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineRow {
    pub method: &'static str,
    pub setting: &'static str,
    pub metric: &'static str,
    pub value: f64,
}

pub const PAPER_BASELINES: [BaselineRow; 8] = [
    BaselineRow { method: "Pix2Pix", setting: "without augmentation", metric: "mean ADD(-S)", value: 11.49 },
    BaselineRow { method: "Pix2Pix", setting: "with augmentation", metric: "mean ADD(-S)", value: 10.10 },
    BaselineRow { method: "BBDM", setting: "without augmentation", metric: "mean ADD(-S)", value: 12.39 },
    BaselineRow { method: "BBDM", setting: "with augmentation", metric: "mean ADD(-S)", value: 17.51 },
    BaselineRow { method: "Pix2Pix", setting: "", metric: "AR", value: 30.03 },
    BaselineRow { method: "BBDM", setting: "", metric: "AR", value: 40.63 },
    BaselineRow { method: "Pix2Pose", setting: "", metric: "AR", value: 36.30 },
    BaselineRow { method: "DPOD", setting: "", metric: "AR", value: 16.90 },
];

/// Aggregate over all rows of one degradation spec. Recall and AR* are
/// fractions in `[0, 1]`; failed solves count as misses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecSummary {
    pub kind: DegradationKind,
    pub severity: f64,
    pub count: usize,
    pub no_consensus: usize,
    pub add_recall: f64,
    /// Over successful solves only.
    pub mean_add_mm: Option<f64>,
    pub mean_mse: f64,
    pub mean_iou: f64,
    pub ar_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectSummary {
    pub mesh: String,
    pub kind: DegradationKind,
    pub severity: f64,
    pub count: usize,
    pub add_recall: f64,
    pub mean_add_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub specs: Vec<SpecSummary>,
    pub objects: Vec<ObjectSummary>,
    pub row_count: usize,
}

#[derive(Clone, Copy)]
struct SpecKey(DegradationKind, f64);

impl PartialEq for SpecKey {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o).is_eq()
    }
}
impl Eq for SpecKey {}
impl PartialOrd for SpecKey {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for SpecKey {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.cmp(&o.0).then(self.1.total_cmp(&o.1))
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Per-row AR*: mean of the MSSD and MSPD recalls over their threshold grids.
fn row_ar_star(r: &SweepRow) -> f64 {
    let mssd = r.mssd_mm.unwrap_or(f64::INFINITY);
    let mspd = r.mspd_px.unwrap_or(f64::INFINITY);
    0.5 * (average_recall(&[mssd], &mssd_thresholds(r.diameter_mm))
        + average_recall(&[mspd], &mspd_thresholds_for_diagonal(r.image_diag_px)))
}

pub fn summarize(rows: &[SweepRow]) -> Report {
    let mut by_spec: BTreeMap<SpecKey, Vec<&SweepRow>> = BTreeMap::new();
    let mut by_object: BTreeMap<(String, SpecKey), Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        let key = SpecKey(r.kind, r.severity);
        by_spec.entry(key).or_default().push(r);
        by_object.entry((r.mesh.clone(), key)).or_default().push(r);
    }
    let recall = |rs: &[&SweepRow]| rs.iter().filter(|r| r.add_pass).count() as f64 / rs.len() as f64;
    let mean_add = |rs: &[&SweepRow]| mean(rs.iter().filter_map(|r| r.add_mm));
    let specs = by_spec
        .iter()
        .map(|(k, rs)| SpecSummary {
            kind: k.0,
            severity: k.1,
            count: rs.len(),
            no_consensus: rs.iter().filter(|r| r.status == SolveStatus::NoConsensus).count(),
            add_recall: recall(rs),
            mean_add_mm: mean_add(rs),
            mean_mse: mean(rs.iter().map(|r| r.mse)).unwrap_or(0.0),
            mean_iou: mean(rs.iter().map(|r| r.iou)).unwrap_or(0.0),
            ar_star: mean(rs.iter().map(|r| row_ar_star(r))).unwrap_or(0.0),
        })
        .collect();
    let objects = by_object
        .iter()
        .map(|((mesh, k), rs)| ObjectSummary {
            mesh: mesh.clone(),
            kind: k.0,
            severity: k.1,
            count: rs.len(),
            add_recall: recall(rs),
            mean_add_mm: mean_add(rs),
        })
        .collect();
    Report { specs, objects, row_count: rows.len() }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

impl Report {
    /// Markdown tables; recall and AR* are printed in percent with two
    /// decimals so they line up with the baseline rows.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("## Per degradation\n\n");
        s.push_str("| kind | severity | n | no consensus | ADD(-S) recall % | mean ADD mm | mean MSE | mean IoU | AR* % |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for r in &self.specs {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:.2} | {} | {:.6} | {:.4} | {:.2} |",
                r.kind,
                r.severity,
                r.count,
                r.no_consensus,
                100.0 * r.add_recall,
                opt(r.mean_add_mm),
                r.mean_mse,
                r.mean_iou,
                100.0 * r.ar_star
            );
        }
        s.push_str("\n## Per object\n\n| mesh | kind | severity | n | ADD(-S) recall % | mean ADD mm |\n|---|---|---|---|---|---|\n");
        for r in &self.objects {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:.2} | {} |",
                r.mesh,
                r.kind,
                r.severity,
                r.count,
                100.0 * r.add_recall,
                opt(r.mean_add_mm)
            );
        }
        let _ = write!(s, "\n## Reference ({BASELINE_LABEL})\n\nLMO results with learned models; not comparable to synthetic sweeps. AR* above omits the VSD term of AR.\n\n| method | setting | metric | value % |\n|---|---|---|---|\n");
        for b in PAPER_BASELINES {
            let _ = writeln!(s, "| {} | {} | {} | {:.2} |", b.method, b.setting, b.metric, b.value);
        }
        s
    }

    fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["kind", "severity", "count", "no_consensus", "add_recall", "mean_add_mm", "mean_mse", "mean_iou", "ar_star", "source"])?;
        for r in &self.specs {
            w.write_record([
                r.kind.to_string(),
                r.severity.to_string(),
                r.count.to_string(),
                r.no_consensus.to_string(),
                format!("{:.2}", 100.0 * r.add_recall),
                r.mean_add_mm.map_or(String::new(), |v| v.to_string()),
                r.mean_mse.to_string(),
                r.mean_iou.to_string(),
                format!("{:.2}", 100.0 * r.ar_star),
                "measured".into(),
            ])?;
        }
        for b in PAPER_BASELINES {
            let name = format!("{} {} {}", b.method, b.setting, b.metric);
            let (recall, ar) = if b.metric == "AR" {
                (String::new(), format!("{:.2}", b.value))
            } else {
                (format!("{:.2}", b.value), String::new())
            };
            w.write_record([name.trim().replace("  ", " ").as_str(), "", "", "", &recall, "", "", "", &ar, BASELINE_LABEL])?;
        }
        w.into_inner().map_err(|e| crate::Error::Validation(e.to_string()))
    }
}

/// A scatter plot with one circle per point and a linear axis each way.
pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    const W: f64 = 520.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    let finite = |f: fn(&(f64, f64)) -> f64| points.iter().map(f).filter(|v| v.is_finite());
    let x_max = finite(|p| p.0).fold(0.0, f64::max).max(1e-12);
    let y_max = finite(|p| p.1).fold(1.0, f64::max);
    let sx = |x: f64| M + (W - 2.0 * M) * (x / x_max);
    let sy = |y: f64| H - M - (H - 2.0 * M) * (y / y_max);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - M, W - M, H - M);
    let _ = writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{x_label} (0 to {x_max:.4})</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle" font-family="sans-serif" font-size="12">{y_label} (0 to {y_max})</text>"#, H / 2.0, H / 2.0);
    for &(x, y) in points {
        let (cx, cy) = (sx(if x.is_finite() { x } else { x_max }), sy(y));
        let _ = writeln!(s, r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="#1f77b4" fill-opacity="0.35"/>"##);
    }
    s.push_str("</svg>\n");
    s
}

/// Reads a sweep CSV, writes `summary.md`, `summary.csv` and two scatter
/// plots into `out_dir`, and returns the aggregate.
pub fn report(csv_path: &Path, out_dir: &Path) -> Result<Report> {
    let rows = load_sweep_csv(csv_path)?;
    let rep = summarize(&rows);
    std::fs::create_dir_all(out_dir).map_err(io_err(format!("creating {}", out_dir.display())))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = out_dir.join(name);
        std::fs::write(&p, bytes).map_err(io_err(p.display().to_string()))
    };
    write("summary.md", rep.to_markdown().as_bytes())?;
    write("summary.csv", &rep.summary_csv()?)?;
    let pass = |r: &SweepRow| if r.add_pass { 1.0 } else { 0.0 };
    let sev: Vec<(f64, f64)> = rows.iter().map(|r| (r.severity, pass(r))).collect();
    write("severity_vs_recall.svg", scatter_svg("Severity vs ADD(-S) pass", "severity", "ADD(-S) pass", &sev).as_bytes())?;
    let mse: Vec<(f64, f64)> = rows.iter().map(|r| (r.mse, pass(r))).collect();
    write("mse_vs_recall.svg", scatter_svg("Map MSE vs ADD(-S) pass", "MSE", "ADD(-S) pass", &mse).as_bytes())?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::sweep::save_sweep_csv;

    fn row(sample_id: usize, severity: f64, pass: bool) -> SweepRow {
        SweepRow {
            sample_id,
            mesh: "box".into(),
            kind: DegradationKind::BoundaryErode,
            severity,
            status: SolveStatus::Ok,
            add_mm: Some(if pass { 1.0 } else { 50.0 }),
            add_pass: pass,
            mse: severity * 1e-3,
            iou: 1.0 - severity * 0.01,
            mssd_mm: Some(if pass { 1.0 } else { 1e3 }),
            mspd_px: Some(if pass { 0.1 } else { 1e3 }),
            correspondences: 100,
            inliers: 90,
            rot_err_deg: Some(0.1),
            trans_err_mm: Some(1.0),
            diameter_mm: 100.0,
            image_diag_px: 800.0,
        }
    }

    #[test]
    fn single_spec_gives_one_row() {
        let rows = vec![row(0, 0.0, true), row(1, 0.0, true), row(2, 0.0, false)];
        let rep = summarize(&rows);
        assert_eq!(rep.specs.len(), 1);
        assert!((rep.specs[0].add_recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((rep.specs[0].ar_star - 2.0 / 3.0).abs() < 1e-12);
        assert!(rep.to_markdown().contains("| boundary_erode | 0 | 3 | 0 | 66.67 |"));
    }

    #[test]
    fn baselines_always_present() {
        let md = summarize(&[]).to_markdown();
        for v in ["30.03", "40.63", "36.30", "16.90", "11.49", "10.10", "12.39", "17.51"] {
            assert!(md.contains(v), "{v}");
        }
        assert!(md.contains(BASELINE_LABEL));
    }

    #[test]
    fn plots_have_one_circle_per_row() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<SweepRow> = (0..7).map(|i| row(i, (i % 3) as f64, i % 2 == 0)).collect();
        let csv = dir.path().join("sweep.csv");
        save_sweep_csv(&rows, &csv).unwrap();
        let rep = report(&csv, &dir.path().join("report")).unwrap();
        assert_eq!(rep.specs.len(), 3);
        assert_eq!(rep.row_count, 7);
        for f in ["severity_vs_recall.svg", "mse_vs_recall.svg"] {
            let svg = std::fs::read_to_string(dir.path().join("report").join(f)).unwrap();
            assert_eq!(svg.matches("<circle").count(), 7);
        }
        let summary = std::fs::read_to_string(dir.path().join("report/summary.csv")).unwrap();
        assert_eq!(summary.matches(BASELINE_LABEL).count(), 8);
    }
}
