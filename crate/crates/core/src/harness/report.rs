use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, Metrics};
use super::pipeline::{fuse, FusionOutcome, Workspace};
use super::reference::{comparison_rows, ComparisonRow, REFERENCE};
use crate::dataset::DatasetTag;
use crate::error::{Error, Result};
use crate::fusion::{FusionMode, Modality, ModalityVerdict};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityReport {
    pub modality: Modality,
    pub enabled: bool,
    pub model: String,
    pub n_videos: usize,
    pub n_abstained: usize,
    /// Absent when no test video was scored.
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub mode: FusionMode,
    pub n_videos: usize,
    /// Videos where every modality abstained.
    pub n_no_evidence: usize,
    pub n_tie_broken: usize,
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub format_version: u32,
    pub seed: u64,
    pub split_id: String,
    pub dataset: Option<DatasetTag>,
    pub n_train: usize,
    pub n_test: usize,
    /// The fusion mode the run was configured with; both are reported.
    pub fusion_mode: FusionMode,
    pub modalities: Vec<ModalityReport>,
    pub fused: Vec<FusionReport>,
    pub reference: Vec<ComparisonRow>,
    /// Effective config without filesystem paths.
    pub config: serde_json::Value,
}

impl ReportBundle {
    pub fn modality(&self, m: Modality) -> Option<&ModalityReport> {
        self.modalities.iter().find(|r| r.modality == m)
    }

    pub fn fusion(&self, mode: FusionMode) -> Option<&FusionReport> {
        self.fused.iter().find(|r| r.mode == mode)
    }

    pub fn accuracy(&self, m: Modality) -> Option<f64> {
        self.modality(m).and_then(|r| r.metrics.as_ref()).map(|x| x.accuracy)
    }

    /// Accuracy under the configured fusion mode.
    pub fn fused_accuracy(&self) -> Option<f64> {
        self.fusion(self.fusion_mode).and_then(|r| r.metrics.as_ref()).map(|x| x.accuracy)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::data(format!("bad report: {e}")))
    }

    pub fn to_markdown(&self) -> String {
        render_markdown(self)
    }
}

/// Redo the comparison table for a finished report.
pub fn compare_to_reference(report: &ReportBundle) -> Vec<ComparisonRow> {
    comparison_rows(report.dataset, |row| match row {
        "fused" => report.fused_accuracy(),
        other => other.parse::<Modality>().ok().and_then(|m| report.accuracy(m)),
    })
}

fn config_echo(ws: &Workspace) -> serde_json::Value {
    let mut v = serde_json::to_value(&ws.config).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        for k in ["manifest", "cache_dir", "out_dir"] {
            obj.remove(k);
        }
    }
    v
}

fn modality_report(ws: &Workspace, m: Modality, verdicts: &[ModalityVerdict]) -> ModalityReport {
    let pairs: Vec<_> = verdicts.iter().map(|v| (v.label, ws.label(&v.video_id))).collect();
    ModalityReport {
        modality: m,
        enabled: ws.config.section_enabled(m),
        model: ws.config.model(m).kind().to_string(),
        n_videos: verdicts.len(),
        n_abstained: verdicts.iter().filter(|v| v.is_abstain()).count(),
        metrics: evaluate(&pairs).ok(),
    }
}

fn fusion_report(ws: &Workspace, outcome: &FusionOutcome) -> FusionReport {
    let mut pairs: Vec<_> = outcome.fused.iter().map(|f| (Some(f.label), ws.label(&f.video_id))).collect();
    pairs.extend(outcome.no_evidence.iter().map(|id| (None, ws.label(id))));
    FusionReport {
        mode: outcome.mode,
        n_videos: pairs.len(),
        n_no_evidence: outcome.no_evidence.len(),
        n_tie_broken: outcome.fused.iter().filter(|f| f.tie_broken).count(),
        metrics: evaluate(&pairs).ok(),
    }
}

pub fn build_report(ws: &Workspace, verdicts: &BTreeMap<Modality, Vec<ModalityVerdict>>) -> Result<ReportBundle> {
    let n_test = ws.split.test_ids.len();
    let mut modalities = Vec::new();
    for m in Modality::ALL {
        let vs = verdicts.get(&m).map_or(&[][..], Vec::as_slice);
        let r = modality_report(ws, m, vs);
        if r.n_videos != n_test {
            return Err(Error::contract(format!("{m}: {} verdicts for {n_test} test videos", r.n_videos)));
        }
        modalities.push(r);
    }
    let mut fused = Vec::new();
    for mode in [FusionMode::HardMajority, FusionMode::SoftMean] {
        let r = fusion_report(ws, &fuse(ws, verdicts, mode)?);
        if r.n_videos != n_test {
            return Err(Error::contract(format!("fusion covered {} of {n_test} test videos", r.n_videos)));
        }
        fused.push(r);
    }
    let mut report = ReportBundle {
        format_version: REPORT_FORMAT_VERSION,
        seed: ws.config.seed,
        split_id: ws.split.split_id(),
        dataset: ws.dataset,
        n_train: ws.split.train_ids.len(),
        n_test,
        fusion_mode: ws.config.fusion,
        modalities,
        fused,
        reference: Vec::new(),
        config: config_echo(ws),
    };
    report.reference = compare_to_reference(&report);
    Ok(report)
}

/// Write `report.json` and `report.md` into the output directory.
pub fn write_report(ws: &Workspace, report: &ReportBundle) -> Result<(PathBuf, PathBuf)> {
    let json = ws.out_dir.join("report.json");
    let md = ws.out_dir.join("report.md");
    fs::write(&json, report.to_json()).map_err(|e| Error::io(&json, e))?;
    fs::write(&md, report.to_markdown()).map_err(|e| Error::io(&md, e))?;
    Ok((json, md))
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn opt_pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), pct)
}

fn signed(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |d| format!("{:+.1} pt", d * 100.0))
}

fn dataset_name(t: DatasetTag) -> &'static str {
    match t {
        DatasetTag::Rlt => "Real-life Trial",
        DatasetTag::Mu3d => "MU3D",
        DatasetTag::Synthetic => "synthetic",
    }
}

fn metrics_cells(m: Option<&Metrics>) -> String {
    match m {
        Some(m) => format!(
            "{} | {} | {} | {} | {}/{}/{}/{}",
            pct(m.accuracy),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1),
            m.tp,
            m.fp,
            m.fn_,
            m.tn
        ),
        None => "n/a | n/a | n/a | n/a | -".to_string(),
    }
}

fn render_markdown(r: &ReportBundle) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Deception detection report\n");
    let _ = writeln!(
        s,
        "Dataset: {}. Seed {}. Split `{}`: {} train / {} test videos. Fusion mode: `{}`.\n",
        r.dataset.map_or("mixed", dataset_name),
        r.seed,
        r.split_id,
        r.n_train,
        r.n_test,
        r.fusion_mode.as_str()
    );
    let _ = writeln!(s, "## Per-modality results (video level)\n");
    let _ = writeln!(s, "| Modality | Model | Accuracy | Precision | Recall | F1 | TP/FP/FN/TN | Scored | Abstained |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
    for m in &r.modalities {
        let model = if m.enabled { m.model.clone() } else { format!("{} (disabled)", m.model) };
        let scored = m.metrics.as_ref().map_or(0, |x| x.n_scored);
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            m.modality,
            model,
            metrics_cells(m.metrics.as_ref()),
            scored,
            m.n_abstained
        );
    }
    let _ = writeln!(s, "\n## Fusion\n");
    let _ = writeln!(s, "| Mode | Accuracy | Precision | Recall | F1 | TP/FP/FN/TN | No evidence | Ties broken |");
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    for f in &r.fused {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            f.mode.as_str(),
            metrics_cells(f.metrics.as_ref()),
            f.n_no_evidence,
            f.n_tie_broken
        );
    }
    let _ = writeln!(s, "\n## Comparison with published accuracies\n");
    let _ = writeln!(
        s,
        "Informational only: the published protocol (split, frame or video scoring) is unknown, so these numbers are not directly comparable.\n"
    );
    let _ = writeln!(s, "| Dataset | Row | Ours | Published | Delta | Source |");
    let _ = writeln!(s, "|---|---|---|---|---|---|");
    for c in &r.reference {
        let (published, delta, source) = match (c.published_alt, &c.citation_alt) {
            (Some(alt), Some(alt_cite)) => (
                format!("{}-{} (inconsistent)", pct(alt.min(c.published)), pct(alt.max(c.published))),
                format!("{} / {}", signed(c.delta), signed(c.delta_alt)),
                format!("{}; {}", c.citation, alt_cite),
            ),
            _ => (pct(c.published), signed(c.delta), c.citation.clone()),
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            dataset_name(c.dataset),
            c.row,
            opt_pct(c.ours),
            published,
            delta,
            source
        );
    }
    let _ = writeln!(s, "\n### Published hyperparameter grids\n");
    let _ = writeln!(s, "| Dataset | Model | Setting | Accuracy | Source |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for g in REFERENCE.grids {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} |",
            dataset_name(g.dataset),
            g.model,
            g.params,
            pct(g.accuracy.value),
            g.accuracy.citation
        );
    }
    s
}
