//! Experiment orchestration: config, stage functions, metrics, reports, and
//! the synthetic corpus.

pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod reference;
pub mod report;
pub mod synth;

use std::collections::BTreeMap;

pub use config::{DetectorKind, ExperimentConfig, LexicalFeatures, ModelSpec, CACHE_ENV};
pub use metrics::{evaluate, Metrics};
pub use pipeline::{prepare, FusionOutcome, TrainedModality, Workspace};
pub use reference::{ComparisonRow, ReferenceTable, REFERENCE};
pub use report::{build_report, compare_to_reference, write_report, ReportBundle, REPORT_FORMAT_VERSION};
pub use synth::generate_synthetic_corpus;

use crate::error::Result;
use crate::fusion::Modality;

/// Train and score one modality, writing its model artifact and verdict file.
pub fn run_modality(ws: &Workspace, m: Modality) -> Result<()> {
    let trained = pipeline::train(ws, m)?;
    pipeline::save_trained(ws, &trained)?;
    let verdicts = pipeline::score(ws, &trained)?;
    pipeline::write_verdicts(&ws.verdict_path(m), &verdicts)
}

/// Fuse stored verdicts and write `fused.jsonl`, `report.json` and `report.md`.
pub fn finish(ws: &Workspace) -> Result<ReportBundle> {
    let verdicts: BTreeMap<Modality, _> = pipeline::load_all_verdicts(ws)?;
    let outcome = pipeline::fuse(ws, &verdicts, ws.config.fusion)?;
    pipeline::write_fusion(ws, &outcome)?;
    let report = build_report(ws, &verdicts)?;
    write_report(ws, &report)?;
    Ok(report)
}

/// ingest, then train and score every enabled modality, fuse, and report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    let ws = prepare(config)?;
    pipeline::ingest(&ws)?;
    for m in ws.enabled() {
        run_modality(&ws, m)?;
    }
    finish(&ws)
}
