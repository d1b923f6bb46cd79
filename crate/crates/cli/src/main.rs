use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ddp_core::fusion::Modality;
use ddp_core::harness::{self, pipeline, ExperimentConfig, Workspace};
use ddp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "ddp", version, about = "Multimodal deception detection: ingest, train, evaluate, fuse, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's manifest path.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct WithModality {
    #[command(flatten)]
    common: Common,
    /// Restrict to one modality: visual, acoustic or lexical.
    #[arg(long)]
    modality: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decode media into the frame and audio cache.
    Ingest(Common),
    /// Compute and cache per-video units.
    Features(WithModality),
    /// Fit preprocessing and classifiers on the training split.
    Train(WithModality),
    /// Score test videos with trained models.
    Eval(WithModality),
    /// Vote over per-modality verdicts.
    Fuse(Common),
    /// Write report.json and report.md.
    Report(Common),
    /// All stages in order.
    Run(Common),
    /// Generate the synthetic corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        n_videos: usize,
    },
}

fn workspace(c: &Common) -> Result<Workspace> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(m) = &c.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    harness::prepare(&cfg)
}

fn modalities(ws: &Workspace, choice: &Option<String>) -> Result<Vec<Modality>> {
    match choice {
        None => Ok(ws.enabled()),
        Some(s) => {
            let m: Modality = s.parse()?;
            if !ws.config.section_enabled(m) {
                return Err(Error::usage(format!("{m} is disabled in the config")));
            }
            Ok(vec![m])
        }
    }
}

fn print_summary(report: &harness::ReportBundle) {
    for m in &report.modalities {
        if let Some(x) = &m.metrics {
            println!("{:<9} accuracy {:.3} ({} scored, {} abstained)", m.modality, x.accuracy, x.n_scored, m.n_abstained);
        }
    }
    for f in &report.fused {
        if let Some(x) = &f.metrics {
            println!("fused {:<13} accuracy {:.3}", f.mode.as_str(), x.accuracy);
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, seed, n_videos } => {
            let manifest = harness::generate_synthetic_corpus(n_videos, seed, &out)?;
            println!("wrote {}", manifest.display());
        }
        Command::Ingest(c) => {
            let ws = workspace(&c)?;
            let keys = pipeline::ingest(&ws)?;
            println!("ingested {} videos into {}", keys.len(), ws.cache_dir.display());
        }
        Command::Features(w) => {
            let ws = workspace(&w.common)?;
            pipeline::ingest(&ws)?;
            for m in modalities(&ws, &w.modality)? {
                let s = pipeline::features(&ws, m)?;
                println!("{m}: {} units over {} videos, {} without units", s.n_units, s.n_videos, s.n_abstained_videos);
            }
        }
        Command::Train(w) => {
            let ws = workspace(&w.common)?;
            pipeline::ingest(&ws)?;
            for m in modalities(&ws, &w.modality)? {
                let t = pipeline::train(&ws, m)?;
                let path = pipeline::save_trained(&ws, &t)?;
                println!("{m}: trained {} on {} units -> {}", t.model.kind().as_str(), t.n_train_units, path.display());
            }
        }
        Command::Eval(w) => {
            let ws = workspace(&w.common)?;
            pipeline::ingest(&ws)?;
            for m in modalities(&ws, &w.modality)? {
                let t = pipeline::load_trained(&ws, m)?;
                let verdicts = pipeline::score(&ws, &t)?;
                let path = ws.verdict_path(m);
                pipeline::write_verdicts(&path, &verdicts)?;
                println!("{m}: {} verdicts -> {}", verdicts.len(), path.display());
            }
        }
        Command::Fuse(c) => {
            let ws = workspace(&c)?;
            let verdicts = pipeline::load_all_verdicts(&ws)?;
            let outcome = pipeline::fuse(&ws, &verdicts, ws.config.fusion)?;
            let path = pipeline::write_fusion(&ws, &outcome)?;
            println!(
                "fused {} videos ({} without evidence) -> {}",
                outcome.fused.len(),
                outcome.no_evidence.len(),
                path.display()
            );
        }
        Command::Report(c) => {
            let ws = workspace(&c)?;
            let report = harness::finish(&ws)?;
            print_summary(&report);
            println!("wrote {}", ws.out_dir.join("report.md").display());
        }
        Command::Run(c) => {
            let ws = workspace(&c)?;
            pipeline::ingest(&ws)?;
            for m in ws.enabled() {
                harness::run_modality(&ws, m)?;
            }
            let report = harness::finish(&ws)?;
            print_summary(&report);
            println!("wrote {}", ws.out_dir.join("report.md").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
