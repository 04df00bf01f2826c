use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use lineup_core::pipeline::{self, PipelineConfig, PipelineError};

/// Lineup-based face recognition evaluation and failure-gated restoration.
///
/// Any config value can be overridden with a flag of the same dotted name,
/// e.g. `--lineup.seed 7` or `--paths.embeddings=emb.jsonl`.
#[derive(Debug, Parser)]
#[command(name = "lineup", version)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides paths.output).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Validate embeddings and write a binary copy.
    Ingest,
    /// Drop images failing the quality rules.
    Curate,
    /// Build and save the normalized search index.
    Index,
    /// Write the lineup manifest.
    Lineups,
    /// Build lineups, rank probes and report accuracy.
    Evaluate,
    /// Write the labeled per-lineup feature table.
    Features,
    /// Train the failure-prediction ensemble.
    Train,
    /// Classify every lineup source with a trained model.
    Predict,
    /// Predict failures, restore those lineups and compare ranks.
    Restore,
    /// Compare every lineup against restored embeddings.
    Compare,
    /// Re-render report tables from comparison.json.
    Report,
}

/// Pulls `--a.b=v` and `--a.b v` pairs out of argv; the rest goes to clap.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), PipelineError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let key_part = arg.strip_prefix("--").map(|s| s.split('=').next().unwrap_or(s));
        match key_part {
            Some(key) if key.contains('.') => {
                let key = key.to_string();
                let value = match arg.split_once('=') {
                    Some((_, v)) => v.to_string(),
                    None => it
                        .next()
                        .ok_or_else(|| PipelineError::Usage(format!("--{key} needs a value")))?,
                };
                overrides.push((key, value));
            }
            _ => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), &overrides)?;
    if let Some(out) = cli.output {
        cfg.paths.output = Some(out);
    }
    if let Some(n) = cfg.parallelism {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Ingest => {
            let s = pipeline::run_ingest(&cfg)?;
            println!(
                "{} embeddings of dimension {} ({} identities)",
                s.count, s.dim, s.identities
            );
        }
        Command::Curate => {
            let r = pipeline::run_curate(&cfg)?;
            println!("retained {} of {} images", r.retained, r.input);
        }
        Command::Index => {
            let n = pipeline::run_index(&cfg)?;
            println!("indexed {n} vectors");
        }
        Command::Lineups => {
            let e = pipeline::run_lineups(&cfg)?;
            println!(
                "{} lineups, {} sources skipped",
                e.results.len(),
                e.summary.skipped.len()
            );
        }
        Command::Evaluate => {
            let e = pipeline::run_evaluate(&cfg)?;
            match e.summary.accuracy {
                Some(a) => println!("accuracy {:.4} over {} lineups", a, e.summary.evaluated),
                None => println!("{}", e.summary.status),
            }
        }
        Command::Features => {
            let d = pipeline::run_features(&cfg)?;
            println!("{} feature vectors ({} failures)", d.len(), d.failures());
        }
        Command::Train => {
            let (model, s) = pipeline::run_train(&cfg)?;
            println!(
                "threshold {:.4}; test precision {:.4} recall {:.4} f1 {:.4}",
                model.threshold, s.test.precision, s.test.recall, s.test.f1
            );
        }
        Command::Predict => {
            let p = pipeline::run_predict(&cfg)?;
            let failures = p.iter().filter(|p| p.predicted_failure).count();
            println!("{failures} of {} lineups predicted to fail", p.len());
        }
        Command::Restore => {
            let o = pipeline::run_predict_and_restore(&cfg)?;
            if let Some(r) = &o.restore {
                println!("hook ran on {} images, {} failed", r.invoked, r.failed);
            }
            if let Some(c) = &o.comparison {
                println!(
                    "{} lineups compared: {} improved, {} degraded",
                    c.overall.total, c.overall.improvements.count, c.overall.degradations.count
                );
            }
        }
        Command::Compare => {
            let c = pipeline::run_compare(&cfg)?;
            println!(
                "{} lineups compared: {} improved, {} degraded",
                c.overall.total, c.overall.improvements.count, c.overall.degradations.count
            );
        }
        Command::Report => {
            let c = pipeline::run_report(&cfg)?;
            println!("rendered reports for {} lineups", c.overall.total);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<PipelineError>().map_or(1, PipelineError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
