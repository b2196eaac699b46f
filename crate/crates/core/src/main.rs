use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use code2paper::config::PipelineConfig;
use code2paper::gateway::BackendKind;
use code2paper::pipeline::{self, ErrorKind, PipelineError, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Http,
    Mock,
}

#[derive(Debug, Parser)]
#[command(name = "code2paper", version, about = "Draft a research manuscript from a Python repository")]
struct Cli {
    /// TOML configuration file; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// JSON rule table for the mock backend.
    #[arg(long, global = true)]
    mock_rules: Option<PathBuf>,
    /// Token budget for the whole run.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Use a constant timestamp so outputs are byte-reproducible.
    #[arg(long, global = true)]
    fixed_clock: bool,
    #[arg(long, global = true)]
    max_iterations: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Inventory source files into inventory.json.
    Scan { root: PathBuf },
    /// Parse every file into analysis.json.
    Analyze { root: PathBuf },
    /// Build and verify reconstruction prompts into distill.json.
    Distill { root: PathBuf },
    /// Draft manuscript.md and its sidecar without revision.
    Generate { root: PathBuf },
    /// Score a manuscript (.md or sidecar .json) into quality.json.
    Evaluate { manuscript: Option<PathBuf> },
    /// Compare two manuscripts into comparison.json.
    Compare { left: PathBuf, right: PathBuf },
    /// Run every stage and write the manuscript, sidecar, quality report and manifest.
    Pipeline { root: PathBuf },
}

fn options(cli: &Cli) -> Result<RunOptions, PipelineError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .map_err(|e| PipelineError::new(ErrorKind::Config, "config", e.to_string()))?,
        None => PipelineConfig::default(),
    };
    if let Some(b) = cli.backend {
        config.backend.kind = match b {
            BackendArg::Http => BackendKind::Http,
            BackendArg::Mock => BackendKind::Mock,
        };
    }
    if let Some(budget) = cli.budget {
        config.backend.token_budget = Some(budget);
    }
    if let Some(n) = cli.max_iterations {
        config.revision.max_iterations = n;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    let mut opts = RunOptions::new(config);
    opts.mock_rules = cli.mock_rules.clone();
    opts.fixed_clock = cli.fixed_clock;
    Ok(opts)
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let opts = options(cli)?;
    let out = opts.out_dir.display();
    match &cli.command {
        Command::Scan { root } => {
            let inv = pipeline::cmd_scan(root, &opts)?;
            println!(
                "scanned {} files ({} skipped, {} lines) -> {out}/{}",
                inv.files.len(),
                inv.skipped.len(),
                inv.total_lines,
                pipeline::INVENTORY_FILE
            );
        }
        Command::Analyze { root } => {
            let doc = pipeline::cmd_analyze(root, &opts)?;
            println!(
                "analyzed {} files, mean comment density {:.3} -> {out}/{}",
                doc.files.len(),
                doc.rollup.mean_density,
                pipeline::ANALYSIS_FILE
            );
        }
        Command::Distill { root } => {
            let doc = pipeline::cmd_distill(root, &opts)?;
            let passed = doc.records.iter().filter(|r| r.round_trip.passed).count();
            println!(
                "distilled {} files, {passed} round trips passed -> {out}/{}",
                doc.records.len(),
                pipeline::DISTILL_FILE
            );
        }
        Command::Generate { root } => {
            let m = pipeline::cmd_generate(root, &opts)?;
            println!(
                "drafted {} sections -> {out}/{}",
                m.sections.len(),
                pipeline::MANUSCRIPT_FILE
            );
        }
        Command::Evaluate { manuscript } => {
            let r = pipeline::cmd_evaluate(manuscript.as_deref(), &opts)?;
            println!(
                "composite {:.4}, passed {} -> {out}/{}",
                r.composite,
                r.passed,
                pipeline::QUALITY_FILE
            );
        }
        Command::Compare { left, right } => {
            let r = pipeline::cmd_compare(left, right, &opts)?;
            print!("{}", r.summary);
        }
        Command::Pipeline { root } => {
            let o = pipeline::cmd_pipeline(root, &opts).map_err(|f| f.error)?;
            println!(
                "composite {:.4}, passed {}, {} revision iterations, {} tokens -> {out}",
                o.quality.composite,
                o.quality.passed,
                o.revision.iterations.len(),
                o.manifest.tokens.total()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
