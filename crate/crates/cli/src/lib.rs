//! Command-line front end: ingest, decompose, attribute, evaluate, report
//! and the full run.

pub mod config;
pub mod error;
pub mod pipeline;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use attrib_core::attribute::KeyAttribution;
use attrib_core::datasets::{self, SourceFormat};
use attrib_core::decompose::DecompositionResult;
use attrib_core::eval::{canonical_json, emit_reports, Averaging, EvalMode, MetricsReport, ReportFormat};
use clap::{Args, Parser, Subcommand};

use crate::config::{PipelineConfig, SourceSpec};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "attrib", version, about = "Decompose answers and attribute them to source sentences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set decomposer.strategy=cog`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig, CliError> {
        PipelineConfig::load(self.config.as_deref(), &self.set)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a source dataset into task records.
    Ingest {
        #[arg(long, value_parser = parse_format)]
        format: SourceFormat,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep answers copied verbatim from the document.
        #[arg(long)]
        keep_copied: bool,
    },
    /// Split answers into information units.
    Decompose {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strategy: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Attribute information units to evidence sentences.
    Attribute {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        decompositions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        attributor: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score attributions against gold evidence.
    Evaluate {
        /// Attribution JSONL.
        #[arg(long)]
        pred: PathBuf,
        /// Task record JSONL holding the gold evidence.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<EvalMode>,
        /// Comma-separated cut-offs.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long, value_parser = parse_averaging)]
        averaging: Option<Averaging>,
        /// Decomposition JSONL for the units-per-sentence counter.
        #[arg(long)]
        decompositions: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render metric files as JSON, a table or plot rows.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        metrics: Vec<PathBuf>,
        #[arg(long, default_value = "table", value_parser = parse_report_format)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage and write a manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn parse_format(s: &str) -> Result<SourceFormat, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<EvalMode, String> {
    s.parse()
}

fn parse_averaging(s: &str) -> Result<Averaging, String> {
    s.parse()
}

fn parse_report_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => datasets::jsonl::write_lines(p, text.lines().map(str::to_string)).map_err(CliError::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest { format, input, out, keep_copied } => {
            let mut cfg = PipelineConfig::default();
            cfg.dataset.sources = vec![SourceSpec { format, path: input }];
            cfg.dataset.keep_copied_answers = keep_copied;
            cfg.check_inputs()?;
            let (records, stats) = pipeline::ingest(&cfg)?;
            datasets::write_records(&out, &records)?;
            eprint!("{}", canonical_json(&stats));
            Ok(())
        }
        Command::Decompose { records, out, strategy, config } => {
            let cfg = config.load()?;
            let engine = pipeline::Engine::new(&cfg, None)?;
            let records = datasets::read_records(&records)?;
            let strategy = strategy.unwrap_or(cfg.decomposer.strategy.clone());
            let results = pipeline::decompose(&engine, &strategy, &records)?;
            datasets::write_jsonl(&out, &results)?;
            Ok(())
        }
        Command::Attribute { records, decompositions, out, attributor, config } => {
            let cfg = config.load()?;
            let engine = pipeline::Engine::new(&cfg, None)?;
            let records = datasets::read_records(&records)?;
            let decompositions: Vec<DecompositionResult> = datasets::read_jsonl(&decompositions)?;
            let kind = attributor.unwrap_or(cfg.attributor.kind.clone());
            let results = pipeline::attribute(&engine, &kind, &records, &decompositions)?;
            datasets::write_jsonl(&out, &results)?;
            Ok(())
        }
        Command::Evaluate { pred, gold, mode, k, averaging, decompositions, out, config } => {
            let mut cfg = config.load()?;
            if !k.is_empty() {
                cfg.evaluation.k = k;
                cfg.validate()?;
            }
            if let Some(a) = averaging {
                cfg.evaluation.averaging = a;
            }
            let records = datasets::read_records(&gold)?;
            let attributions: Vec<KeyAttribution> = datasets::read_jsonl(&pred)?;
            let decomps: Option<Vec<DecompositionResult>> = decompositions.map(|p| datasets::read_jsonl(&p)).transpose()?;
            let mode = mode.unwrap_or_else(|| {
                pipeline::mode_for(attributions.first().map_or(cfg.attributor.kind.as_str(), |a| a.attributor.as_str()))
            });
            let report = pipeline::evaluate(&cfg, &records, decomps.as_deref(), &attributions, mode)?;
            emit(out.as_deref(), &canonical_json(&report))
        }
        Command::Report { metrics, format, out } => {
            let reports = metrics.iter().map(|p| read_json::<MetricsReport>(p)).collect::<Result<Vec<_>, _>>()?;
            emit(out.as_deref(), &emit_reports(&reports, format))
        }
        Command::Run { config } => {
            let cfg = config.load()?;
            let manifest = pipeline::run_pipeline(&cfg, None)?;
            let metrics = read_json::<MetricsReport>(&cfg.output_dir.join(pipeline::METRICS_FILE))?;
            print!("{}", emit_reports(&[metrics], ReportFormat::Table));
            eprintln!("manifest: {} ({} network calls)", cfg.output_dir.join(pipeline::MANIFEST_FILE).display(), manifest.network_calls);
            Ok(())
        }
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { error::EXIT_CONFIG } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
