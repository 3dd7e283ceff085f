//! The `brahmi` command: every pipeline stage plus the training and
//! evaluation harness behind one binary.
//!
//! Results go to standard output (or the `--out` path), progress to
//! standard error.

pub mod args;
mod commands;
mod table;

pub use table::{format_table, TableRow};

use args::*;
use brahmi_core::ReportFormat;
use brahmi_net::PoolMode;
use clap::{Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "brahmi", version, about = "OCR for Ashokan Brahmi inscriptions", arg_required_else_help = true)]
pub struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

impl From<OutputFormat> for ReportFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Text => ReportFormat::Text,
            OutputFormat::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Median-filter and binarize an image; prints the threshold statistics as JSON.
    Preprocess {
        #[arg(long)]
        image: PathBuf,
        /// Binarized output, PNG or PGM by extension.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        preprocess: PreprocessFlags,
    },
    /// Find lines and characters; prints the tab-separated box manifest.
    Segment {
        #[arg(long)]
        image: PathBuf,
        /// Write the manifest here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Binarized page with boxes drawn, as PNG.
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[command(flatten)]
        preprocess: PreprocessFlags,
        #[command(flatten)]
        segmentation: SegmentFlags,
    },
    /// Expand a class tree to a fixed number of samples per class.
    Augment {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = brahmi_core::dataset::DEFAULT_SIDE)]
        side: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        augment: AugmentFlags,
    },
    /// Write a procedural glyph corpus as a class tree.
    RenderCorpus {
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = brahmi_core::dataset::DEFAULT_SIDE)]
        side: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also typeset a page of fresh glyphs here, as PNG.
        #[arg(long)]
        page_out: Option<PathBuf>,
        /// Expected labels of the page, one line per text line.
        #[arg(long, requires = "page_out")]
        page_truth: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        page_lines: usize,
        #[arg(long, default_value_t = 5)]
        page_glyphs: usize,
    },
    /// Train one architecture; writes a checkpoint and the epoch history.
    Train {
        #[command(flatten)]
        data: DataFlags,
        /// lenet, vgg_small or mobilenet_micro.
        #[arg(long)]
        arch: String,
        /// max or avg; mobilenet_micro only.
        #[arg(long, value_parser = parse_pool)]
        pooling: Option<PoolMode>,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Epoch history as JSON; defaults to the checkpoint path with `.history.json`.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Train each requested model and print a validation accuracy and loss table.
    Evaluate {
        #[command(flatten)]
        data: DataFlags,
        /// Repeatable; all families when omitted.
        #[arg(long)]
        arch: Vec<String>,
        /// Repeatable; both modes when omitted. Applies to mobilenet_micro.
        #[arg(long, value_parser = parse_pool)]
        pooling: Vec<PoolMode>,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Directory for each model's checkpoint and history.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recognize a page with a trained checkpoint.
    Recognize {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: RecognitionFlags,
    },
    /// Serve the HTTP API.
    Serve {
        /// Checkpoint to recognize with; previews work without one.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Largest accepted request body in bytes.
        #[arg(long, default_value_t = brahmi_service::DEFAULT_BODY_LIMIT)]
        body_limit: usize,
        /// Seconds an upload token stays valid.
        #[arg(long, default_value_t = brahmi_service::DEFAULT_TOKEN_TTL.as_secs())]
        token_ttl: u64,
    },
}

/// Runs one command, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    let exec = if cli.sequential {
        brahmi_core::Exec::Sequential
    } else {
        brahmi_core::Exec::default()
    };
    commands::dispatch(cli.command, exec, out)
}
