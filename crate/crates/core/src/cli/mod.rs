//! Command-line front end.
//!
//! ```text
//! modfield fit     [INPUT] [flags]                      train, write model.modf, codebook_<i>.modz, metrics.csv
//! modfield infer   CHECKPOINT [SIGNAL] --out FILE       fit a codebook with the network frozen
//! modfield decode  CHECKPOINT CODEBOOK --factor F --out FILE
//! modfield eval    PRED TARGET --metric psnr|l1|chamfer|sdf-grid
//! modfield compare [INPUT] --baselines relu,ffn,concat,modulated
//! ```
//!
//! Every command reads an optional `--config` JSON file; flags override it.
//! Exit codes: 0 success, 2 I/O or malformed file, 3 configuration or
//! dimension error (including bad flags), 4 numerical failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_compare, cmd_decode, cmd_eval, cmd_fit, cmd_infer, sdf_metrics, Baseline, CompareRow, FitOutput, Metric,
    COMPARE_HEADER,
};
pub use config::{
    BlobsData, DataSource, ExperimentConfig, FfnSettings, FitMode, ModelSettings, Overrides, PerlinData, SdfData,
    TilingSettings,
};

use crate::error::{Error, Result};
use crate::signals::{load_image, SdfShape};
use crate::training::LossKind;

#[derive(Debug, Parser)]
#[command(
    name = "modfield",
    version,
    about = "Modulated sine neural fields over tiled latent codebooks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write zero wall times so outputs are byte-reproducible.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub tile_size: Option<usize>,
    #[arg(long)]
    pub overlap: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Hidden synthesis layers.
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub omega0: Option<f64>,
    /// l2 or l1.
    #[arg(long)]
    pub loss: Option<LossKind>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            deterministic: self.deterministic,
            steps: self.steps,
            tile_size: self.tile_size,
            overlap: self.overlap,
            latent_dim: self.latent_dim,
            width: self.width,
            layers: self.layers,
            omega0: self.omega0,
            loss: self.loss,
        }
    }

    /// Config file (or defaults) with the flags applied.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        c.apply(&self.overrides());
        Ok(c)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and codebooks.
    Fit {
        /// Image to fit; replaces the config's data source.
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit a codebook for a new signal with the network frozen.
    Infer {
        checkpoint: PathBuf,
        /// Image to encode; defaults to the first signal of the config's data.
        signal: Option<PathBuf>,
        /// Codebook file to write.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render a fitted image at `factor` times its resolution.
    Decode {
        checkpoint: PathBuf,
        codebook: PathBuf,
        #[arg(long, default_value_t = 1)]
        factor: usize,
        /// Output image (.ppm, .pgm or .pfm).
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print one metric as CSV.
    Eval {
        pred: PathBuf,
        target: PathBuf,
        /// psnr, l1, chamfer or sdf-grid.
        #[arg(long)]
        metric: Metric,
        /// Cells per axis for sdf-grid.
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train several network variants under one budget and tabulate them.
    Compare {
        /// Image to fit; replaces the config's data source.
        input: Option<PathBuf>,
        #[arg(long, default_value = "relu,ffn,concat,modulated")]
        baselines: String,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn with_input(mut c: ExperimentConfig, input: Option<PathBuf>, out: Option<PathBuf>) -> ExperimentConfig {
    if let Some(path) = input {
        c.data = Some(DataSource::Image { path });
        c.base_dir = PathBuf::new();
    }
    if let Some(dir) = out {
        c.output_dir = dir;
    }
    c
}

/// Runs one parsed command, writing results to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Fit {
            input,
            out: dir,
            common,
        } => {
            let config = with_input(common.resolve()?, input, dir);
            cmd_fit(&config, out)?;
        }
        Command::Infer {
            checkpoint,
            signal,
            out: path,
            common,
        } => {
            let config = common.resolve()?;
            config.validate()?;
            let signal = match signal {
                Some(p) => load_image(&p)?,
                None => config.load_data()?.remove(0),
            };
            cmd_infer(&checkpoint, &signal, &config.train, &path, out)?;
        }
        Command::Decode {
            checkpoint,
            codebook,
            factor,
            out: path,
            common,
        } => {
            common.resolve()?;
            cmd_decode(&checkpoint, &codebook, factor, &path)?;
        }
        Command::Eval {
            pred,
            target,
            metric,
            resolution,
            common,
        } => {
            let config = common.resolve()?;
            let scene = config.sdf_scene().cloned().unwrap_or_else(SdfShape::demo_scene);
            let csv = cmd_eval(&pred, &target, metric, &scene, resolution)?;
            out.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
        }
        Command::Compare {
            input,
            baselines,
            out: dir,
            common,
        } => {
            let config = with_input(common.resolve()?, input, dir);
            cmd_compare(&config, &Baseline::parse_list(&baselines)?, out)?;
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
