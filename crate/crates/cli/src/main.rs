use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cspace::eval::GridSpec;
use cspace_cli::checkpoint::{checkpoint_dir, Checkpoint};
use cspace_cli::commands::{self, parse_dims};
use cspace_cli::{Architecture, CliError, CliResult, Preset, RunConfig, Trainer};

/// Learn a two-dimensional conceptual-space domain from labelled images.
#[derive(Parser)]
#[command(name = "cspace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic size/brightness dataset into a container file.
    GenData {
        #[command(flatten)]
        run: RunArgs,
        /// Container path to write.
        #[arg(long, default_value = "data/synthetic.csd")]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train a model and write its checkpoint and epoch log.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Evaluate a checkpoint on the evaluation split and print a JSON report.
    Eval {
        #[command(flatten)]
        target: Target,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the domain coordinates of the evaluation split as CSV.
    Export {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "features.csv")]
        out: PathBuf,
    },
    /// Decode a grid of domain points spanning the encoded evaluation split.
    DecodeGrid {
        #[command(flatten)]
        target: Target,
        /// Rows x columns.
        #[arg(long, default_value = "5x5", value_parser = parse_grid)]
        grid: GridSpec,
        #[arg(long, default_value = "grid")]
        out: PathBuf,
    },
    /// Compare the bits of a domain point with those of a raw image.
    Rate {
        /// Domain dimensions.
        #[arg(long, default_value_t = 2)]
        n: u64,
        /// Bits per domain coordinate.
        #[arg(long, default_value_t = 32)]
        bits: u64,
        /// Raw image as height x width x channels.
        #[arg(long, default_value = "112x112x3", value_parser = parse_dims::<3>)]
        raw: [u64; 3],
        #[arg(long, default_value_t = 8)]
        bits_per_channel: u64,
    },
}

/// Config file plus overrides; flags win over file values.
#[derive(Args)]
struct RunArgs {
    /// TOML run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// `mnist`, `synthetic` or a container path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long, value_enum)]
    trainer: Option<Trainer>,
    #[arg(long, value_enum)]
    arch: Option<Architecture>,
    /// Comma-separated MLP hidden widths.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Base filter count of the convolutional architecture.
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Batches per epoch.
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    domain_dim: Option<usize>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = RunConfig::load(self.config.as_deref(), self.preset)?;
        if let Some(v) = &self.dataset {
            c.dataset.source = v.clone();
        }
        if let Some(v) = self.trainer {
            c.trainer = v;
        }
        if let Some(v) = self.arch {
            c.model.architecture = v;
        }
        if let Some(v) = &self.hidden {
            c.model.hidden = v.clone();
        }
        if let Some(v) = self.filters {
            c.model.filters = v;
        }
        let t = &mut c.train;
        t.epochs = self.epochs.unwrap_or(t.epochs);
        t.batches_per_epoch = self.batches.unwrap_or(t.batches_per_epoch);
        t.batch_size = self.batch_size.unwrap_or(t.batch_size);
        t.lr = self.lr.unwrap_or(t.lr);
        t.mu = self.mu.unwrap_or(t.mu);
        t.seed = self.seed.unwrap_or(t.seed);
        t.domain_dim = self.domain_dim.unwrap_or(t.domain_dim);
        if let Some(v) = &self.output {
            c.output = v.clone();
        }
        Ok(c)
    }
}

#[derive(Args)]
struct Target {
    /// Checkpoint directory, or a run output directory containing one.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset source replacing the one recorded in the checkpoint.
    #[arg(long)]
    dataset: Option<String>,
}

impl Target {
    fn load(&self) -> CliResult<Checkpoint> {
        let nested = checkpoint_dir(&self.checkpoint);
        Checkpoint::load(if nested.is_dir() { &nested } else { &self.checkpoint })
    }
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let [rows, cols] = parse_dims::<2>(s)?;
    Ok(GridSpec { rows: rows as usize, cols: cols as usize })
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let print = |out: &mut io::StdoutLock, s: &str| writeln!(out, "{s}").map_err(|e| CliError::io("writing output", e));
    match cli.command {
        Command::GenData { run, out: path, count } => {
            let mut config = run.resolve()?.dataset.synthetic;
            config.count = count.unwrap_or(config.count);
            config.seed = run.seed.unwrap_or(config.seed);
            commands::gen_data(&config, &path, &mut out)?;
        }
        Command::Train { run, dry_run } => {
            let config = run.resolve()?;
            if dry_run {
                config.validate()?;
                print(&mut out, &config.to_toml())?;
            } else {
                commands::train(&config, &mut out)?;
                print(&mut out, &format!("checkpoint written to {}", checkpoint_dir(&config.output).display()))?;
            }
        }
        Command::Eval { target, out: path } => {
            let report = commands::eval(&target.load()?, target.dataset.as_deref())?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            if let Some(p) = path {
                std::fs::write(&p, &text).map_err(|e| CliError::io(format!("writing {}", p.display()), e))?;
            }
            print(&mut out, &text)?;
        }
        Command::Export { target, out: path } => {
            let n = commands::export(&target.load()?, target.dataset.as_deref(), &path)?;
            print(&mut out, &format!("wrote {n} rows to {}", path.display()))?;
        }
        Command::DecodeGrid { target, grid, out: dir } => {
            let files = commands::decode_grid_cmd(&target.load()?, target.dataset.as_deref(), grid, &dir)?;
            print(&mut out, &format!("wrote {} images to {}", files.len(), dir.display()))?;
        }
        Command::Rate { n, bits, raw, bits_per_channel } => {
            commands::rate(n, bits, raw, bits_per_channel, &mut out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
