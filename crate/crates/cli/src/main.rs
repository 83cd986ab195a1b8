use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "lidar", version, about = "Learned forward model and parameter calibration for coded-pulse LIDAR")]
struct Cli {
    /// Run configuration (TOML); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed of the command's stage.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a training dataset from the synthetic camera.
    GenData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the forward model on a dataset.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint up to the configured iteration count.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Search camera parameters through a trained generator.
    Optimize {
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate parameters on the synthetic camera against a baseline.
    Eval {
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a dataset or a text batch of 0/1 rows as a PGM image.
    Render {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only this dataset group.
        #[arg(long)]
        group: Option<usize>,
    },
    /// Print the header of any file written by this tool.
    Inspect { file: PathBuf },
}

fn run(cli: Cli) -> lidar_core::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(lidar_core::Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| lidar_core::Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let cfg = commands::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::GenData { out } => commands::gen_data(cfg, cli.seed, &out),
        Command::Train { dataset, out, resume } => commands::train(cfg, cli.seed, &dataset, &out, resume.as_deref()),
        Command::Optimize { checkpoint, out } => commands::optimize(cfg, cli.seed, &checkpoint, &out),
        Command::Eval { params, out } => commands::eval(cfg, cli.seed, &params, &out),
        Command::Render { input, out, group } => commands::render(&input, &out, group),
        Command::Inspect { file } => commands::inspect(&file),
    }
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
