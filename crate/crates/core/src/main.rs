use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use elastoflow::commands::{self, exit_code, CommandOutput};
use elastoflow::error::Result;
use elastoflow::io::SimConfig;

#[derive(Parser, Debug)]
#[command(name = "elastoflow", version, about = "Surface diffusion of elastically stressed periodic films")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for random perturbations (overrides the configured seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel kernels.
    #[arg(long, global = true, env = "ELASTOFLOW_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate the coupled flow.
    Simulate,
    /// Smallest second-variation eigenvalues of flat films over a thickness list.
    FlatScan,
    /// Second variation on a Fourier basis at the initial profile.
    SecondVariation,
    /// Energy identity along a trajectory.
    EnergyIdentity,
}

fn execute(cli: &Cli) -> Result<CommandOutput> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| elastoflow::error::Error::Config("--config is required".into()))?;
    let mut cfg = SimConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &out),
        Command::FlatScan => commands::flat_scan_cmd(&cfg, &out),
        Command::SecondVariation => commands::second_variation_cmd(&cfg, &out),
        Command::EnergyIdentity => commands::energy_identity_cmd(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("warning: could not configure the thread pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
