use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spdelab_cli::{run, summary_table, Overrides, Pipeline};
use spdelab_core::martingale::MartingaleCase;
use spdelab_core::parallel::thread_cap_from_env;
use spdelab_core::TciMode;

/// Stochastic heat equation experiments and transportation-cost checks.
///
/// Exit status: 0 when every enabled check passes, 1 when a check fails,
/// 2 on any error. SPDELAB_THREADS caps the worker count.
#[derive(Parser)]
#[command(name = "spdelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heat kernel table and its functionals.
    Kernel(Common),
    /// TCI constants for the configured model.
    Constants(Common),
    /// Monte Carlo solution norms, moments and concentration.
    Simulate(Common),
    /// Girsanov coupling check of the transportation-cost inequality.
    VerifyTci(Common),
    /// Wasserstein distance between two clouds or two coupled laws.
    W2(Common),
    /// Martingale representation by regression.
    ReprCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        case: Option<CaseArg>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sup,
    L2,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Linear,
    Quadratic,
    Mixed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, common, case) = match cli.command {
        Command::Kernel(c) => (Pipeline::Kernel, c, None),
        Command::Constants(c) => (Pipeline::Constants, c, None),
        Command::Simulate(c) => (Pipeline::Simulate, c, None),
        Command::VerifyTci(c) => (Pipeline::VerifyTci, c, None),
        Command::W2(c) => (Pipeline::W2, c, None),
        Command::ReprCheck { common, case } => (Pipeline::ReprCheck, common, case),
    };
    let overrides = Overrides {
        seed: common.seed,
        replicas: common.replicas,
        out: common.out,
        mode: common.mode.map(|m| match m {
            ModeArg::Sup => TciMode::Sup,
            ModeArg::L2 => TciMode::L2,
        }),
        case: case.map(|c| match c {
            CaseArg::Linear => MartingaleCase::linear(),
            CaseArg::Quadratic => MartingaleCase::Quadratic,
            CaseArg::Mixed => MartingaleCase::Mixed,
        }),
    };
    match run(pipeline, &common.config, &overrides, thread_cap_from_env()) {
        Ok(result) => {
            print!("{}", summary_table(&result));
            if result.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
