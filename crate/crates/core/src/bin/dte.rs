use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dte::cli::{self, BuildOptions, CliError, RunOptions, VerifyOptions, OUT_DIR_ENV};
use dte::harness::{SummaryOptions, DEFAULT_PROFILE_LIMIT};

#[derive(Parser)]
#[command(name = "dte", version, about = "Learn joint robot trajectories for cooperative tasks with time windows")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate and prune action sets and print their sizes.
    Build {
        scenario: PathBuf,
        /// Write action set cache files into this directory.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        no_prune: bool,
    },
    /// Run the learners and write traces plus a summary.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        cycles: usize,
        /// Base seed; replicate i uses seed + i. Defaults to the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Output directory.
        #[arg(long, env = OUT_DIR_ENV, default_value = "runs")]
        out: PathBuf,
        /// Use every feasible trajectory as an action.
        #[arg(long)]
        no_prune: bool,
        /// Cycles at the end of the run used for the steady-state fraction.
        #[arg(long, default_value_t = 100_000)]
        steady_window: usize,
        #[arg(long, default_value_t = 10_000)]
        sustain_window: usize,
        #[arg(long, default_value_t = 0.95)]
        sustain_threshold: f64,
    },
    /// Check pruning, optimum preservation and the potential property.
    Verify {
        scenario: PathBuf,
        /// Read pruned action sets from cache files in this directory.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_PROFILE_LIMIT)]
        profile_limit: u128,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut stdout = io::stdout().lock();
    let result: Result<(), CliError> = match args.command {
        Command::Build { scenario, cache, no_prune } => {
            cli::cmd_build(&scenario, &BuildOptions { cache_dir: cache, no_prune }, &mut stdout).map(drop)
        }
        Command::Run {
            scenario,
            cycles,
            seed,
            replicates,
            out,
            no_prune,
            steady_window,
            sustain_window,
            sustain_threshold,
        } => {
            let opts = RunOptions {
                cycles,
                seed,
                replicates,
                out_dir: out,
                no_prune,
                summary: SummaryOptions {
                    steady_window,
                    sustain_window,
                    sustain_threshold,
                },
            };
            cli::cmd_run(&scenario, &opts, &mut stdout).map(drop)
        }
        Command::Verify { scenario, cache, trials, seed, profile_limit } => {
            let opts = VerifyOptions {
                cache_dir: cache,
                trials,
                seed,
                profile_limit,
            };
            cli::cmd_verify(&scenario, &opts, &mut stdout).map(drop)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dte: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
