//! Thin command-line front end over the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qsubgrad::algorithm::Mode;
use qsubgrad::config::ExperimentConfig;
use qsubgrad::error::Error;
use qsubgrad::experiment;

#[derive(Parser)]
#[command(
    name = "qsubgrad",
    about = "Distributed subgradient optimization over networks with randomly quantized messages",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the geometric graph and report its spectral quantities.
    Graph(CommonArgs),
    /// Solve the centralized reference problem and persist (x*, f*).
    SolveRef(CommonArgs),
    /// Run the distributed iteration and write metric rows as CSV.
    Run(RunArgs),
    /// Sweep bit widths and record iterations-to-threshold as CSV.
    SweepBits(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment configuration; defaults apply if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configuration's first seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (adjacency file, problem document, or CSV).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for seed-parallel execution; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which update to run.
    #[arg(long, value_enum, default_value_t = ModeArg::Quantized)]
    mode: ModeArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Quantized,
    Dsg,
}

impl From<ModeArg> for Mode {
    fn from(mode: ModeArg) -> Mode {
        match mode {
            ModeArg::Quantized => Mode::Quantized,
            ModeArg::Dsg => Mode::Dsg,
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seeds[0] = seed;
    }
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Graph(common) => {
            let config = load_config(&common)?;
            let report = experiment::cmd_graph(&config, common.out.as_deref())?;
            println!(
                "nodes={} edges={} attempts={} sigma2={:.6} spectral_gap={:.6}",
                report.nodes, report.edges, report.attempts, report.sigma2, report.spectral_gap
            );
            if let Some(path) = &report.output_path {
                println!("adjacency written to {}", path.display());
            }
        }
        Command::SolveRef(common) => {
            let config = load_config(&common)?;
            let reference = experiment::cmd_solve_ref(&config, common.out.as_deref())?;
            println!("f_star={:.12e}", reference.f_star);
            println!(
                "x_star=[{}]",
                reference
                    .x_star
                    .iter()
                    .map(|v| format!("{v:.12e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            if let Some(path) = common.out {
                println!("problem document written to {}", path.display());
            }
        }
        Command::Run(args) => {
            let config = load_config(&args.common)?;
            let artifact = experiment::cmd_run(
                &config,
                args.mode.into(),
                args.common.out.as_deref(),
                args.common.threads,
            )?;
            println!(
                "run_id={} seeds={} rows_per_seed={} sigma2={:.6} f_star={:.6e}",
                artifact.run_id,
                config.seeds.len(),
                artifact.rows_per_seed,
                artifact.sigma2,
                artifact.f_star
            );
            match &artifact.output_path {
                Some(path) => println!("metrics written to {}", path.display()),
                None => print!("{}", artifact.csv),
            }
        }
        Command::SweepBits(common) => {
            let config = load_config(&common)?;
            let artifact =
                experiment::cmd_sweep_bits(&config, common.out.as_deref(), common.threads)?;
            println!(
                "threshold={} f_star={:.6e} measurements={}",
                artifact.threshold,
                artifact.f_star,
                artifact.rows.len()
            );
            match &artifact.output_path {
                Some(path) => println!("sweep written to {}", path.display()),
                None => print!("{}", artifact.csv),
            }
        }
    }
    Ok(())
}

/// Exit codes: 0 success, 1 configuration error, 2 runtime invariant breach,
/// 3 connectivity failure.
fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::Parse { .. } => 1,
        Error::Disconnected { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}
