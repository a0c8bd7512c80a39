use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use letf_cli::{run, CliError, CliResult, ExperimentConfig, ExperimentId, Manifest, Overrides};

/// Reproduce the LETF portfolio experiments.
#[derive(Debug, Parser)]
#[command(name = "letf", version)]
struct Args {
    /// Experiment id (see --list)
    #[arg(long)]
    experiment: Option<String>,
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo (or bootstrap training) paths
    #[arg(long)]
    paths: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to LETF_THREADS, then all cores
    #[arg(long, env = "LETF_THREADS")]
    threads: Option<usize>,
    /// Reduced path counts and training budget
    #[arg(long)]
    quick: bool,
    /// Print the experiment registry and exit
    #[arg(long)]
    list: bool,
}

fn init_threads(n: Option<usize>) -> CliResult<()> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
    Ok(())
}

fn main_inner(args: Args) -> CliResult<()> {
    if args.list {
        for id in ExperimentId::ALL {
            println!("{:<10} {}", id.as_str(), id.description());
        }
        return Ok(());
    }
    init_threads(args.threads)?;
    let file = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let manifest = Manifest::resolve(
        &file,
        &Overrides {
            experiment: args.experiment,
            seed: args.seed,
            paths: args.paths,
            quick: args.quick,
        },
    )?;
    let outcome = run(&manifest, &args.out)?;
    eprintln!(
        "{}: {} files in {} ({:.1} s, manifest {})",
        manifest.experiment,
        outcome.record.outputs.len(),
        args.out.display(),
        outcome.record.wall_time_seconds,
        &outcome.record.manifest_hash[..12]
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
