use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use sanov_dual_cli::{cramer_flags, run, write_outputs, CliError, CliResult, Outputs, Subcommand};

#[derive(Parser)]
#[command(name = "sanov-dual", version, about = "Dual penalty/risk pairs, Sanov limits and deviation bounds")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for report, tables and manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for replications and DP slices.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Subcommand)]
enum Cmd {
    /// Evaluate ρ on a vector f.
    Rho,
    /// v_n = (1/n) ρ_n(n F ∘ L_n) along a schedule against its limit.
    Sanov,
    /// Λ and Λ* tables, or the deviation bound from flags.
    Cramer(CramerArgs),
    /// Monte Carlo tail probabilities against the analytic bounds.
    Tailbound,
    /// Sample average approximation deviations.
    Saa,
    /// Superhedging certificate for ρ_n.
    Superhedge,
    /// Optimal transport penalty, its ρ and the control problem.
    Transport,
}

#[derive(Args)]
struct CramerArgs {
    #[arg(long = "Mq", requires_all = ["r", "q", "n"])]
    mq: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
}

fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let (name, config, out): (&str, Vec<u8>, Outputs) = match (&cli.cmd, &cli.config) {
        (Cmd::Cramer(CramerArgs { mq: Some(mq), r: Some(r), q: Some(q), n: Some(n) }), None) => {
            let key = format!("{{\"Mq\":{mq},\"r\":{r},\"q\":{q},\"n\":{n}}}").into_bytes();
            ("cramer", key, cramer_flags(*mq, *r, *q, *n)?)
        }
        (_, None) => return Err(CliError::Config("--config is required".into())),
        (cmd, Some(path)) => {
            let sub = match cmd {
                Cmd::Rho => Subcommand::Rho,
                Cmd::Sanov => Subcommand::Sanov,
                Cmd::Cramer(_) => Subcommand::Cramer,
                Cmd::Tailbound => Subcommand::Tailbound,
                Cmd::Saa => Subcommand::Saa,
                Cmd::Superhedge => Subcommand::Superhedge,
                Cmd::Transport => Subcommand::Transport,
            };
            let bytes = std::fs::read(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            log::info!("running {} with seed {}", sub.name(), cli.seed);
            let out = run(sub, &bytes, cli.seed)?;
            (sub.name(), bytes, out)
        }
    };
    print!("{}", out.summary);
    if let Some(dir) = &cli.out {
        write_outputs(dir, name, &config, cli.seed, &out)?;
    }
    match out.deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SANOV_DUAL_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
