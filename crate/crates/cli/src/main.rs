use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optimix::{cmd_draws, cmd_evaluate, cmd_optimize, configure_threads, CliResult};

#[derive(Parser)]
#[command(name = "optimix", version, about = "Bayesian optimal designs for mixture choice experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct an optimal design with multi-start coordinate exchange.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write design_rounded.csv with this many decimals.
        #[arg(long)]
        round: Option<usize>,
    },
    /// Criteria and diagnostics for an existing design.
    Evaluate {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the prior draw matrix.
    Draws {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Optimize { config, out, round } => {
            let o = cmd_optimize(&config, out.as_deref(), round)?;
            let c = o.result.criterion;
            println!(
                "{} = {} (best of {} starts: #{})",
                c.kind.as_str(),
                c.value,
                o.result.per_start_history.len(),
                o.result.best_start
            );
            println!("wrote {}", o.out_dir.join("design.csv").display());
        }
        Command::Evaluate { design, config, out } => {
            let o = cmd_evaluate(&design, &config, out.as_deref())?;
            println!("{} = {}", o.d.kind.as_str(), o.d.value);
            println!("{} = {}", o.i.kind.as_str(), o.i.value);
            println!("median FDS variance = {}", o.report.summary.fds.median);
            println!("median balance = {}", o.report.summary.balance.median);
            println!("wrote {}", o.out_dir.display());
        }
        Command::Draws { config, out } => {
            let d = cmd_draws(&config, &out)?;
            println!("wrote {} draws to {}", d.len(), out.display());
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
