use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlss_cli::{execute, Command};

#[derive(Parser)]
#[command(name = "mlss", version, about = "Long/short sentiment estimation, analysis and backtesting")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate news/social panels, prices and realized variance
    Synth(Common),
    /// Fit the sentiment models and write their signals
    Estimate(Common),
    /// Quantile-regression, correlation and cointegration tables
    Analyze(Common),
    /// Ledgers and performance tables of the sentiment strategies
    Backtest(Common),
    /// Shuffled-signal significance of the backtested strategies
    Mc(Common),
}

#[derive(Args)]
struct Common {
    /// JSON pipeline configuration (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; stage outputs go to subdirectories
    #[arg(long, default_value = "mlss-run")]
    out: PathBuf,
    /// Root seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Synth(a) => (Command::Synth, a),
        Cmd::Estimate(a) => (Command::Estimate, a),
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Backtest(a) => (Command::Backtest, a),
        Cmd::Mc(a) => (Command::Mc, a),
    };
    match execute(cmd, args.config.as_deref(), &args.out, args.seed) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let secs: f64 = report.timings.iter().map(|t| t.seconds).sum();
            eprintln!("{}: {} artifacts in {secs:.1}s", report.command, report.artifacts.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
