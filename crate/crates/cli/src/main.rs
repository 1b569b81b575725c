use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod analyze;
mod explore;
mod output;
mod run;
mod svg;
mod synth;

/// Compliance statistics from the error messages of a parser ensemble.
///
/// Every flag with an environment variable can also be set through it;
/// command-line flags take precedence.
#[derive(Debug, Parser)]
#[command(name = "msgstat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every catalog parser on every manifest file and tabulate messages.
    Run(run::RunArgs),
    /// Tabulate messages from previously captured stderr logs.
    Ingest(run::IngestArgs),
    /// Score both corpora with the Bernoulli misclassification statistic.
    Analyze(analyze::AnalyzeArgs),
    /// PCA projections, scree plots and parser redundancy reports.
    Explore(explore::ExploreArgs),
    /// Generate a synthetic two-corpus dataset with known contamination.
    Synth(synth::SynthArgs),
    /// Pearson χ² test on a 2×2 table of dataset × {valid, rejected} counts.
    Chisq(ChisqArgs),
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Write SVG plots next to the CSV reports (default).
    #[arg(long, overrides_with = "no_plot")]
    plot: bool,
    /// Skip SVG plots.
    #[arg(long, env = "MSGSTAT_NO_PLOT", overrides_with = "plot")]
    no_plot: bool,
}

impl PlotArgs {
    pub fn enabled(&self) -> bool {
        self.plot || !self.no_plot
    }
}

#[derive(Debug, Args)]
struct ChisqArgs {
    /// Valid files in dataset A.
    a_valid: u64,
    /// Rejected files in dataset A.
    a_rejected: u64,
    /// Valid files in dataset B.
    b_valid: u64,
    /// Rejected files in dataset B.
    b_rejected: u64,
}

fn chisq(args: &ChisqArgs) -> anyhow::Result<()> {
    let table = msgstat::ContingencyTable2x2::new(args.a_valid, args.a_rejected, args.b_valid, args.b_rejected)?;
    let result = msgstat::evaluation::chi_square_independence(&table)?;
    println!("statistic={}", result.statistic);
    println!("p_value={:e}", result.p_value);
    Ok(())
}

/// Where a subcommand writes. Created on demand.
#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "MSGSTAT_OUT", default_value = "msgstat-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MSGSTAT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run::run(a),
        Command::Ingest(a) => run::ingest(a),
        Command::Analyze(a) => analyze::analyze(a),
        Command::Explore(a) => explore::explore(a),
        Command::Synth(a) => synth::synth(a),
        Command::Chisq(a) => chisq(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<msgstat::Error>() {
                Some(msgstat::Error::MissingExecutable { .. }) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
