//! `tgbs`: exact threshold-detector Gaussian boson sampling from the
//! command line.
//!
//! Every CSV this tool writes starts with a `# {json}` line holding the
//! resolved run configuration and the code version; `tgbs replay FILE`
//! re-executes that configuration.

mod bench;
mod config;
mod densest;
mod estimate;
mod oracle_check;
mod output;
mod sample;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command, RunConfig};
use output::Failure;

const AFTER_HELP: &str = "\
Conventions:
  hbar = 2, quadratures interleaved (x0, p0, x1, p1, ...), vacuum covariance I.
  Squeezing in dB: r = dB * ln(10) / 20, so the default 8 dB is r = 0.921.
  Loss in dB: transmission T = 10^(-dB/10), applied uniformly after the
  interferometer; 3 dB is T = 0.501.
  Modes are 0-based; click patterns are bit strings with mode 0 first.

Exit codes: 0 success, 1 invalid input, 2 numerical precision failure, 3 I/O.";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not failures
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("tgbs: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match cli.command {
        Command::Replay(r) => config::load_replay(&r)?,
        command => RunConfig::resolve(&cli.run, command),
    };
    config.validate()?;
    config.parallelism().install(|| execute(&config))
}

fn execute(config: &RunConfig) -> Result<(), Failure> {
    match &config.command {
        Command::Sample(a) => sample::run(config, a),
        Command::OracleCheck(a) => oracle_check::run(config, a),
        Command::Estimate(a) => estimate::run(config, a),
        Command::Densest(a) => densest::run(config, a),
        Command::Bench(a) => bench::run(config, a),
        Command::Replay(_) => Err(Failure::Validation("nested replay".into())),
    }
}
