use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ramsim::commands::{cmd_fig2, cmd_rejection, cmd_spectrum, load_scenario, CommandError};
use ramsim::scenario::Scenario;
use ramsim::selftest::{run_selftest, SelftestOptions};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

#[derive(Parser)]
#[command(name = "ramsim", version, about = "FM laser beamline and AM-rejection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output path; multi-file commands use its stem as a prefix.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of control steps.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// AM at f_m versus occulting-screen position on beam 2 (CSV).
    Fig2(RunArgs),
    /// Closed-loop rejection on both beams (report + trajectory CSV).
    Rejection(RunArgs),
    /// PD2 spectra around f_m before and after correction (two CSVs).
    Spectrum(RunArgs),
    /// Numerical self-checks.
    Selftest {
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_analytic: f64,
    },
}

fn load(args: &RunArgs) -> Result<Scenario, CommandError> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario = scenario.with_seed(seed);
    }
    if let Some(steps) = args.steps {
        if steps == 0 {
            return Err(CommandError::Sim(ramsim::Error::Config(ramsim::ConfigError::new(
                0,
                "--steps must be >= 1",
            ))));
        }
        scenario = scenario.with_steps(steps);
    }
    Ok(scenario)
}

fn run(command: Command) -> Result<ExitCode, CommandError> {
    match command {
        Command::Fig2(args) => {
            let scenario = load(&args)?;
            cmd_fig2(&scenario, &args.out)?;
        }
        Command::Rejection(args) => {
            let scenario = load(&args)?;
            print!("{}", cmd_rejection(&scenario, &args.out)?);
        }
        Command::Spectrum(args) => {
            let scenario = load(&args)?;
            let (before, after) = cmd_spectrum(&scenario, &args.out)?;
            println!("{}", before.display());
            println!("{}", after.display());
        }
        Command::Selftest { perturb_analytic } => {
            let results = run_selftest(SelftestOptions { perturb_analytic });
            let mut ok = true;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            println!("selftest: {}", if ok { "pass" } else { "fail" });
            return Ok(ExitCode::from(if ok { 0 } else { EXIT_SELFTEST }));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_OTHER })
        }
    }
}
