//! Scenario-driven verification runner.
//!
//! Exit codes: 0 = all checks within tolerance; 1 = a check failed (the
//! report is still written); 2 = input error (unparseable scenario,
//! unresolved reference, invalid construction).

mod checks;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Parser)]
#[command(
    name = "holoq",
    version,
    about = "Simulate and verify holonomic gates on bipartite multilevel systems"
)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Output directory for report files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Seed for sampled sweeps (overrides the scenario's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Extra report format written next to the always-written JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build each gate's calibrated drive, simulate it, and verify
    /// fidelity, cyclicity, and parallel transport against the target.
    VerifyGate,
    /// Verify parallel transport and cyclicity of declared Hamiltonians.
    HolonomyCheck,
    /// Emit the multi-block step plan table and step-count comparison.
    Plan {
        /// Number of blocks (bypasses the scenario).
        #[arg(long)]
        blocks: Option<usize>,
        /// Qudit dimension (2 or 3).
        #[arg(long, default_value_t = 2)]
        d: u8,
        /// Ions per block, comma separated.
        #[arg(long, value_delimiter = ',')]
        ion_counts: Option<Vec<usize>>,
        /// Allow layouts beyond the stated constructions (flagged as
        /// derived in the report).
        #[arg(long)]
        allow_extension: bool,
    },
    /// Execute plans in analytic mode and sweep basis inputs against the
    /// controlled-phase target.
    ExecutePlan,
    /// Validate the large-detuning effective Hamiltonians against the full
    /// ion-phonon model.
    EffectiveCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore failure when a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let needs_scenario = !matches!(cli.command, Command::Plan { blocks: Some(_), .. });
    let scenario = match &cli.scenario {
        Some(path) => match Scenario::load(path) {
            Ok(s) => Some(s),
            Err(err) => {
                eprintln!("scenario error: {err:#}");
                return ExitCode::from(2);
            }
        },
        None if needs_scenario => {
            eprintln!("this subcommand needs --scenario <path>");
            return ExitCode::from(2);
        }
        None => None,
    };
    let seed = cli.seed.or(scenario.as_ref().and_then(|s| s.seed));

    let result = match &cli.command {
        Command::VerifyGate => {
            checks::verify_gate(scenario.as_ref().unwrap(), cli.scenario.as_ref().unwrap(), seed)
        }
        Command::HolonomyCheck => checks::holonomy_check(
            scenario.as_ref().unwrap(),
            cli.scenario.as_ref().unwrap(),
            seed,
        ),
        Command::Plan { blocks, d, ion_counts, allow_extension } => checks::plan_report(
            scenario.as_ref(),
            cli.scenario.as_deref(),
            seed,
            blocks.map(|b| (b, *d, ion_counts.clone(), *allow_extension)),
        ),
        Command::ExecutePlan => checks::execute_plan_report(
            scenario.as_ref().unwrap(),
            cli.scenario.as_ref().unwrap(),
            seed,
        ),
        Command::EffectiveCheck => checks::effective_check(
            scenario.as_ref().unwrap(),
            cli.scenario.as_ref().unwrap(),
            seed,
        ),
    };

    let report = match result {
        Ok(r) => r,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<holoq::Error>() {
                Some(core_err) => scenario::error_exit_code(core_err),
                None => 2,
            };
            return ExitCode::from(code as u8);
        }
    };

    let text_too = cli.format == Format::Text
        || scenario
            .as_ref()
            .and_then(|s| s.output.format.as_deref())
            .map(|f| f == "text")
            .unwrap_or(false);
    match report.write(&cli.out, text_too) {
        Ok(path) => {
            print!("{}", report.render_text());
            println!("report written to {}", path.display());
        }
        Err(err) => {
            eprintln!("cannot write report: {err:#}");
            return ExitCode::from(2);
        }
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
