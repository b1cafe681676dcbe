//! Command-line front end: parse scenario files, run simulations and
//! validations, write datasets and reports.
//!
//! Exit codes: 0 success; 1 failed validation checks (or an internal
//! simulation failure); 2 scenario/config errors with line and key
//! diagnostics; 3 an exploding subject; 4 I/O failures. Output files are
//! written atomically (temp file + rename) or not at all.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recsim::engines::Engine;
use recsim::study::{self, ScenarioClass, ScenarioConfig};
use recsim::validate::run_suite;
use recsim::Error;

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_EXPLOSION: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "recsim", version, about = "Recurrent-event data simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Master seed, taking precedence over the scenario file.
    #[arg(long)]
    seed: Option<u64>,

    /// Engine override: inversion, thinning, gap-rejection or discrete.
    #[arg(long, value_parser = parse_engine)]
    engine: Option<Engine>,

    /// Grid step for the discrete engine.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a cohort and write the counting-process CSV.
    Simulate {
        /// Scenario file.
        #[arg(long)]
        scenario: PathBuf,

        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,

        #[command(flatten)]
        overrides: Overrides,

        /// Emit the realized frailty as the last CSV column.
        #[arg(long)]
        emit_frailty: bool,
    },

    /// Run the oracle suite for a scenario and report pass/fail per check.
    Validate {
        /// Scenario file.
        #[arg(long)]
        scenario: PathBuf,

        /// Validate this previously exported dataset instead of simulating.
        #[arg(long)]
        data: Option<PathBuf>,

        /// Write the machine-readable report here (one line per check).
        #[arg(long)]
        out: Option<PathBuf>,

        #[command(flatten)]
        overrides: Overrides,
    },

    /// Print the baseline x population x dependence taxonomy and the
    /// scenario keys selecting each cell.
    Scenarios,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse()
}

fn main() -> ExitCode {
    // Die quietly when stdout is a closed pipe (e.g. `recsim scenarios | head`).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Simulate {
            scenario,
            out,
            overrides,
            emit_frailty,
        } => run_simulate(&scenario, &out, &overrides, emit_frailty),
        Command::Validate {
            scenario,
            data,
            out,
            overrides,
        } => run_validate(&scenario, data.as_deref(), out.as_deref(), &overrides),
        Command::Scenarios => run_scenarios(),
    };
    match status {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(context: &str, err: std::io::Error) -> Failure {
        Failure {
            code: EXIT_IO,
            message: format!("{context}: {err}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Failure {
        let code = match err.root() {
            Error::Explosion { .. } => EXIT_EXPLOSION,
            Error::Parse { .. }
            | Error::Dataset { .. }
            | Error::InvalidScenario(_)
            | Error::InvalidParameter { .. }
            | Error::InvalidModel(_)
            | Error::EngineModel { .. }
            | Error::MissingFrailty => EXIT_CONFIG,
            _ => EXIT_CHECKS_FAILED,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

fn load_scenario(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::io(&path.display().to_string(), e))?;
    let mut config = recsim::scenario::parse_scenario(&text)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(engine) = overrides.engine {
        config.engine = engine;
        if engine != Engine::Discrete {
            config.dt = None;
        }
    }
    if let Some(dt) = overrides.dt {
        config.dt = Some(dt);
    }
    config.validate()?;
    Ok(config)
}

/// Write bytes through a temp file in the destination directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io_fail = |e| Failure::io(&path.display().to_string(), e);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_fail)?;
    tmp.write_all(bytes).map_err(io_fail)?;
    tmp.flush().map_err(io_fail)?;
    tmp.persist(path).map_err(|e| io_fail(e.error))?;
    Ok(())
}

fn run_simulate(
    scenario: &Path,
    out: &Path,
    overrides: &Overrides,
    emit_frailty: bool,
) -> Result<u8, Failure> {
    let config = load_scenario(scenario, overrides)?;
    let cohort = study::simulate_cohort(&config)?;
    let rows = study::to_counting_process(&cohort);
    let mut bytes = Vec::new();
    study::write_csv(&rows, config.covariates.len(), emit_frailty, &mut bytes)
        .map_err(|e| Failure::io("rendering csv", e))?;
    write_atomic(out, &bytes)?;

    let total_events: usize = cohort.iter().map(|h| h.n_events()).sum();
    println!(
        "{} subjects, {} events, {:.4} events/subject -> {}",
        cohort.len(),
        total_events,
        total_events as f64 / cohort.len() as f64,
        out.display()
    );
    Ok(0)
}

fn run_validate(
    scenario: &Path,
    data: Option<&Path>,
    out: Option<&Path>,
    overrides: &Overrides,
) -> Result<u8, Failure> {
    let config = load_scenario(scenario, overrides)?;
    let dataset = match data {
        Some(path) => {
            let file = fs::File::open(path)
                .map_err(|e| Failure::io(&path.display().to_string(), e))?;
            Some(study::read_csv(std::io::BufReader::new(file))?)
        }
        None => None,
    };

    let class = study::classify_scenario(&config);
    println!("scenario cell: {class}");
    let reports = run_suite(&config, dataset.as_ref())?;
    for report in &reports {
        println!("{report}");
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!(
        "{} of {} checks passed",
        reports.len() - failed,
        reports.len()
    );

    if let Some(path) = out {
        let mut bytes = Vec::new();
        for report in &reports {
            bytes.extend_from_slice(report.summary_line().as_bytes());
            bytes.push(b'\n');
        }
        write_atomic(path, &bytes)?;
    }
    Ok(if failed == 0 { 0 } else { EXIT_CHECKS_FAILED })
}

fn run_scenarios() -> Result<u8, Failure> {
    println!("taxonomy: baseline class x population x event-dependence\n");
    for cell in ScenarioClass::all_cells() {
        println!("{cell}");
        println!("    {}", cell.selecting_keys());
    }
    Ok(0)
}
