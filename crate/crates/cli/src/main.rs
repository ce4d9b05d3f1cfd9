use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use malaria_dde::scenario::{
    run_scenario, run_sweep, write_outputs, write_sweep, Format, Report, RunOptions, Scenario,
    ScenarioError, Section, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "malaria-dde",
    version,
    about = "Batch runs of the delayed malaria transmission model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory; overrides the scenario's `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Do not echo the report to stdout.
    #[arg(long, global = true)]
    quiet: bool,

    /// Seed for randomized histories; overrides the file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis a scenario requests and write its outputs.
    Simulate { scenario: PathBuf },
    /// Tabulate derived quantities over one parameter axis.
    Sweep { sweep: PathBuf },
    /// Print the report block for a single analysis.
    Report {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        only: Only,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Only {
    Stability,
    Lyapunov,
    Persistence,
}

impl From<Only> for Section {
    fn from(o: Only) -> Self {
        match o {
            Only::Stability => Section::Stability,
            Only::Lyapunov => Section::Lyapunov,
            Only::Persistence => Section::Persistence,
        }
    }
}

/// `--out`, else the file's `output.dir` taken relative to the file, else `out`.
fn output_dir(cli_out: &Option<PathBuf>, file: &Path, configured: &Option<PathBuf>) -> PathBuf {
    if let Some(dir) = cli_out {
        return dir.clone();
    }
    match configured {
        Some(dir) if dir.is_absolute() => dir.clone(),
        Some(dir) => file.parent().unwrap_or(Path::new(".")).join(dir),
        None => PathBuf::from("out"),
    }
}

/// Writes the report to stdout; a closed pipe (`| head`) is not an error.
fn echo(report: &Report) {
    let _ = io::stdout().lock().write_all(report.to_string().as_bytes());
}

fn run(cli: &Cli) -> Result<(), ScenarioError> {
    match &cli.command {
        Command::Simulate { scenario } => {
            let sc = Scenario::load(scenario)?;
            let outcome = run_scenario(
                &sc,
                &RunOptions {
                    only: None,
                    seed: cli.seed,
                },
            )?;
            let dir = output_dir(&cli.out, scenario, &sc.output.dir);
            let written = write_outputs(&outcome, &dir, &sc.output.formats)?;
            if !cli.quiet {
                echo(&outcome.report);
                for path in written {
                    eprintln!("wrote {}", path.display());
                }
            }
        }
        Command::Sweep { sweep } => {
            let spec = SweepSpec::load(sweep)?;
            let table = run_sweep(&spec, cli.seed)?;
            let dir = output_dir(&cli.out, sweep, &spec.base.output.dir);
            let path = write_sweep(&table, &dir)?;
            if !cli.quiet {
                let failed = table.rows.iter().filter(|r| r.cells.is_err()).count();
                eprintln!(
                    "wrote {} ({} rows, {failed} failed)",
                    path.display(),
                    table.rows.len()
                );
            }
        }
        Command::Report { scenario, only } => {
            let sc = Scenario::load(scenario)?;
            let outcome = run_scenario(
                &sc,
                &RunOptions {
                    only: Some((*only).into()),
                    seed: cli.seed,
                },
            )?;
            if let Some(dir) = &cli.out {
                write_outputs(&outcome, dir, &[Format::Report])?;
            }
            if !cli.quiet {
                echo(&outcome.report);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // usage errors are input errors: exit 1, keeping 2 for numerical failure
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
