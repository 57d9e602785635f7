use clap::{Parser, Subcommand, ValueEnum};
use npd_cli::analysis::{self, Table};
use npd_cli::config::RunConfig;
use npd_cli::experiments::{self, Summary};
use npd_cli::{CliError, EXIT_CHECKS_FAILED};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "npd",
    version,
    about = "Nernst-Planck-Darcy simulations and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Continue a run from its latest checkpoint (or the one given).
    Resume {
        config: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Recompute an experiment report from a stored CSV.
    Analyze {
        csv: PathBuf,
        #[arg(long, value_enum)]
        experiment: AnalyzeKind,
        /// Fit window `start,end` (decay and volume reports).
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
        /// Late-time window start for the attractor report.
        #[arg(long)]
        late_from: Option<f64>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a config file without running it.
    ValidateConfig { config: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AnalyzeKind {
    DecayNoBodyCharge,
    AttractorWithBodyCharge,
    VolumeDecay,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected start,end")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a < b {
        Ok((a, b))
    } else {
        Err("start must be below end".into())
    }
}

fn analyze(
    csv: &PathBuf,
    kind: AnalyzeKind,
    window: Option<(f64, f64)>,
    late_from: Option<f64>,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let table = Table::read(csv)?;
    let mut buf = Vec::new();
    match kind {
        AnalyzeKind::DecayNoBodyCharge => {
            analysis::check_diagnostics(&table)?;
            let t_end = table.rows.last().map_or(0.0, |r| r[0]);
            let window = window.unwrap_or(analysis::default_decay_window(t_end));
            analysis::write_decay_report(&analysis::decay_report(&table, window)?, &mut buf)?;
        }
        AnalyzeKind::AttractorWithBodyCharge => {
            analysis::check_diagnostics(&table)?;
            let t_end = table.rows.last().map_or(0.0, |r| r[0]);
            let from = late_from.unwrap_or(t_end / 2.0);
            analysis::write_attractor_report(&analysis::attractor_report(&table, from)?, &mut buf)?;
        }
        AnalyzeKind::VolumeDecay => {
            let w = window
                .ok_or_else(|| CliError::Config("--window is required for volume_decay".into()))?;
            analysis::write_rate_table(&analysis::rate_table(&table, w)?, &mut buf)?;
        }
    }
    match out {
        Some(path) => std::fs::write(&path, &buf).map_err(|e| CliError::io(&path, e)),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn print_summary(summary: &Summary) {
    println!("{}:", summary.experiment);
    for line in &summary.lines {
        println!("  {line}");
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    npd_cli::configure_threads()?;
    match cli.command {
        Command::ValidateConfig { config } => {
            let cfg = RunConfig::load(&config)?;
            println!("{}: ok ({})", config.display(), cfg.experiment.name());
            Ok(0)
        }
        Command::Run { config } => run_with_record(&config, None),
        Command::Resume { config, checkpoint } => run_with_record(&config, Some(checkpoint)),
        Command::Analyze {
            csv,
            experiment,
            window,
            late_from,
            out,
        } => {
            analyze(&csv, experiment, window, late_from, out)?;
            Ok(0)
        }
    }
}

/// Runs (or resumes) and leaves an error record in the output directory
/// when the simulation itself fails.
fn run_with_record(config: &PathBuf, resume: Option<Option<PathBuf>>) -> Result<i32, CliError> {
    let cfg = RunConfig::load(config)?;
    let outcome = match &resume {
        None => experiments::run(&cfg),
        Some(ckpt) => experiments::resume(&cfg, ckpt.as_deref()),
    };
    match outcome {
        Ok(summary) => {
            print_summary(&summary);
            Ok(if summary.passed {
                0
            } else {
                EXIT_CHECKS_FAILED
            })
        }
        Err(e) => {
            if !matches!(e, CliError::Config(_)) {
                experiments::write_error_record(&cfg.output_dir, &e)?;
            }
            Err(e)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            let time = e.time().map(|t| format!(" time={t}")).unwrap_or_default();
            eprintln!("npd: error kind={}{time}: {e}", e.kind());
            e.exit_code()
        }
    };
    std::process::exit(code);
}
