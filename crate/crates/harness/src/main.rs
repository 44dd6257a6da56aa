use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use condphase_harness::{run, validate, write_csv, ExperimentConfig, ExperimentId, HarnessError, Result};

#[derive(Parser)]
#[command(name = "condphase", version, about = "Run conditional phase-transition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Origin stability metric over a (p, k, m) grid.
    StabilitySweep(RunArgs),
    /// Dobrushin condition and comparison bound per (p, k, m).
    DobrushinCert(RunArgs),
    /// Contour series constants and the low-noise certificate per p.
    PeierlsCert(RunArgs),
    /// Prediction gaps and Pinsker bounds for finite hidden Markov models.
    EntropySuite(RunArgs),
    /// Plus/minus sandwich coupling for conditional Ising fields.
    CrfUniqueness(RunArgs),
    /// Conditional mixing metric for an i.i.d. field seen through a noisy channel.
    CrfMixing(RunArgs),
    /// Filter stability without conditional mixing on a four-state chain.
    BlackwellDemo(RunArgs),
    /// Report the size of every grid point without running anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides the config. Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Experiment to check; defaults to the one named in the config.
    #[arg(long, value_enum)]
    experiment: Option<ExperimentId>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn run_command(id: ExperimentId, args: RunArgs) -> Result<()> {
    let config = ExperimentConfig::load(&args.config)?;
    let id = config.resolve(Some(id))?;
    let out = run(&config, id, args.workers.unwrap_or_else(default_workers))?;
    let summary: Vec<String> = out
        .records
        .iter()
        .map(|r| r.summary())
        .chain(out.notes.iter().cloned())
        .collect();
    match args.output.or(config.output) {
        Some(path) => {
            let file = std::fs::File::create(&path)?;
            write_csv(std::io::BufWriter::new(file), &out.records)?;
            let mut stdout = std::io::stdout().lock();
            for line in &summary {
                writeln!(stdout, "{line}")?;
            }
            writeln!(stdout, "wrote {} rows to {}", out.records.len(), path.display())?;
        }
        None => {
            write_csv(std::io::stdout().lock(), &out.records)?;
            for line in &summary {
                eprintln!("{line}");
            }
        }
    }
    Ok(())
}

fn validate_command(args: ValidateArgs) -> Result<()> {
    let config = ExperimentConfig::load(&args.config)?;
    let id = config.resolve(args.experiment)?;
    let report = validate(&config, id);
    println!("{}: {} grid points", id.name(), report.items.len());
    for item in &report.items {
        println!(
            "  {:<28} states 2^{:<3} memory {} bytes",
            item.label, item.state_bits, item.memory_bytes
        );
    }
    for p in &report.problems {
        println!("  problem: {p}");
    }
    report.into_result().map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::StabilitySweep(a) => run_command(ExperimentId::StabilitySweep, a),
        Command::DobrushinCert(a) => run_command(ExperimentId::DobrushinCert, a),
        Command::PeierlsCert(a) => run_command(ExperimentId::PeierlsCert, a),
        Command::EntropySuite(a) => run_command(ExperimentId::EntropySuite, a),
        Command::CrfUniqueness(a) => run_command(ExperimentId::CrfUniqueness, a),
        Command::CrfMixing(a) => run_command(ExperimentId::CrfMixing, a),
        Command::BlackwellDemo(a) => run_command(ExperimentId::BlackwellDemo, a),
        Command::Validate(a) => validate_command(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &HarnessError) -> u8 {
    e.exit_code() as u8
}
