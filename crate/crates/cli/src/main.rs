use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use qftnmr::pulse::{parse_pulse_text, qft3_reference_program};
use qftnmr_cli::{compile_to_text, run, verify_against_qft, Experiment, QftProgram, RunConfig};

#[derive(Parser)]
#[command(name = "qftnmr", version, about = "QFT period finding on a simulated NMR spin system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its summary and data files.
    Run(RunArgs),
    /// Compile a gate circuit (the QFT by default) to a pulse program.
    Compile {
        /// Circuit text file.
        #[arg(long)]
        circuit: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Expand swaps into CNOTs instead of relabeling.
        #[arg(long)]
        keep_swaps: bool,
        #[arg(long)]
        no_simplify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a pulse program against the QFT; prints a JSON report.
    Verify {
        /// Pulse program text file; the built-in three-qubit sequence if omitted.
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "full-qft-tomography")]
    experiment: Experiment,
    /// Molecule JSON; defaults to $QFTNMR_MOLECULE, then built-in alanine.
    #[arg(long)]
    molecule: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    r: usize,
    #[arg(long, default_value_t = 0)]
    x0: usize,
    /// Repetitions for period finding, sampled shots for experiment 2.
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    strict_delays: bool,
    #[arg(long)]
    diagonal_gradient: bool,
    /// Use the uncorrected three-spin pseudo-pure sequence.
    #[arg(long)]
    original_sequence: bool,
    #[arg(long, value_enum, default_value = "reference")]
    qft_program: QftProgram,
    /// Experiment 2 readout of the prepared state alone.
    #[arg(long)]
    baseline: bool,
    /// CSV of `x,f(x)` rows for period finding.
    #[arg(long)]
    function_table: Option<PathBuf>,
    /// Also write Lorentzian lineshapes with this full width.
    #[arg(long)]
    linewidth: Option<f64>,
}

impl From<RunArgs> for RunConfig {
    fn from(a: RunArgs) -> Self {
        RunConfig {
            experiment: a.experiment,
            molecule_path: a.molecule,
            n_qubits: a.n,
            r: a.r,
            x0: a.x0,
            shots: a.shots,
            seed: a.seed,
            output_dir: a.out,
            strict_delays: a.strict_delays,
            diagonal_gradient: a.diagonal_gradient,
            original_sequence: a.original_sequence,
            qft_program: a.qft_program,
            baseline: a.baseline,
            function_table: a.function_table,
            linewidth_hz: a.linewidth,
        }
    }
}

fn main() -> ExitCode {
    match try_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn try_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = RunConfig::from(args);
            let report = run(&cfg)?;
            report.write(&cfg.output_dir)?;
            print!("{}", report.summary);
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                for f in report.failures() {
                    eprintln!("invariant failed: {}: {}", f.name, f.detail);
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Compile { circuit, n, keep_swaps, no_simplify, out } => {
            let text = circuit.map(|p| fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))).transpose()?;
            let program = compile_to_text(text.as_deref(), n, keep_swaps, no_simplify)?;
            let body = format!("{}\n", program.to_text());
            match out {
                Some(p) => fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{body}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { program, tolerance } => {
            let p = match program {
                Some(path) => parse_pulse_text(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?,
                None => qft3_reference_program(),
            };
            let report = verify_against_qft(&p, tolerance)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
