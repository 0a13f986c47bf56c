use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tvq_cli::protocol::{self, BraidOptions, CompileTarget, ErrorsOptions, LatticeKind, LatticeSpec, DEFAULT_TRIALS};
use tvq_cli::verify::{self, Scope, VerifyOptions};
use tvq_cli::{Report, DEFAULT_SEED};

/// Simulator and protocol runner for the Fibonacci Turaev-Viro code.
///
/// Set TVQ_LOG (e.g. TVQ_LOG=info) for progress on stderr.
#[derive(Parser, Debug)]
#[command(name = "tvq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override every residual tolerance of the command.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed of every random choice.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run invariant suites; exits nonzero if any check fails.
    Verify {
        #[arg(value_enum, default_value_t = Scope::All)]
        scope: Scope,
        /// F-data file (JSON dump) to verify instead of the built-in data.
        #[arg(long)]
        fusion_file: Option<PathBuf>,
    },
    /// F-data utilities.
    Fusion {
        #[command(subcommand)]
        command: FusionCommand,
    },
    /// Lattice utilities.
    Lattice {
        #[command(subcommand)]
        command: LatticeCommand,
    },
    /// Print the code-space dimension of a lattice file.
    GroundDim {
        lattice: PathBuf,
        /// Fail unless the dimension equals this value.
        #[arg(long)]
        expect: Option<usize>,
    },
    /// Run the constant-depth braid and report its depth and logical action.
    Braid {
        #[arg(long)]
        distance: usize,
        /// Also run the hop-by-hop baseline and compare.
        #[arg(long)]
        compare_baseline: bool,
        /// Write the compiled braid circuit to this file.
        #[arg(long)]
        export_circuit: Option<PathBuf>,
    },
    /// Error-string stretch and light cone of the braid.
    Errors {
        #[arg(long, value_delimiter = ',', default_values_t = vec![4, 8])]
        distances: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        /// Skip the light-cone computation.
        #[arg(long)]
        no_lightcone: bool,
        /// Also write the per-trial CSV table to this file.
        #[arg(long)]
        rows: Option<PathBuf>,
    },
    /// Lower a move or the braid to a gate circuit (JSON).
    Compile {
        #[command(subcommand)]
        target: CompileCommand,
    },
}

#[derive(Subcommand, Debug)]
enum FusionCommand {
    /// Print the built-in Fibonacci F-data as JSON (the format read by
    /// `verify --fusion-file`).
    Export,
}

#[derive(Subcommand, Debug)]
enum LatticeCommand {
    /// Build a lattice and print its JSON document.
    Build(BuildArgs),
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[arg(value_enum)]
    kind: LatticeKind,
    /// Torus cells or patch vertices, as A,B.
    #[arg(long, value_parser = parse_pair, default_value = "2,2")]
    size: (usize, usize),
    /// Patch puncture as ROW,COL (repeatable).
    #[arg(long = "puncture", value_parser = parse_pair)]
    punctures: Vec<(usize, usize)>,
}

#[derive(Subcommand, Debug)]
enum CompileCommand {
    /// The full braid at a distance.
    Braid {
        #[arg(long)]
        distance: usize,
    },
    /// One F-move on an edge of a lattice file.
    Fmove {
        #[arg(long)]
        lattice: PathBuf,
        #[arg(long)]
        edge: u32,
    },
    /// One 1-3 move on a triangle of a lattice file.
    Split {
        #[arg(long)]
        lattice: PathBuf,
        #[arg(long)]
        triangle: u32,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected two comma-separated integers, got {s:?}"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

/// What a command produced: a report (rendered per `--format`) or a
/// standalone document.
enum Output {
    Report(Report),
    Document(String),
}

fn run(cli: &Cli) -> Result<Output> {
    Ok(match &cli.command {
        Command::Verify { scope, fusion_file } => Output::Report(verify::verify(&VerifyOptions {
            scope: *scope,
            tol: cli.tol,
            seed: cli.seed,
            fusion_file: fusion_file.clone(),
        })?),
        Command::Fusion { command: FusionCommand::Export } => Output::Document(verify::fusion_document()),
        Command::Lattice { command: LatticeCommand::Build(a) } => {
            let spec = LatticeSpec { kind: a.kind, size: a.size, punctures: a.punctures.clone() };
            Output::Document(protocol::lattice_document(&protocol::build_lattice(&spec)?))
        }
        Command::GroundDim { lattice, expect } => Output::Report(protocol::ground_dim(lattice, *expect)?),
        Command::Braid { distance, compare_baseline, export_circuit } => {
            Output::Report(protocol::run_braid(&BraidOptions {
                distance: *distance,
                compare_baseline: *compare_baseline,
                export_circuit: export_circuit.clone(),
                tol: cli.tol,
            })?)
        }
        Command::Errors { distances, trials, no_lightcone, rows } => {
            let report = protocol::run_errors(&ErrorsOptions {
                distances: distances.clone(),
                trials: *trials,
                seed: cli.seed,
                lightcone: !no_lightcone,
            })?;
            if let Some(p) = rows {
                let table = report.table.as_deref().unwrap_or_default();
                std::fs::write(p, table).with_context(|| format!("writing {}", p.display()))?;
            }
            Output::Report(report)
        }
        Command::Compile { target } => Output::Document(protocol::compile(&match target {
            CompileCommand::Braid { distance } => CompileTarget::Braid { distance: *distance },
            CompileCommand::Fmove { lattice, edge } => CompileTarget::Fmove { lattice: lattice.clone(), edge: *edge },
            CompileCommand::Split { lattice, triangle } => {
                CompileTarget::Split { lattice: lattice.clone(), triangle: *triangle }
            }
        })?),
    })
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TVQ_LOG")).format_timestamp(None).init();
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| match out {
        Output::Document(doc) => emit(&cli, &doc).map(|_| true),
        Output::Report(r) => {
            let text = match cli.format {
                Format::Json => r.to_json(),
                Format::Csv => r.to_csv(),
                Format::Text => r.to_text(),
            };
            emit(&cli, &text).map(|_| r.passed)
        }
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
