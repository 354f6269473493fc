use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use varseq_core::commands::{exit_code, run_command, Options, COMMANDS};
use varseq_core::report::Format;
use varseq_core::{dsl, Error};

/// Symbolic variational calculus on jet bundles.
#[derive(Parser, Debug)]
#[command(name = "varseq", version, after_help = EXIT_CODES)]
struct Cli {
    /// One of: el, momenta, noether, secondvar, jacobi, bianchi, hamiltonian, verify
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(COMMANDS))]
    command: String,

    /// Problem file (`.vp`)
    file: PathBuf,

    /// Output format
    #[arg(long, env = "VARSEQ_FORMAT", default_value = "text")]
    format: Format,

    /// Override the derivative-order cap of the bundle
    #[arg(long)]
    max_order: Option<usize>,

    /// Numeric tolerance for kernel membership along the background
    #[arg(long)]
    tolerance: Option<f64>,
}

const EXIT_CODES: &str = "Exit codes: 0 ok, 1 failed identity or broken symmetry, 2 parse error, \
3 order overflow, 4 precondition or evaluation error";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let file = cli.file.display().to_string();
    let outcome = std::fs::read_to_string(&cli.file)
        .map_err(|e| Error::Precondition(format!("cannot read {file}: {e}")))
        .and_then(|src| dsl::load(&src, cli.max_order))
        .and_then(|problem| run_command(&cli.command, &file, &problem, &Options { tolerance: cli.tolerance }));
    let code = exit_code(&outcome);
    match outcome {
        Ok(doc) => print!("{}", doc.render(cli.format)),
        Err(e) => eprintln!("varseq: {file}: {e}"),
    }
    ExitCode::from(code as u8)
}
