use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kspace_core::ErrorClass;

mod commands;
mod fixtures;
mod output;

#[derive(Debug, Parser)]
#[command(name = "kspace", version, about = "Pseudo-pure state preparation by spatial phase encoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Winding history of every data subspace under an encoding schedule.
    Ledger(LedgerArgs),
    /// Single pseudo-pure state preparation on a molecule.
    Prepare(PrepareArgs),
    /// Encode all subspaces at once, then read them back by echoes or a k-space scan.
    EncodeDecode(EncodeArgs),
    /// Validate a molecule config and print it in normal form.
    Molecule(MoleculeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, clap::Args)]
pub struct LedgerArgs {
    /// Number of data qubits.
    #[arg(long)]
    pub n: usize,
    /// `uniform`, `alternating`, `multi` or `target=<bits>`.
    #[arg(long)]
    pub schedule: String,
    /// Gradient windings per k_0 unit.
    #[arg(long, default_value_t = 1)]
    pub k0: i64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Compare with the shipped three-qubit reference tables.
    #[arg(long)]
    pub check_paper: bool,
}

#[derive(Debug, clap::Args)]
pub struct PrepareArgs {
    /// `alanine` or a TOML molecule file.
    #[arg(long, default_value = "alanine")]
    pub molecule: String,
    /// Target data subspace, most significant qubit first.
    #[arg(long)]
    pub target: String,
    /// Start from the ancilla polarization alone.
    #[arg(long)]
    pub demo_sigma_za: bool,
    #[arg(long, default_value_t = 64)]
    pub slices: usize,
    #[arg(long, default_value_t = 1)]
    pub k0: i64,
    /// Run compiled pulse programs instead of ideal gates.
    #[arg(long)]
    pub pulse_level: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Compare per-step peak counts with the shipped reference.
    #[arg(long)]
    pub check_paper: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Echo,
    Scan,
}

#[derive(Debug, clap::Args)]
pub struct EncodeArgs {
    #[arg(long, default_value = "alanine")]
    pub molecule: String,
    /// Keep the first n data spins.
    #[arg(long, conflicts_with = "data")]
    pub n_data: Option<usize>,
    /// Comma separated data spin names to keep.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub demo_sigma_za: bool,
    #[arg(long, default_value_t = 64)]
    pub slices: usize,
    #[arg(long, default_value_t = 1)]
    pub k0: i64,
    /// Encoding gradient, G/cm.
    #[arg(long, default_value_t = 2.5)]
    pub g_enc: f64,
    /// Encoding gradient length, s.
    #[arg(long, default_value_t = 1.5e-3)]
    pub delta_enc: f64,
    /// Readout gradient, G/cm.
    #[arg(long, default_value_t = 0.15)]
    pub g_read: f64,
    /// Samples of the echo trace, or per scan window.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Diffusion coefficient, cm^2/s; enables the attenuation report.
    #[arg(long = "diffusion-D")]
    pub diffusion_d: Option<f64>,
    /// Gradient pulse length for the attenuation report, s (default: --delta-enc).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Constant conditional-NOT time, s (default: 1/(2J) per coupling).
    #[arg(long = "Delta")]
    pub gate_time: Option<f64>,
    /// Physical k_0, rad/cm (default: ancilla gamma x g_enc x delta_enc).
    #[arg(long)]
    pub k0_phys: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Compare echo times and assignments with the shipped reference.
    #[arg(long)]
    pub check_paper: bool,
}

#[derive(Debug, clap::Args)]
pub struct MoleculeArgs {
    #[arg(long, default_value = "alanine")]
    pub molecule: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Core(kspace_core::Error),
    Io(PathBuf, std::io::Error),
    Config(String),
    Mismatch(Vec<String>),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(path.to_path_buf(), e)
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Validation => 2,
                ErrorClass::Numerical => 3,
            },
            CliError::Io(..) | CliError::Config(_) => 1,
            CliError::Mismatch(_) => 2,
        }
    }
}

impl From<kspace_core::Error> for CliError {
    fn from(e: kspace_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Config(s) => write!(f, "config: {s}"),
            CliError::Mismatch(lines) => write!(f, "reference mismatch:\n  {}", lines.join("\n  ")),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Ledger(a) => commands::ledger(&a),
        Command::Prepare(a) => commands::prepare(&a),
        Command::EncodeDecode(a) => commands::encode_decode(&a),
        Command::Molecule(a) => commands::molecule(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
