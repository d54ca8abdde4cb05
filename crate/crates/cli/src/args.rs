use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use ptlevels::Model;
use serde::Serialize;

use crate::Failure;

#[derive(Parser, Debug)]
#[command(name = "ptlevels", version, about = "Spectra of two-dimensional PT-symmetric cubic oscillators")]
pub struct Cli {
    /// File of `key=value` lines supplying defaults for the flags
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Directory receiving the exported files and metadata.json
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// File formats written to the output directory
    #[arg(long, global = true, value_delimiter = ',', value_enum)]
    pub formats: Option<Vec<FileFormat>>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Lowest eigenvalues of the truncated Hamiltonian at one coupling
    Spectrum(SpectrumArgs),
    /// Exact Rayleigh-Schrödinger series of one unperturbed level
    Perturb(PerturbArgs),
    /// Padé approximants of the series of one level
    Pade(PadeArgs),
    /// Track labeled branches over a coupling grid and classify crossings
    Sweep(SweepArgs),
    /// Real or imaginary parts of the branches as CSV and SVG
    Figures(FiguresArgs),
    /// Lowest eigenvalues for a sequence of truncations
    Convergence(ConvergenceArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Json,
    Svg,
}

/// What goes to standard output.
#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Report {
    Crossings,
    Branches,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub model: Model,
    #[arg(long, allow_negative_numbers = true)]
    pub g: f64,
    /// Highest total oscillator quanta kept in the basis
    #[arg(long, default_value_t = 40)]
    pub n_max: u32,
    #[arg(long, default_value_t = 6)]
    pub levels: usize,
    /// Fail when the values move by 1e-8 or more against N - 10
    #[arg(long)]
    pub check_convergence: bool,
    /// Label the values by tracking the branches from g = 0
    #[arg(long)]
    pub labels: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PerturbArgs {
    #[arg(long)]
    pub model: Model,
    /// Unperturbed level n (energy 2n + 2)
    #[arg(long)]
    pub level: u32,
    /// Highest power of g
    #[arg(long, default_value_t = 8)]
    pub order: u32,
    /// Orders above this use 320-bit floats (defaults to --order)
    #[arg(long)]
    pub exact_order: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PadeArgs {
    #[arg(long)]
    pub model: Model,
    #[arg(long)]
    pub level: u32,
    /// Only this branch of the level
    #[arg(long)]
    pub branch: Option<u32>,
    /// Numerator degree in g
    #[arg(long = "L", default_value_t = 20)]
    pub l: usize,
    /// Denominator degree in g
    #[arg(long = "M", default_value_t = 20)]
    pub m: usize,
    /// Couplings at which the approximants are evaluated
    #[arg(long, required = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub eval: Vec<f64>,
    /// Series orders above this use 320-bit floats
    #[arg(long)]
    pub exact_order: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: Model,
    #[arg(long, default_value_t = 0.0)]
    pub g_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub g_max: f64,
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[arg(long, default_value_t = 50)]
    pub n_max: u32,
    /// Highest unperturbed level whose branches are tracked
    #[arg(long, default_value_t = 6)]
    pub levels: u32,
    #[arg(long, default_value_t = 0.9)]
    pub overlap: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub imag_tol: f64,
    #[arg(long, value_enum, default_value_t = Report::Crossings)]
    pub report: Report,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FiguresArgs {
    /// 1, 2: real and imaginary parts for cubic12; 3, 4: the same for henonHeiles
    #[arg(long)]
    pub figure: u8,
    #[arg(long, default_value_t = 50)]
    pub n_max: u32,
    /// Upper end of the coupling range (6 for cubic12, 3 for henonHeiles)
    #[arg(long)]
    pub g_max: Option<f64>,
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[arg(long, default_value_t = 6)]
    pub levels: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub model: Model,
    #[arg(long, allow_negative_numbers = true)]
    pub g: f64,
    #[arg(long, default_value_t = 10)]
    pub levels: usize,
    #[arg(long, value_delimiter = ',', default_value = "20,30,40,50")]
    pub truncations: Vec<u32>,
    /// Fail when no pair of successive truncations agrees
    #[arg(long)]
    pub require: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

fn flag_value<'a>(args: &'a [OsString], name: &str) -> Option<&'a OsString> {
    let eq = format!("--{name}=");
    args.iter().enumerate().find_map(|(i, a)| {
        let s = a.to_str()?;
        if s == format!("--{name}") {
            args.get(i + 1)
        } else if s.starts_with(&eq) {
            Some(a)
        } else {
            None
        }
    })
}

fn given(args: &[OsString], name: &str) -> bool {
    let bare = format!("--{name}");
    let eq = format!("--{name}=");
    args.iter().filter_map(|a| a.to_str()).any(|s| s == bare || s.starts_with(&eq))
}

/// Splices the entries of `--config FILE` into the argument list right
/// after the subcommand, skipping keys that are also given as flags.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = flag_value(&args, "config") else {
        return Ok(args);
    };
    let path = path.to_string_lossy();
    let path = path.strip_prefix("--config=").unwrap_or(&path).to_string();
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::usage(format!("cannot read config {path}: {e}")))?;

    let cmd = Cli::command();
    let Some((pos, sub)) = args.iter().enumerate().skip(1).find_map(|(i, a)| Some((i, cmd.find_subcommand(a.to_str()?)?))) else {
        return Ok(args);
    };
    let mut inject = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Failure::usage(format!("{path}:{}: expected key=value", lineno + 1)))?;
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key) && key != "config")
            .ok_or_else(|| Failure::usage(format!("{path}:{}: unknown key {key:?} for {}", lineno + 1, sub.get_name())))?;
        if given(&args, key) {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                "true" => inject.push(OsString::from(format!("--{key}"))),
                "false" => {}
                _ => return Err(Failure::usage(format!("{path}:{}: {key} takes true or false", lineno + 1))),
            }
        } else {
            inject.push(OsString::from(format!("--{key}={value}")));
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, inject);
    Ok(out)
}
