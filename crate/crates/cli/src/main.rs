mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use magnon_cmt::io::parse_angle;

pub const MANIFEST_SCHEMA: &str = "1";

#[derive(Debug, Parser)]
#[command(
    name = "magcmt",
    version = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1, manifest schema 1)"),
    about = "Transmission spectra, detuning maps and fits for a magnon and a cavity coupled through a waveguide"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ManifestArgs {
    /// Where to write the run manifest (default: next to --out).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Do not write a run manifest.
    #[arg(long)]
    pub no_manifest: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Complex S21 over a cavity-detuning grid.
    Spectrum {
        config: PathBuf,
        /// Dominant-mode propagation phase (radians or pi:x); default from the config.
        #[arg(long, value_parser = angle, allow_hyphen_values = true)]
        phase_a: Option<f64>,
        /// Secondary-mode phase; default follows phase_a via the config's phase_ratio.
        #[arg(long, value_parser = angle, allow_hyphen_values = true)]
        phase_b: Option<f64>,
        /// Cavity detuning range `LO,HI` in MHz.
        #[arg(long, value_parser = range, allow_hyphen_values = true, default_value = "-800,800")]
        freq_range: (f64, f64),
        #[arg(long, default_value_t = 1601)]
        points: usize,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        manifest: ManifestArgs,
    },
    /// |S21| over cavity and magnon detunings, with a coupling classification sidecar.
    Map {
        config: PathBuf,
        #[arg(long, value_parser = angle, allow_hyphen_values = true, default_value = "0")]
        phase_a: f64,
        /// Magnon detuning range `LO,HI` in MHz.
        #[arg(long, value_parser = range, allow_hyphen_values = true, default_value = "-300,300")]
        dm_range: (f64, f64),
        #[arg(long, default_value_t = 241)]
        dm_points: usize,
        /// Cavity detuning range `LO,HI` in MHz.
        #[arg(long, value_parser = range, allow_hyphen_values = true, default_value = "-800,800")]
        dc_range: (f64, f64),
        #[arg(long, default_value_t = 321)]
        dc_points: usize,
        /// Apply critical cavity loading (zero transmission at resonance).
        #[arg(long)]
        critical: bool,
        /// Output CSV; the classification goes to `<out>.classification.json`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        manifest: ManifestArgs,
    },
    /// Dips, gaps, coupling class and |C| as the dominant phase varies.
    PhaseSweep {
        config: PathBuf,
        /// Phase range `LO,HI` (radians or pi:x).
        #[arg(long, value_parser = range, allow_hyphen_values = true, default_value = "0,pi:2")]
        phi_range: (f64, f64),
        #[arg(long, default_value_t = 5)]
        steps: usize,
        #[arg(long)]
        critical: bool,
        /// Cavity detuning range `LO,HI` in MHz for the dip search.
        #[arg(long, value_parser = range, allow_hyphen_values = true, default_value = "-800,800")]
        dc_range: (f64, f64),
        #[arg(long, default_value_t = 1601)]
        dc_points: usize,
        /// Magnon detuning range `LO,HI` in MHz for the classification.
        #[arg(long, value_parser = range, allow_hyphen_values = true, default_value = "-300,300")]
        dm_range: (f64, f64),
        #[arg(long, default_value_t = 241)]
        dm_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        manifest: ManifestArgs,
    },
    /// Compare frequency-domain S21 with time integration on random samples.
    OracleCheck {
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 128)]
        steps_per_period: usize,
        /// Corrupt the frequency-domain engine to confirm the check fails.
        #[arg(long)]
        inject_fault: bool,
        /// JSON report of every sample.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        manifest: ManifestArgs,
    },
    /// Fit the config's parameters to a measured spectrum.
    Fit {
        /// CSV with `omega_MHz` and `abs_S21` (optional `phase_rad`, or `re_S21`/`im_S21`).
        data: PathBuf,
        /// Initial guess and fixed structure.
        config: PathBuf,
        /// Comma-separated parameters to hold fixed, e.g. `phase_a,kappa_c0`.
        #[arg(long, value_delimiter = ',')]
        freeze: Vec<String>,
        /// Seed for the jittered extra starts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        starts: usize,
        /// Fit real and imaginary parts (needs phase data).
        #[arg(long)]
        complex: bool,
        #[arg(long, default_value_t = 20_000)]
        max_evals: usize,
        /// Fitted parameters as JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        manifest: ManifestArgs,
    },
    /// Write a config file with the built-in parameter set.
    Init {
        /// single_cavity, single_coupled, multi_cavity or multi_coupled.
        #[arg(long, default_value = "multi_coupled")]
        scenario: String,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.2)]
        xi: f64,
        #[arg(long)]
        critical: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a manifest from its config snapshot and verify the outputs.
    Rerun { manifest: PathBuf },
}

fn angle(s: &str) -> Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

fn range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    Ok((angle(lo)?, angle(hi)?))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli, std::env::args().skip(1).collect()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
