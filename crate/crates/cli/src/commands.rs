use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use magnon_cmt::analysis::{classify_coupling, detuning_map, find_dips, spectrum, CouplingClassification};
use magnon_cmt::fitting::{fit_multistart, FitOptions, FitProblem, ParamKind};
use magnon_cmt::io::{config_to_toml, load_config, read_measured, write_map, write_spectrum};
use magnon_cmt::multi::cooperativity_multi;
use magnon_cmt::oracle::{oracle_check, Fault, ORACLE_RTOL};
use magnon_cmt::single::cooperativity_single;
use magnon_cmt::solver::OracleOptions;
use magnon_cmt::system::cavity_loading;
use magnon_cmt::{linspace, preset_config, validate, CriticalVariant, Error, Loading, Scenario, ValidatedConfig};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{record, sha256_file, sibling, RunManifest};
use crate::{Cli, Command, ManifestArgs, MANIFEST_SCHEMA};

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_SCENARIO: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;
pub const EXIT_ORACLE: u8 = 6;
pub const EXIT_MISMATCH: u8 = 7;

#[derive(Debug)]
pub enum CliError {
    OracleFailed(Vec<usize>),
    Mismatch(Vec<PathBuf>),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::OracleFailed(idx) => write!(f, "oracle check failed for samples {idx:?}"),
            CliError::Mismatch(paths) => write!(f, "outputs differ from the manifest: {paths:?}"),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config { .. } | Error::Parse(_) => EXIT_CONFIG,
                Error::Scenario { .. } => EXIT_SCENARIO,
                Error::Singular { .. } | Error::Unstable { .. } | Error::NotConverged { .. } | Error::Numerical(_) => {
                    EXIT_NUMERICAL
                }
                Error::Io(_) => EXIT_IO,
            };
        }
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::OracleFailed(_) => EXIT_ORACLE,
                CliError::Mismatch(_) => EXIT_MISMATCH,
                CliError::Usage(_) => EXIT_USAGE,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_IO
}

struct Run {
    outputs: Vec<PathBuf>,
    grids: serde_json::Value,
    seed: Option<u64>,
    config: Option<String>,
    failure: Option<CliError>,
}

pub fn dispatch(cli: &Cli, args: Vec<String>) -> Result<ExitCode> {
    match &cli.command {
        Command::Rerun { manifest } => rerun(manifest),
        Command::Init {
            scenario,
            eta,
            xi,
            critical,
            out,
        } => {
            init(scenario, *eta, *xi, *critical, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        cmd => {
            let started = Instant::now();
            let run = execute(cmd)?;
            if let Some(path) = manifest_path(cmd) {
                RunManifest {
                    schema_version: MANIFEST_SCHEMA.into(),
                    tool_version: env!("CARGO_PKG_VERSION").into(),
                    subcommand: subcommand_name(cmd).into(),
                    args,
                    config: run.config.clone(),
                    grids: run.grids.clone(),
                    seed: run.seed,
                    outputs: record(&run.outputs)?,
                    wall_clock_s: started.elapsed().as_secs_f64(),
                }
                .write(&path)?;
            }
            match run.failure {
                Some(f) => Err(f.into()),
                None => Ok(ExitCode::SUCCESS),
            }
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Spectrum { .. } => "spectrum",
        Command::Map { .. } => "map",
        Command::PhaseSweep { .. } => "phase-sweep",
        Command::OracleCheck { .. } => "oracle-check",
        Command::Fit { .. } => "fit",
        Command::Init { .. } => "init",
        Command::Rerun { .. } => "rerun",
    }
}

fn manifest_path(cmd: &Command) -> Option<PathBuf> {
    let (m, out): (&ManifestArgs, Option<&PathBuf>) = match cmd {
        Command::Spectrum { manifest, out, .. }
        | Command::PhaseSweep { manifest, out, .. }
        | Command::OracleCheck { manifest, out, .. }
        | Command::Fit { manifest, out, .. } => (manifest, out.as_ref()),
        Command::Map { manifest, out, .. } => (manifest, Some(out)),
        Command::Init { .. } | Command::Rerun { .. } => return None,
    };
    if m.no_manifest {
        return None;
    }
    m.manifest.clone().or_else(|| out.map(|o| sibling(o, "manifest.json")))
}

fn config_path_mut(cmd: &mut Command) -> Option<&mut PathBuf> {
    match cmd {
        Command::Spectrum { config, .. }
        | Command::Map { config, .. }
        | Command::PhaseSweep { config, .. }
        | Command::OracleCheck { config, .. }
        | Command::Fit { config, .. } => Some(config),
        Command::Init { .. } | Command::Rerun { .. } => None,
    }
}

fn load(path: &Path) -> Result<ValidatedConfig> {
    load_config(path).with_context(|| format!("config {}", path.display()))
}

fn with_critical(cfg: ValidatedConfig, critical: bool) -> Result<ValidatedConfig> {
    if critical && !cfg.loading().is_critical() {
        Ok(cfg.with(|c| c.loading = Loading::Critical(CriticalVariant::Complex))?)
    } else {
        Ok(cfg)
    }
}

fn grid(key: &str, (lo, hi): (f64, f64), points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::Config {
            key: key.into(),
            reason: "grid needs at least one point".into(),
        }
        .into());
    }
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::Config {
            key: key.into(),
            reason: format!("range must be finite with LO <= HI, got {lo},{hi}"),
        }
        .into());
    }
    Ok(linspace(lo, hi, points))
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut w = writer(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn execute(cmd: &Command) -> Result<Run> {
    match cmd {
        Command::Spectrum {
            config,
            phase_a,
            phase_b,
            freq_range,
            points,
            out,
            ..
        } => {
            let cfg = load(config)?;
            let mut phases = match phase_a {
                Some(a) => cfg.phases_for(*a),
                None => cfg.phases(),
            };
            if let Some(b) = phase_b {
                let i = cfg.secondary().ok_or_else(|| Error::Config {
                    key: "phase_b".into(),
                    reason: "the config has a single waveguide mode".into(),
                })?;
                phases[i] = *b;
            }
            let dc = grid("freq_range", *freq_range, *points)?;
            let s = spectrum(&cfg, &phases, &dc)?;
            let mut w = writer(out.as_deref())?;
            write_spectrum(&mut w, &s, cfg.cavity().omega)?;
            w.flush()?;
            Ok(Run {
                outputs: out.iter().cloned().collect(),
                grids: json!({ "delta_c_MHz": [freq_range.0, freq_range.1, points], "phases": phases }),
                seed: None,
                config: Some(config_to_toml(cfg.config())),
                failure: None,
            })
        }
        Command::Map {
            config,
            phase_a,
            dm_range,
            dm_points,
            dc_range,
            dc_points,
            critical,
            out,
            ..
        } => {
            let cfg = with_critical(load(config)?, *critical)?;
            let dm = grid("dm_range", *dm_range, *dm_points)?;
            let dc = grid("dc_range", *dc_range, *dc_points)?;
            let map = detuning_map(&cfg, *phase_a, &dc, &dm)?;
            let class = classify_coupling(&cfg, *phase_a, &dm)?;
            let loading = cavity_loading(&cfg, &cfg.phases_for(*phase_a))?;
            let mut w = writer(Some(out))?;
            write_map(&mut w, &map)?;
            w.flush()?;
            let sidecar = sibling(out, "classification.json");
            write_json(
                Some(&sidecar),
                &json!({
                    "phase_a": phase_a,
                    "scenario": cfg.scenario().name(),
                    "critical": cfg.loading().is_critical(),
                    "cavity_loading_re_MHz": loading.re,
                    "cavity_loading_im_MHz": loading.im,
                    "classification": class,
                }),
            )?;
            Ok(Run {
                outputs: vec![out.clone(), sidecar],
                grids: json!({
                    "delta_c_MHz": [dc_range.0, dc_range.1, dc_points],
                    "delta_m_MHz": [dm_range.0, dm_range.1, dm_points],
                    "phase_a": phase_a,
                }),
                seed: None,
                config: Some(config_to_toml(cfg.config())),
                failure: None,
            })
        }
        Command::PhaseSweep {
            config,
            phi_range,
            steps,
            critical,
            dc_range,
            dc_points,
            dm_range,
            dm_points,
            out,
            ..
        } => {
            let cfg = with_critical(load(config)?, *critical)?;
            let phis = grid("phi_range", *phi_range, *steps)?;
            let dc = grid("dc_range", *dc_range, *dc_points)?;
            let dm = grid("dm_range", *dm_range, *dm_points)?;
            let mut w = csv::Writer::from_writer(writer(out.as_deref())?);
            w.write_record(SWEEP_HEADER)?;
            for phi in phis {
                w.write_record(sweep_row(&cfg, phi, &dc, &dm)?)?;
            }
            w.flush()?;
            Ok(Run {
                outputs: out.iter().cloned().collect(),
                grids: json!({
                    "phi_A_rad": [phi_range.0, phi_range.1, steps],
                    "delta_c_MHz": [dc_range.0, dc_range.1, dc_points],
                    "delta_m_MHz": [dm_range.0, dm_range.1, dm_points],
                }),
                seed: None,
                config: Some(config_to_toml(cfg.config())),
                failure: None,
            })
        }
        Command::OracleCheck {
            config,
            samples,
            seed,
            steps_per_period,
            inject_fault,
            out,
            ..
        } => {
            let cfg = load(config)?;
            let opts = OracleOptions {
                steps_per_period: *steps_per_period,
                ..OracleOptions::default()
            };
            let fault = if *inject_fault { Fault::CavitySign } else { Fault::None };
            let results = oracle_check(&cfg, *samples, *seed, &opts, fault)?;
            let failing: Vec<usize> = results.iter().filter(|s| !s.passed(ORACLE_RTOL)).map(|s| s.index).collect();
            let mut stdout = io::stdout().lock();
            for s in &results {
                let tag = if s.passed(ORACLE_RTOL) { "PASS" } else { "FAIL" };
                writeln!(
                    stdout,
                    "{tag} sample {:>3}: omega {:.6} MHz, rel error {:.3e}",
                    s.index, s.omega, s.rel_error
                )?;
            }
            writeln!(
                stdout,
                "{} of {} samples within {ORACLE_RTOL:e}",
                results.len() - failing.len(),
                results.len()
            )?;
            if let Some(p) = out {
                write_json(
                    Some(p),
                    &json!({ "rtol": ORACLE_RTOL, "seed": seed, "fault_injected": inject_fault, "samples": results }),
                )?;
            }
            Ok(Run {
                outputs: out.iter().cloned().collect(),
                grids: json!({ "samples": samples, "steps_per_period": steps_per_period }),
                seed: Some(*seed),
                config: Some(config_to_toml(cfg.config())),
                failure: (!failing.is_empty()).then_some(CliError::OracleFailed(failing)),
            })
        }
        Command::Fit {
            data,
            config,
            freeze,
            seed,
            starts,
            complex,
            max_evals,
            out,
            ..
        } => {
            let template = load(config)?.into_config();
            let file = File::open(data).with_context(|| format!("opening {}", data.display()))?;
            let (freqs, observed) =
                read_measured(file, *complex).with_context(|| format!("data {}", data.display()))?;
            let mut problem = FitProblem::new(freqs, observed, template)?;
            for name in freeze {
                let kind = ParamKind::parse(name).ok_or_else(|| Error::Config {
                    key: "freeze".into(),
                    reason: format!("unknown parameter `{name}`"),
                })?;
                problem.freeze(kind)?;
            }
            let opts = FitOptions {
                max_evals: *max_evals,
                ..FitOptions::default()
            };
            let ms = fit_multistart(&problem, &opts, *starts, 0.1, *seed)?;
            let best = &ms.best;
            let values: Vec<f64> = best.params.iter().map(|p| p.value).collect();
            let fitted = problem.config_for(&values)?;
            let params: Vec<_> = best
                .params
                .iter()
                .zip(&ms.spread)
                .map(|(p, s)| {
                    json!({
                        "name": p.kind.name(),
                        "value": p.value,
                        "lower": p.lower,
                        "upper": p.upper,
                        "frozen": p.frozen,
                        "start_spread": s.1,
                    })
                })
                .collect();
            write_json(
                out.as_deref(),
                &json!({
                    "parameters": params,
                    "initial_loss": best.initial_loss,
                    "loss": best.loss,
                    "evals": best.evals,
                    "converged": best.converged,
                    "warnings": best.warnings,
                    "start_losses": ms.losses,
                    "fitted_config": config_to_toml(fitted.config()),
                }),
            )?;
            Ok(Run {
                outputs: out.iter().cloned().collect(),
                grids: json!({ "data": data, "points": problem.freqs.len(), "starts": starts, "max_evals": max_evals }),
                seed: Some(*seed),
                config: Some(config_to_toml(&problem.template)),
                failure: None,
            })
        }
        Command::Init { .. } | Command::Rerun { .. } => unreachable!("handled by dispatch"),
    }
}

const SWEEP_HEADER: [&str; 10] = [
    "phi_A_rad",
    "phi_A_over_pi",
    "dips_delta_c_MHz",
    "min_abs_S21",
    "max_abs_S21",
    "label",
    "strong",
    "real_gap_MHz",
    "imag_gap_MHz",
    "abs_C",
];

fn sweep_row(cfg: &ValidatedConfig, phi: f64, dc: &[f64], dm: &[f64]) -> Result<Vec<String>> {
    let phases = cfg.phases_for(phi);
    let s = spectrum(cfg, &phases, dc)?;
    let mags = s.magnitudes();
    let dips: Vec<String> = find_dips(&s, 0.01)
        .iter()
        .map(|d| format!("{:.3}", d.freq - cfg.cavity().omega))
        .collect();
    let class: Option<CouplingClassification> = if cfg.scenario().is_coupled() {
        Some(classify_coupling(cfg, phi, dm)?)
    } else {
        None
    };
    let coop = match cfg.scenario() {
        Scenario::SingleCoupled => cooperativity_single(cfg, phases[0])?.norm(),
        Scenario::MultiCoupled => cooperativity_multi(cfg, &phases)?.norm(),
        _ => f64::NAN,
    };
    Ok(vec![
        num(phi),
        num(phi / std::f64::consts::PI),
        dips.join(";"),
        num(mags.iter().cloned().fold(f64::INFINITY, f64::min)),
        num(mags.iter().cloned().fold(0.0, f64::max)),
        class.map_or("-", |c| c.label.short()).to_string(),
        class.is_some_and(|c| c.strong).to_string(),
        num(class.map_or(f64::NAN, |c| c.real_gap)),
        num(class.map_or(f64::NAN, |c| c.imag_gap)),
        num(coop),
    ])
}

fn init(scenario: &str, eta: f64, xi: f64, critical: bool, out: Option<&Path>) -> Result<()> {
    let s = Scenario::parse(scenario).ok_or_else(|| Error::Config {
        key: "scenario".into(),
        reason: format!("unknown scenario `{scenario}`"),
    })?;
    let mut cfg = preset_config(s, eta, xi)?;
    if critical {
        cfg.loading = Loading::Critical(CriticalVariant::Complex);
    }
    let cfg = validate(cfg)?;
    let text = config_to_toml(cfg.config());
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn rerun(path: &Path) -> Result<ExitCode> {
    let manifest = RunManifest::read(path)?;
    let mut cli = Cli::try_parse_from(std::iter::once("magcmt".to_string()).chain(manifest.args.iter().cloned()))
        .map_err(|e| CliError::Usage(format!("manifest arguments do not parse: {e}")))?;
    if let Some(text) = &manifest.config {
        let snapshot = sibling(path, "snapshot.toml");
        fs::write(&snapshot, text).with_context(|| format!("writing {}", snapshot.display()))?;
        match config_path_mut(&mut cli.command) {
            Some(p) => *p = snapshot,
            None => bail!("manifest subcommand `{}` takes no config", manifest.subcommand),
        }
    }
    let run = execute(&cli.command)?;
    let mut differing = Vec::new();
    for rec in &manifest.outputs {
        let now = sha256_file(&rec.path)?;
        let same = now == rec.sha256;
        println!("{} {}", if same { "reproduced" } else { "DIFFERS" }, rec.path.display());
        if !same {
            differing.push(rec.path.clone());
        }
    }
    if let Some(f) = run.failure {
        return Err(f.into());
    }
    if differing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(CliError::Mismatch(differing).into())
    }
}
