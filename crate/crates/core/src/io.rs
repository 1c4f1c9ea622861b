//! Text formats: TOML system configs and CSV spectra, maps and measured data.
//!
//! Config schema (rates and frequencies in MHz, angles in radians or as
//! `"pi:x"` meaning `x * pi`):
//!
//! ```toml
//! symmetric = true                # copy forward couplings onto backward
//! loading = "intrinsic"           # or "critical"
//! critical_variant = "complex"    # or "real", "modulus"
//!
//! [cavity]
//! omega = 10000.0
//! kappa0 = 17.0
//! couplings = [{ forward = 350.0 }, { forward = 35.0 }]
//!
//! [magnon]                        # omit for a bare cavity
//! omega = 10000.0
//! kappa0 = 1.0
//! couplings = [{ forward = 8.0, backward = 8.0 }, { forward = 0.8 }]
//!
//! [[waveguide]]
//! phase = "pi:0.5"
//! input_fraction = 1.0
//!
//! [[waveguide]]
//! beta = 2.0                      # phase = beta * length
//! length = 0.25
//! input_fraction = { re = 0.1, im = 0.0 }
//! phase_ratio = 0.2
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::Observed;
use crate::model::{
    validate, CriticalVariant, DetuningMap, Loading, ModeCoupling, OscillatorParams, Spectrum, SystemConfig,
    ValidatedConfig, WaveguideMode,
};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleDto {
    Radians(f64),
    Text(String),
}

/// Parse an angle: plain radians, or `pi:x` for `x * pi`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    let (scale, body) = match t.strip_prefix("pi:") {
        Some(rest) => (std::f64::consts::PI, rest.trim()),
        None => (1.0, t),
    };
    let v: f64 = body
        .parse()
        .map_err(|_| Error::Parse(format!("`{s}` is not an angle (radians or pi:x)")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("angle `{s}` is not finite")));
    }
    Ok(scale * v)
}

impl AngleDto {
    fn resolve(&self, key: &str) -> Result<f64> {
        match self {
            AngleDto::Radians(v) => Ok(*v),
            AngleDto::Text(s) => parse_angle(s).map_err(|e| Error::config(key, e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FractionDto {
    Real(f64),
    Complex { re: f64, im: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingDto {
    pub forward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorDto {
    pub omega: f64,
    pub kappa0: f64,
    pub couplings: Vec<CouplingDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<AngleDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    pub input_fraction: FractionDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDto {
    #[serde(default = "default_true")]
    pub symmetric: bool,
    #[serde(default = "default_loading")]
    pub loading: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_variant: Option<String>,
    pub cavity: OscillatorDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnon: Option<OscillatorDto>,
    pub waveguide: Vec<WaveguideDto>,
}

fn default_true() -> bool {
    true
}

fn default_loading() -> String {
    "intrinsic".into()
}

fn oscillator(dto: &OscillatorDto) -> OscillatorParams {
    OscillatorParams {
        omega: dto.omega,
        kappa0: dto.kappa0,
        couplings: dto
            .couplings
            .iter()
            .map(|c| ModeCoupling {
                forward: c.forward,
                backward: c.backward.unwrap_or(c.forward),
            })
            .collect(),
    }
}

impl ConfigDto {
    pub fn into_config(self) -> Result<SystemConfig> {
        let variant = match self.critical_variant.as_deref() {
            None | Some("complex") => CriticalVariant::Complex,
            Some("real") => CriticalVariant::RealPart,
            Some("modulus") => CriticalVariant::Modulus,
            Some(other) => {
                return Err(Error::config(
                    "critical_variant",
                    format!("expected \"complex\", \"real\" or \"modulus\", got \"{other}\""),
                ))
            }
        };
        let loading = match self.loading.as_str() {
            "intrinsic" => Loading::Intrinsic,
            "critical" => Loading::Critical(variant),
            other => {
                return Err(Error::config(
                    "loading",
                    format!("expected \"intrinsic\" or \"critical\", got \"{other}\""),
                ))
            }
        };
        let mut waveguide = Vec::with_capacity(self.waveguide.len());
        for (i, w) in self.waveguide.iter().enumerate() {
            let key = format!("waveguide[{i}]");
            let phase = match (&w.phase, w.beta, w.length) {
                (Some(p), None, None) => p.resolve(&format!("{key}.phase"))?,
                (None, Some(b), Some(l)) => b * l,
                (None, None, None) => {
                    return Err(Error::config(format!("{key}.phase"), "missing (give phase, or beta and length)"))
                }
                (Some(_), _, _) => {
                    return Err(Error::config(format!("{key}.phase"), "give either phase or beta/length, not both"))
                }
                _ => {
                    return Err(Error::config(
                        format!("{key}.beta"),
                        "beta and length must be given together",
                    ))
                }
            };
            let input_fraction = match w.input_fraction {
                FractionDto::Real(r) => Complex64::new(r, 0.0),
                FractionDto::Complex { re, im } => Complex64::new(re, im),
            };
            waveguide.push(WaveguideMode {
                phase,
                input_fraction,
                phase_ratio: w.phase_ratio,
            });
        }
        Ok(SystemConfig {
            magnon: self.magnon.as_ref().map(oscillator),
            cavity: oscillator(&self.cavity),
            waveguide,
            symmetric: self.symmetric,
            loading,
        })
    }

    pub fn from_config(cfg: &SystemConfig) -> Self {
        let osc = |o: &OscillatorParams| OscillatorDto {
            omega: o.omega,
            kappa0: o.kappa0,
            couplings: o
                .couplings
                .iter()
                .map(|c| CouplingDto {
                    forward: c.forward,
                    backward: Some(c.backward),
                })
                .collect(),
        };
        let (loading, variant) = match cfg.loading {
            Loading::Intrinsic => ("intrinsic", None),
            Loading::Critical(v) => (
                "critical",
                Some(match v {
                    CriticalVariant::Complex => "complex",
                    CriticalVariant::RealPart => "real",
                    CriticalVariant::Modulus => "modulus",
                }),
            ),
        };
        ConfigDto {
            symmetric: cfg.symmetric,
            loading: loading.into(),
            critical_variant: variant.map(str::to_string),
            cavity: osc(&cfg.cavity),
            magnon: cfg.magnon.as_ref().map(osc),
            waveguide: cfg
                .waveguide
                .iter()
                .map(|w| WaveguideDto {
                    phase: Some(AngleDto::Radians(w.phase)),
                    beta: None,
                    length: None,
                    input_fraction: if w.input_fraction.im == 0.0 {
                        FractionDto::Real(w.input_fraction.re)
                    } else {
                        FractionDto::Complex {
                            re: w.input_fraction.re,
                            im: w.input_fraction.im,
                        }
                    },
                    phase_ratio: w.phase_ratio,
                })
                .collect(),
        }
    }
}

/// Parse a TOML config into an (unvalidated) [`SystemConfig`].
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let dto: ConfigDto = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    dto.into_config()
}

pub fn load_config(path: &Path) -> Result<ValidatedConfig> {
    let text = std::fs::read_to_string(path)?;
    validate(parse_config(&text)?)
}

pub fn config_to_toml(cfg: &SystemConfig) -> String {
    toml::to_string(&ConfigDto::from_config(cfg)).expect("config DTO always serialises")
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:?}").expect("write to String");
    s
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub const SPECTRUM_HEADER: [&str; 5] = ["omega_MHz", "delta_c_MHz", "re_S21", "im_S21", "abs_S21"];

pub fn write_spectrum<W: Write>(out: W, spectrum: &Spectrum, omega_c: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPECTRUM_HEADER).map_err(csv_err)?;
    for (f, s) in spectrum.freqs().iter().zip(spectrum.values()) {
        w.write_record([num(*f), num(f - omega_c), num(s.re), num(s.im), num(s.norm())])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const MAP_HEADER: [&str; 3] = ["delta_c_MHz", "delta_m_MHz", "abs_S21"];

/// Long format, one row per grid point, `delta_c` fastest.
pub fn write_map<W: Write>(out: W, map: &DetuningMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MAP_HEADER).map_err(csv_err)?;
    for (i, dm) in map.delta_m.iter().enumerate() {
        for (dc, v) in map.delta_c.iter().zip(map.row(i)) {
            w.write_record([num(*dc), num(*dm), num(*v)]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Measured spectrum with a header row. Recognised columns:
/// frequency `omega_MHz` (or `freq_MHz`), magnitude `abs_S21`, optional
/// `phase_rad`; alternatively `re_S21` and `im_S21`. Data with a phase or
/// with real/imaginary parts is returned as complex when `complex` is set.
pub fn read_measured<R: Read>(input: R, complex: bool) -> Result<(Vec<f64>, Observed)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let f_col = col(&["omega_MHz", "freq_MHz"])
        .ok_or_else(|| Error::Parse("missing frequency column `omega_MHz` (or `freq_MHz`)".into()))?;
    let abs_col = col(&["abs_S21"]);
    let phase_col = col(&["phase_rad"]);
    let re_col = col(&["re_S21"]);
    let im_col = col(&["im_S21"]);
    if abs_col.is_none() && (re_col.is_none() || im_col.is_none()) {
        return Err(Error::Parse("missing `abs_S21` (or `re_S21` and `im_S21`) column".into()));
    }
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = row + 2;
        let field = |i: usize, name: &str| -> Result<f64> {
            let s = rec
                .get(i)
                .ok_or_else(|| Error::Parse(format!("line {line}: missing `{name}`")))?;
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: `{name}` = `{s}` is not a number")))
        };
        freqs.push(field(f_col, "frequency")?);
        let v = match (abs_col, phase_col, re_col, im_col) {
            (Some(a), Some(p), _, _) => Complex64::from_polar(field(a, "abs_S21")?, field(p, "phase_rad")?),
            (_, _, Some(r), Some(i)) => Complex64::new(field(r, "re_S21")?, field(i, "im_S21")?),
            (Some(a), None, _, _) => Complex64::new(field(a, "abs_S21")?, 0.0),
            _ => unreachable!("columns checked above"),
        };
        values.push(v);
    }
    if freqs.is_empty() {
        return Err(Error::Parse("measured spectrum has no data rows".into()));
    }
    let has_phase = phase_col.is_some() || (re_col.is_some() && im_col.is_some());
    let observed = if complex {
        if !has_phase {
            return Err(Error::Parse("complex fit requested but the data has no phase".into()));
        }
        Observed::Complex(values)
    } else {
        Observed::Magnitude(values.iter().map(|v| v.norm()).collect())
    };
    Ok((freqs, observed))
}
