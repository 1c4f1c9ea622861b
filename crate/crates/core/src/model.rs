//! Domain types shared by every engine.
//!
//! Units: all frequencies and rates are plain MHz, phases are radians. A
//! waveguide mode enters the equations only through its accumulated
//! propagation phase `phase = beta * L`, so `beta` and `L` are never stored
//! separately.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Cavity frequency used by the built-in parameter sets. Only detunings
/// matter, so any positive value gives identical spectra.
pub const DEFAULT_CAVITY_FREQ: f64 = 10_000.0;

/// Tolerance used to recognise the dominant mode (`input_fraction == 1`).
const DOMINANT_TOL: f64 = 1e-12;

/// External coupling of one oscillator to one propagation mode.
///
/// `forward` couples to the wave travelling from port 1 towards port 2
/// (kappa_1 for the magnon, kappa_4 for the cavity); `backward` couples to
/// the counter-propagating wave (kappa_3 for the magnon, kappa_2 for the
/// cavity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoupling {
    pub forward: f64,
    pub backward: f64,
}

impl ModeCoupling {
    pub fn symmetric(rate: f64) -> Self {
        ModeCoupling {
            forward: rate,
            backward: rate,
        }
    }

    pub fn scaled(self, factor: f64) -> Self {
        ModeCoupling {
            forward: self.forward * factor,
            backward: self.backward * factor,
        }
    }
}

/// One resonant mode: the magnon or the cavity photon.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorParams {
    pub omega: f64,
    pub kappa0: f64,
    /// One entry per waveguide mode, in waveguide order.
    pub couplings: Vec<ModeCoupling>,
}

impl OscillatorParams {
    /// Sum over modes of (forward + backward) / 2.
    pub fn half_sum_damping(&self) -> f64 {
        self.couplings
            .iter()
            .map(|c| 0.5 * (c.forward + c.backward))
            .sum()
    }

    pub fn forward_sum(&self) -> f64 {
        self.couplings.iter().map(|c| c.forward).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveguideMode {
    /// Accumulated propagation phase between the two oscillators, radians.
    pub phase: f64,
    /// Incident amplitude of this mode relative to the dominant mode.
    pub input_fraction: Complex64,
    /// When set, sweeps over the dominant phase move this mode's phase as
    /// `phase_ratio * phase_A` (the `beta_B = xi * beta_A` recipe).
    pub phase_ratio: Option<f64>,
}

impl WaveguideMode {
    pub fn dominant(phase: f64) -> Self {
        WaveguideMode {
            phase,
            input_fraction: Complex64::new(1.0, 0.0),
            phase_ratio: None,
        }
    }

    pub fn is_dominant(&self) -> bool {
        (self.input_fraction - 1.0).norm() <= DOMINANT_TOL
    }
}

/// How the cavity's total loading `kappa_c0 + kappa_c` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loading {
    /// Use `kappa_c0` as configured.
    #[default]
    Intrinsic,
    /// Choose the loading that zeroes on-resonance transmission of the bare
    /// cavity. For one mode this is `kappa_c0 = 0`.
    Critical(CriticalVariant),
}

impl Loading {
    pub fn is_critical(self) -> bool {
        matches!(self, Loading::Critical(_))
    }
}

/// Which part of the (generally complex) multi-mode critical loading is
/// inserted into the cavity diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CriticalVariant {
    /// Full complex value; its imaginary part shifts the cavity frequency.
    #[default]
    Complex,
    RealPart,
    Modulus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub magnon: Option<OscillatorParams>,
    pub cavity: OscillatorParams,
    pub waveguide: Vec<WaveguideMode>,
    /// Force backward couplings equal to forward ones for every mode.
    pub symmetric: bool,
    pub loading: Loading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    SingleCavity,
    SingleCoupled,
    MultiCavity,
    MultiCoupled,
}

impl Scenario {
    pub fn is_coupled(self) -> bool {
        matches!(self, Scenario::SingleCoupled | Scenario::MultiCoupled)
    }

    pub fn is_multi(self) -> bool {
        matches!(self, Scenario::MultiCavity | Scenario::MultiCoupled)
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SingleCavity => "single_cavity",
            Scenario::SingleCoupled => "single_coupled",
            Scenario::MultiCavity => "multi_cavity",
            Scenario::MultiCoupled => "multi_coupled",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.replace('-', "_").as_str() {
            "single_cavity" => Some(Scenario::SingleCavity),
            "single_coupled" => Some(Scenario::SingleCoupled),
            "multi_cavity" => Some(Scenario::MultiCavity),
            "multi_coupled" => Some(Scenario::MultiCoupled),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A configuration that passed [`validate`], with derived dampings attached.
///
/// Immutable once built; engines only ever borrow it.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: SystemConfig,
    scenario: Scenario,
    dominant: usize,
    kappa_m: Option<f64>,
    kappa_c: f64,
}

impl ValidatedConfig {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn into_config(self) -> SystemConfig {
        self.config
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Index of the dominant mode A in the waveguide list.
    pub fn dominant(&self) -> usize {
        self.dominant
    }

    /// Index of the first non-dominant mode (mode B), if any.
    pub fn secondary(&self) -> Option<usize> {
        (0..self.config.waveguide.len()).find(|&i| i != self.dominant)
    }

    pub fn mode_count(&self) -> usize {
        self.config.waveguide.len()
    }

    /// External magnon damping kappa_m, present for coupled scenarios.
    pub fn kappa_m(&self) -> Option<f64> {
        self.kappa_m
    }

    /// External cavity damping kappa_c.
    pub fn kappa_c(&self) -> f64 {
        self.kappa_c
    }

    pub fn cavity(&self) -> &OscillatorParams {
        &self.config.cavity
    }

    pub fn magnon(&self) -> Option<&OscillatorParams> {
        self.config.magnon.as_ref()
    }

    pub fn waveguide(&self) -> &[WaveguideMode] {
        &self.config.waveguide
    }

    pub fn loading(&self) -> Loading {
        self.config.loading
    }

    /// Incident amplitudes per mode (dominant mode = 1).
    pub fn inputs(&self) -> Vec<Complex64> {
        self.config
            .waveguide
            .iter()
            .map(|m| m.input_fraction)
            .collect()
    }

    /// Phases as stored in the configuration.
    pub fn phases(&self) -> Vec<f64> {
        self.config.waveguide.iter().map(|m| m.phase).collect()
    }

    /// Phases with the dominant mode set to `phase_a`. Modes carrying a
    /// `phase_ratio` follow as `ratio * phase_a`; the rest keep their
    /// configured phase.
    pub fn phases_for(&self, phase_a: f64) -> Vec<f64> {
        self.config
            .waveguide
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if i == self.dominant {
                    phase_a
                } else if let Some(r) = m.phase_ratio {
                    r * phase_a
                } else {
                    m.phase
                }
            })
            .collect()
    }

    /// Human-readable notes about inputs outside the modelled regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, m) in self.config.waveguide.iter().enumerate() {
            if m.input_fraction.im != 0.0 || m.input_fraction.re < 0.0 {
                out.push(format!(
                    "waveguide[{i}].input_fraction = {} is not a non-negative real ratio",
                    m.input_fraction
                ));
            }
        }
        out
    }

    pub(crate) fn require(
        &self,
        op: &'static str,
        expected: &'static str,
        ok: impl Fn(Scenario) -> bool,
    ) -> Result<()> {
        if ok(self.scenario) {
            Ok(())
        } else {
            Err(Error::Scenario {
                op,
                expected,
                actual: self.scenario,
            })
        }
    }

    /// Rebuild with a modified configuration.
    pub fn with(&self, edit: impl FnOnce(&mut SystemConfig)) -> Result<ValidatedConfig> {
        let mut cfg = self.config.clone();
        edit(&mut cfg);
        validate(cfg)
    }
}

fn check_rate(key: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::config(key, format!("rate must be finite and >= 0, got {value}")));
    }
    Ok(())
}

fn check_oscillator(name: &str, osc: &mut OscillatorParams, modes: usize, symmetric: bool) -> Result<()> {
    if !osc.omega.is_finite() || osc.omega <= 0.0 {
        return Err(Error::config(
            format!("{name}.omega"),
            format!("frequency must be finite and > 0, got {}", osc.omega),
        ));
    }
    check_rate(&format!("{name}.kappa0"), osc.kappa0)?;
    if osc.couplings.len() != modes {
        return Err(Error::config(
            format!("{name}.couplings"),
            format!(
                "{} coupling entries but the waveguide has {modes} modes",
                osc.couplings.len()
            ),
        ));
    }
    for (i, c) in osc.couplings.iter_mut().enumerate() {
        check_rate(&format!("{name}.couplings[{i}].forward"), c.forward)?;
        if symmetric {
            c.backward = c.forward;
        }
        check_rate(&format!("{name}.couplings[{i}].backward"), c.backward)?;
    }
    Ok(())
}

/// Check structural and range invariants and attach the derived dampings.
pub fn validate(mut config: SystemConfig) -> Result<ValidatedConfig> {
    let modes = config.waveguide.len();
    if modes == 0 {
        return Err(Error::config("waveguide", "at least one propagation mode is required"));
    }
    let mut dominant = None;
    for (i, m) in config.waveguide.iter().enumerate() {
        if !m.phase.is_finite() {
            return Err(Error::config(format!("waveguide[{i}].phase"), "phase must be finite"));
        }
        if !m.input_fraction.re.is_finite() || !m.input_fraction.im.is_finite() {
            return Err(Error::config(
                format!("waveguide[{i}].input_fraction"),
                "input fraction must be finite",
            ));
        }
        if m.input_fraction.norm() > 1.0 + DOMINANT_TOL {
            return Err(Error::config(
                format!("waveguide[{i}].input_fraction"),
                format!("|input_fraction| must be <= 1, got {}", m.input_fraction.norm()),
            ));
        }
        if let Some(r) = m.phase_ratio {
            if !r.is_finite() {
                return Err(Error::config(format!("waveguide[{i}].phase_ratio"), "ratio must be finite"));
            }
        }
        if m.is_dominant() {
            if let Some(prev) = dominant {
                return Err(Error::config(
                    format!("waveguide[{i}].input_fraction"),
                    format!("duplicate dominant mode (mode {prev} already has input_fraction = 1)"),
                ));
            }
            dominant = Some(i);
        }
    }
    let dominant = dominant.ok_or_else(|| {
        Error::config("waveguide", "no dominant mode (exactly one mode needs input_fraction = 1)")
    })?;

    let symmetric = config.symmetric;
    check_oscillator("cavity", &mut config.cavity, modes, symmetric)?;
    if let Some(m) = config.magnon.as_mut() {
        check_oscillator("magnon", m, modes, symmetric)?;
    }

    let scenario = match (config.magnon.is_some(), modes) {
        (false, 1) => Scenario::SingleCavity,
        (true, 1) => Scenario::SingleCoupled,
        (false, _) => Scenario::MultiCavity,
        (true, _) => Scenario::MultiCoupled,
    };
    let kappa_m = config.magnon.as_ref().map(OscillatorParams::half_sum_damping);
    // No wave enters from port 2 in the bare-cavity scenarios, so only the
    // forward couplings load the cavity there.
    let kappa_c = if scenario.is_coupled() {
        config.cavity.half_sum_damping()
    } else {
        config.cavity.forward_sum()
    };

    Ok(ValidatedConfig {
        config,
        scenario,
        dominant,
        kappa_m,
        kappa_c,
    })
}

/// Built-in single-mode rates: kappa_m0 = 1, kappa_1 = kappa_3 = 8,
/// kappa_c0 = 17, kappa_2 = kappa_4 = 350 (MHz).
pub mod preset {
    pub const KAPPA_M0: f64 = 1.0;
    pub const KAPPA_1: f64 = 8.0;
    pub const KAPPA_C0: f64 = 17.0;
    pub const KAPPA_2: f64 = 350.0;
    pub const ETA: f64 = 0.1;
    pub const XI: f64 = 0.2;
}

/// Built-in parameter recipe for each scenario. Mode-A rates equal the
/// single-mode rates, mode-B rates are `eta` times those, mode B carries an
/// incident fraction `eta` and follows the dominant phase with ratio `xi`.
/// `eta` and `xi` are ignored for single-mode scenarios.
pub fn preset_config(scenario: Scenario, eta: f64, xi: f64) -> Result<SystemConfig> {
    if scenario.is_multi() {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::config("eta", format!("must lie in [0, 1], got {eta}")));
        }
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::config("xi", format!("must lie in [0, 1], got {xi}")));
        }
    }
    let cav_a = ModeCoupling::symmetric(preset::KAPPA_2);
    let mag_a = ModeCoupling::symmetric(preset::KAPPA_1);
    let (waveguide, cav, mag) = if scenario.is_multi() {
        (
            vec![
                WaveguideMode::dominant(0.0),
                WaveguideMode {
                    phase: 0.0,
                    input_fraction: Complex64::new(eta, 0.0),
                    phase_ratio: Some(xi),
                },
            ],
            vec![cav_a, cav_a.scaled(eta)],
            vec![mag_a, mag_a.scaled(eta)],
        )
    } else {
        (vec![WaveguideMode::dominant(0.0)], vec![cav_a], vec![mag_a])
    };
    let magnon = scenario.is_coupled().then_some(OscillatorParams {
        omega: DEFAULT_CAVITY_FREQ,
        kappa0: preset::KAPPA_M0,
        couplings: mag,
    });
    Ok(SystemConfig {
        magnon,
        cavity: OscillatorParams {
            omega: DEFAULT_CAVITY_FREQ,
            kappa0: preset::KAPPA_C0,
            couplings: cav,
        },
        waveguide,
        symmetric: true,
        loading: Loading::Intrinsic,
    })
}

/// The asymmetric experimental rate set (kappa_m0 = 0.8, kappa_1 = 7,
/// kappa_3 = 8, kappa_c0 = 17, kappa_4 = 370, kappa_2 = 326), single mode.
pub fn experimental_config() -> SystemConfig {
    SystemConfig {
        magnon: Some(OscillatorParams {
            omega: DEFAULT_CAVITY_FREQ,
            kappa0: 0.8,
            couplings: vec![ModeCoupling {
                forward: 7.0,
                backward: 8.0,
            }],
        }),
        cavity: OscillatorParams {
            omega: DEFAULT_CAVITY_FREQ,
            kappa0: 17.0,
            couplings: vec![ModeCoupling {
                forward: 370.0,
                backward: 326.0,
            }],
        },
        waveguide: vec![WaveguideMode::dominant(0.0)],
        symmetric: false,
        loading: Loading::Intrinsic,
    }
}

/// Sampled complex S21 on an increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl Spectrum {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::Numerical(format!(
                "spectrum has {} frequencies but {} values",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Numerical("spectrum frequencies must be strictly increasing".into()));
        }
        Ok(Spectrum { freqs, values })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }
}

/// |S21| over a (delta_c, delta_m) grid. Row `i` holds the spectrum over
/// `delta_c` for `delta_m[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningMap {
    pub delta_c: Vec<f64>,
    pub delta_m: Vec<f64>,
    values: Vec<f64>,
}

impl DetuningMap {
    pub fn new(delta_c: Vec<f64>, delta_m: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != delta_c.len() * delta_m.len() {
            return Err(Error::Numerical(format!(
                "map payload has {} entries, grid is {}x{}",
                values.len(),
                delta_m.len(),
                delta_c.len()
            )));
        }
        Ok(DetuningMap {
            delta_c,
            delta_m,
            values,
        })
    }

    pub fn get(&self, i_dm: usize, i_dc: usize) -> f64 {
        self.values[i_dm * self.delta_c.len() + i_dc]
    }

    pub fn row(&self, i_dm: usize) -> &[f64] {
        let n = self.delta_c.len();
        &self.values[i_dm * n..(i_dm + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive; `n == 1` gives `[lo]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
