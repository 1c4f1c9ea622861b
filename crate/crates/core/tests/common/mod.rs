#![allow(dead_code)]

use magnon_cmt::fitting::{add_magnitude_noise, fit, synthesize, FitOptions, FitProblem, FitResult, Observed, ParamKind};
use magnon_cmt::{linspace, preset_config, validate, Scenario, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Magnon offset from the cavity in the round-trip truth (MHz).
pub const MAGNON_OFFSET: f64 = 100.0;
pub const MAGNON_HALF_WIDTH: f64 = 9.0;
pub const CAVITY_HALF_WIDTH: f64 = 367.0;

pub fn truth() -> SystemConfig {
    let mut c = preset_config(Scenario::SingleCoupled, 0.0, 0.0).unwrap();
    c.magnon.as_mut().unwrap().omega += MAGNON_OFFSET;
    c
}

/// Rates scaled by `1 +- 0.2`, frequencies moved by up to 20% of the
/// mode's half-linewidth.
pub fn perturbed(seed: u64) -> SystemConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = truth();
    let mut f = || 0.2 * rng.gen_range(-1.0..1.0);
    let m = c.magnon.as_mut().unwrap();
    m.kappa0 *= 1.0 + f();
    m.couplings[0].forward *= 1.0 + f();
    m.omega += f() * MAGNON_HALF_WIDTH;
    c.cavity.kappa0 *= 1.0 + f();
    c.cavity.couplings[0].forward *= 1.0 + f();
    c.cavity.omega += f() * CAVITY_HALF_WIDTH;
    c
}

/// Relative error per fitted quantity; frequencies relative to the
/// half-linewidth.
pub fn recovery_errors(r: &FitResult) -> Vec<(ParamKind, f64)> {
    let t = truth();
    let m = t.magnon.as_ref().unwrap();
    let rel = |k: ParamKind, v: f64, scale: f64| (k, (r.value(k).unwrap() - v).abs() / scale);
    vec![
        rel(ParamKind::KappaM0, m.kappa0, m.kappa0),
        rel(ParamKind::Kappa1, m.couplings[0].forward, m.couplings[0].forward),
        rel(ParamKind::KappaC0, t.cavity.kappa0, t.cavity.kappa0),
        rel(ParamKind::Kappa2, t.cavity.couplings[0].forward, t.cavity.couplings[0].forward),
        rel(ParamKind::OmegaM, m.omega, MAGNON_HALF_WIDTH),
        rel(ParamKind::OmegaC, t.cavity.omega, CAVITY_HALF_WIDTH),
    ]
}

/// Fit synthetic |S21| (optionally with 1% noise) from a perturbed start
/// and return the worst recovery error.
pub fn round_trip(noise_seed: Option<u64>, start_seed: u64) -> f64 {
    let freqs = linspace(9_200.0, 10_800.0, 1601);
    let clean: Vec<f64> = synthesize(&validate(truth()).unwrap(), &freqs)
        .unwrap()
        .iter()
        .map(|s| s.norm())
        .collect();
    let data = match noise_seed {
        Some(s) => add_magnitude_noise(&clean, 0.01, s).unwrap(),
        None => clean,
    };
    let mut p = FitProblem::new(freqs, Observed::Magnitude(data), perturbed(start_seed)).unwrap();
    p.freeze(ParamKind::PhaseA).unwrap();
    let r = fit(&p, &FitOptions::default()).unwrap();
    assert!(r.loss <= r.initial_loss);
    recovery_errors(&r).iter().map(|e| e.1).fold(0.0, f64::max)
}
