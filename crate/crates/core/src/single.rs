//! Single-mode waveguide: bare cavity and magnon + cavity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Scenario, ValidatedConfig};
use crate::solver::Mat2;
use crate::system::{cavity_loading, prop, CavitySystem, CoupledSystem, OutputFunctional, J};

type C = Complex64;

/// Closed-form transmission of a cavity side-coupled to a single-mode line,
/// `e^{-j phi} (1 - kappa_4 / (j(omega - omega_c) + kappa_c0 + kappa_c))`.
pub fn s21_cavity_single(omega: f64, cfg: &ValidatedConfig, phase: f64) -> Result<C> {
    cfg.require("s21_cavity_single", "a single-mode cavity-only config", |s| {
        s == Scenario::SingleCavity
    })?;
    let loading = cavity_loading(cfg, &[phase])?;
    let k4 = cfg.cavity().couplings[0].forward;
    let den = J * (omega - cfg.cavity().omega) + loading;
    if den.norm() == 0.0 {
        return Err(Error::Singular {
            context: "s21_cavity_single",
            det: 0.0,
        });
    }
    Ok(prop(phase) * (1.0 - k4 / den))
}

pub fn build_cavity_single(cfg: &ValidatedConfig, phase: f64) -> Result<CavitySystem> {
    cfg.require("build_cavity_single", "a single-mode cavity-only config", |s| {
        s == Scenario::SingleCavity
    })?;
    let cav = cfg.cavity();
    let sk4 = cav.couplings[0].forward.sqrt();
    let e = prop(phase);
    Ok(CavitySystem {
        diagonal: J * cav.omega - cavity_loading(cfg, &[phase])?,
        drive: e * sk4,
        output: OutputFunctional {
            direct: e,
            magnon: C::default(),
            cavity: C::from(-sk4),
            norm: C::from(1.0),
        },
    })
}

/// Magnon at the input side, cavity a distance `L` downstream, one
/// propagation mode with phase `phase = beta L`.
pub fn build_coupled_single(cfg: &ValidatedConfig, phase: f64) -> Result<CoupledSystem> {
    cfg.require("build_coupled_single", "a single-mode magnon + cavity config", |s| {
        s == Scenario::SingleCoupled
    })?;
    let mag = cfg.magnon().expect("coupled scenario has a magnon");
    let cav = cfg.cavity();
    let k1 = mag.couplings[0].forward;
    let k3 = mag.couplings[0].backward;
    let k4 = cav.couplings[0].forward;
    let k2 = cav.couplings[0].backward;
    let kappa_m = cfg.kappa_m().expect("coupled scenario has kappa_m");
    let e = prop(phase);

    let matrix = Mat2::new(
        J * mag.omega - mag.kappa0 - kappa_m,
        -e * (k2 * k3).sqrt(),
        -e * (k1 * k4).sqrt(),
        J * cav.omega - cavity_loading(cfg, &[phase])?,
    );
    // s_-2 = s_+4 - sqrt(k4) c with s_+4 = e^{-j phi} (s_+1 - sqrt(k1) m)
    Ok(CoupledSystem {
        matrix,
        drive: [C::from(k1.sqrt()), e * k4.sqrt()],
        output: OutputFunctional {
            direct: e,
            magnon: -e * k1.sqrt(),
            cavity: C::from(-k4.sqrt()),
            norm: C::from(1.0),
        },
    })
}

/// Steady-state S21 of an assembled coupled system.
pub fn s21_coupled(system: &CoupledSystem, omega: f64) -> Result<C> {
    system.s21(omega)
}

/// `e^{-2j phi} kappa_1 kappa_2 / ((kappa_m0 + kappa_1)(kappa_c0 + kappa_2))`.
/// Under critical loading `kappa_c0` is zero.
pub fn cooperativity_single(cfg: &ValidatedConfig, phase: f64) -> Result<C> {
    cfg.require("cooperativity_single", "a single-mode magnon + cavity config", |s| {
        s == Scenario::SingleCoupled
    })?;
    let mag = cfg.magnon().expect("coupled scenario has a magnon");
    let k1 = mag.couplings[0].forward;
    let k2 = cfg.cavity().couplings[0].backward;
    let kc0 = if cfg.loading().is_critical() { 0.0 } else { cfg.cavity().kappa0 };
    let den = (mag.kappa0 + k1) * (kc0 + k2);
    if den == 0.0 {
        return Ok(C::default());
    }
    Ok(prop(2.0 * phase) * (k1 * k2 / den))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::model::{preset_config, validate, CriticalVariant, Loading, ModeCoupling};

    fn preset(s: Scenario) -> ValidatedConfig {
        validate(preset_config(s, 0.0, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn critical_cavity_zero_on_resonance() {
        let cfg = preset(Scenario::SingleCavity)
            .with(|c| c.loading = Loading::Critical(CriticalVariant::Complex))
            .unwrap();
        for phi in [0.0, 0.3, PI, 5.0] {
            let s = s21_cavity_single(cfg.cavity().omega, &cfg, phi).unwrap();
            assert!(s.norm() < 1e-12);
        }
    }

    #[test]
    fn decoupled_cavity_transmits() {
        let cfg = preset(Scenario::SingleCavity)
            .with(|c| c.cavity.couplings[0] = ModeCoupling::symmetric(0.0))
            .unwrap();
        for w in [9000.0, 10_000.0, 10_017.0] {
            assert_eq!(s21_cavity_single(w, &cfg, 0.0).unwrap(), C::from(1.0));
        }
    }

    #[test]
    fn preset_cavity_on_resonance() {
        let cfg = preset(Scenario::SingleCavity);
        let s = s21_cavity_single(cfg.cavity().omega, &cfg, 0.0).unwrap();
        assert!((s - C::from(17.0 / 367.0)).norm() < 1e-15);
    }

    #[test]
    fn cavity_system_matches_closed_form() {
        let cfg = preset(Scenario::SingleCavity);
        let sys = build_cavity_single(&cfg, 1.1).unwrap();
        for w in [9500.0, 9990.0, 10_000.0, 10_250.0] {
            let a = sys.s21(w).unwrap();
            let b = s21_cavity_single(w, &cfg, 1.1).unwrap();
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn coupled_matrix_elements() {
        let cfg = preset(Scenario::SingleCoupled);
        let sys = build_coupled_single(&cfg, 0.0).unwrap();
        let g = -(8.0f64 * 350.0).sqrt();
        assert!((g + 52.915_026_221_291_81).abs() < 1e-12);
        assert!((sys.matrix.at(0, 1) - C::from(g)).norm() < 1e-12);
        assert!((sys.matrix.at(1, 0) - C::from(g)).norm() < 1e-12);
        assert_eq!(sys.matrix.at(0, 0), C::new(-9.0, 10_000.0));
        assert_eq!(sys.matrix.at(1, 1), C::new(-367.0, 10_000.0));

        let flipped = build_coupled_single(&cfg, PI).unwrap();
        assert!((flipped.matrix.at(0, 1) + sys.matrix.at(0, 1)).norm() < 1e-12);
        assert!((flipped.matrix.at(1, 0) + sys.matrix.at(1, 0)).norm() < 1e-12);
    }

    #[test]
    fn decoupled_magnon_row() {
        let cfg = preset(Scenario::SingleCoupled)
            .with(|c| c.magnon.as_mut().unwrap().couplings[0] = ModeCoupling::symmetric(0.0))
            .unwrap();
        let sys = build_coupled_single(&cfg, 0.4).unwrap();
        assert_eq!(sys.matrix.at(0, 1), C::default());
        assert_eq!(sys.drive[0], C::default());
    }

    #[test]
    fn preset_cooperativity() {
        let cfg = preset(Scenario::SingleCoupled);
        let c = cooperativity_single(&cfg, 0.0).unwrap();
        assert!((c.norm() - 2800.0 / 3303.0).abs() < 1e-15);
        assert!((c.norm() - 0.84771).abs() < 1e-4);
        let c = cooperativity_single(&cfg, PI / 4.0).unwrap();
        assert!((c.arg() + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn cooperativity_vanishes_without_magnon_coupling() {
        let cfg = preset(Scenario::SingleCoupled)
            .with(|c| c.magnon.as_mut().unwrap().couplings[0] = ModeCoupling::symmetric(0.0))
            .unwrap();
        assert_eq!(cooperativity_single(&cfg, 0.3).unwrap(), C::default());
    }

    #[test]
    fn matrix_cooperativity_equals_closed_form() {
        let cfg = preset(Scenario::SingleCoupled);
        for phi in [0.0, 0.7, 2.0] {
            let sys = build_coupled_single(&cfg, phi).unwrap();
            let a = sys.cooperativity();
            let b = cooperativity_single(&cfg, phi).unwrap();
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn wrong_scenario_is_rejected() {
        let cfg = preset(Scenario::SingleCoupled);
        assert!(matches!(
            s21_cavity_single(1e4, &cfg, 0.0),
            Err(Error::Scenario { .. })
        ));
        let cav = preset(Scenario::SingleCavity);
        assert!(build_coupled_single(&cav, 0.0).is_err());
    }
}
