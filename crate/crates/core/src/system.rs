//! Assembled linear systems: dynamical matrix, drive and output functional
//! for one choice of propagation phases.
//!
//! Time convention is `e^{+j omega t}` for the oscillators and `e^{-j phi}`
//! for propagation, so the steady state solves `(j omega I - M) X = b`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CriticalVariant, Loading, Scenario, ValidatedConfig};
use crate::solver::{self, Mat2, OracleOptions};
use crate::{multi, single};

type C = Complex64;

pub(crate) const J: C = C::new(0.0, 1.0);

/// `e^{-j phi}`.
#[inline]
pub(crate) fn prop(phi: f64) -> C {
    C::from_polar(1.0, -phi)
}

/// The outgoing wave at port 2 as a linear form
/// `s_-2 = direct + magnon * m + cavity * c` (amplitudes per unit dominant
/// input), normalised by the total incident amplitude `norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputFunctional {
    pub direct: C,
    pub magnon: C,
    pub cavity: C,
    pub norm: C,
}

impl OutputFunctional {
    pub fn apply(&self, m: C, c: C) -> C {
        (self.direct + self.magnon * m + self.cavity * c) / self.norm
    }
}

/// Magnon + cavity coupled through the waveguide. Rows/columns are ordered
/// (magnon, cavity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledSystem {
    pub matrix: Mat2,
    pub drive: [C; 2],
    pub output: OutputFunctional,
}

impl CoupledSystem {
    pub fn steady_state(&self, omega: f64) -> Result<[C; 2]> {
        solver::solve_steady_state(&self.matrix, self.drive, omega)
    }

    pub fn s21(&self, omega: f64) -> Result<C> {
        let x = self.steady_state(omega)?;
        Ok(self.output.apply(x[0], x[1]))
    }

    /// Matrix whose eigenvalues `lambda` are the transmission zeros, i.e.
    /// `S21(omega) = 0` at `j omega = lambda`. From the determinant lemma,
    /// `direct + o^T (sI - M)^{-1} b = direct * det(sI - M + b o^T / direct) / det(sI - M)`.
    pub fn zero_matrix(&self) -> Result<Mat2> {
        let d = self.output.direct;
        if d.norm() < 1e-12 {
            return Err(Error::Singular {
                context: "transmission-zero matrix (no direct path)",
                det: d.norm(),
            });
        }
        let o = [self.output.magnon, self.output.cavity];
        let m = self.matrix.0;
        let mut z = [[C::default(); 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                z[i][k] = m[i][k] - self.drive[i] * o[k] / d;
            }
        }
        Ok(Mat2(z))
    }

    /// `M_12 M_21 / (gamma_m gamma_c)` with `gamma` the total damping on each
    /// diagonal; zero when either oscillator is undamped.
    pub fn cooperativity(&self) -> C {
        let g = self.matrix.at(0, 1) * self.matrix.at(1, 0);
        let den = self.matrix.at(0, 0).re * self.matrix.at(1, 1).re;
        if den == 0.0 {
            return C::default();
        }
        g / den
    }
}

/// Bare cavity on the waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavitySystem {
    /// `j omega_c - (kappa_c0 + kappa_c)` (or the critical loading).
    pub diagonal: C,
    pub drive: C,
    pub output: OutputFunctional,
}

impl CavitySystem {
    pub fn s21(&self, omega: f64) -> Result<C> {
        let den = J * omega - self.diagonal;
        if den.norm() == 0.0 {
            return Err(Error::Singular {
                context: "cavity response",
                det: 0.0,
            });
        }
        Ok(self.output.apply(C::default(), self.drive / den))
    }
}

/// Either kind of assembled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Network {
    Cavity(CavitySystem),
    Coupled(CoupledSystem),
}

impl Network {
    /// Assemble the system for `phases` (one per waveguide mode).
    pub fn build(cfg: &ValidatedConfig, phases: &[f64]) -> Result<Network> {
        check_phases(cfg, phases)?;
        Ok(match cfg.scenario() {
            Scenario::SingleCavity => Network::Cavity(single::build_cavity_single(cfg, phases[0])?),
            Scenario::SingleCoupled => Network::Coupled(single::build_coupled_single(cfg, phases[0])?),
            Scenario::MultiCavity => Network::Cavity(multi::build_cavity_multi(cfg, phases)?),
            Scenario::MultiCoupled => Network::Coupled(multi::build_coupled_multi(cfg, phases)?),
        })
    }

    pub fn s21(&self, omega: f64) -> Result<C> {
        match self {
            Network::Cavity(c) => c.s21(omega),
            Network::Coupled(c) => c.s21(omega),
        }
    }

    pub fn output(&self) -> &OutputFunctional {
        match self {
            Network::Cavity(c) => &c.output,
            Network::Coupled(c) => &c.output,
        }
    }

    /// Cavity frequency of the assembled system (imaginary part of the
    /// cavity diagonal, including any shift from complex loading).
    pub fn reference_frequency(&self) -> f64 {
        match self {
            Network::Cavity(c) => c.diagonal.im,
            Network::Coupled(c) => c.matrix.at(1, 1).im,
        }
    }

    /// S21 from time integration of the literal ODEs (see
    /// [`solver::integrate_steady_state`]). Frequencies are measured from
    /// `reference_frequency`, which leaves the physics unchanged.
    pub fn time_domain_s21(&self, omega: f64, opts: &OracleOptions) -> Result<C> {
        let w_ref = self.reference_frequency();
        let shift = J * w_ref;
        let out = self.output();
        match self {
            Network::Cavity(c) => {
                let x = solver::integrate_steady_state(&[[c.diagonal - shift]], &[c.drive], omega - w_ref, opts)?;
                Ok(out.apply(C::default(), x[0]))
            }
            Network::Coupled(c) => {
                let m = c.matrix.0;
                let shifted = [[m[0][0] - shift, m[0][1]], [m[1][0], m[1][1] - shift]];
                let x = solver::integrate_steady_state(&shifted, &c.drive, omega - w_ref, opts)?;
                Ok(out.apply(x[0], x[1]))
            }
        }
    }
}

fn check_phases(cfg: &ValidatedConfig, phases: &[f64]) -> Result<()> {
    if phases.len() != cfg.mode_count() {
        return Err(Error::config(
            "phases",
            format!("{} phases given for {} waveguide modes", phases.len(), cfg.mode_count()),
        ));
    }
    if phases.iter().any(|p| !p.is_finite()) {
        return Err(Error::config("phases", "phases must be finite"));
    }
    Ok(())
}

/// Total cavity loading `kappa_c0 + kappa_c` entering the cavity diagonal.
pub fn cavity_loading(cfg: &ValidatedConfig, phases: &[f64]) -> Result<C> {
    match cfg.loading() {
        Loading::Intrinsic => Ok(C::from(cfg.cavity().kappa0 + cfg.kappa_c())),
        Loading::Critical(variant) => {
            if cfg.scenario().is_multi() {
                let k = multi::critical_loading(cfg, phases)?.effective_loading;
                Ok(match variant {
                    CriticalVariant::Complex => k,
                    CriticalVariant::RealPart => C::from(k.re),
                    CriticalVariant::Modulus => C::from(k.norm()),
                })
            } else {
                // single mode: critical coupling is kappa_c0 = 0
                Ok(C::from(cfg.kappa_c()))
            }
        }
    }
}
