//! Cross-validation of the frequency-domain solve against time integration
//! on seeded random perturbations of a configuration.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ValidatedConfig;
use crate::solver::OracleOptions;
use crate::system::Network;

type C = Complex64;

pub const ORACLE_RTOL: f64 = 1e-6;

/// Deliberate engine corruption used to confirm that the check can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of the cavity term in the frequency-domain output.
    CavitySign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSample {
    pub index: usize,
    pub omega: f64,
    pub phases: Vec<f64>,
    pub frequency_domain: [f64; 2],
    pub time_domain: [f64; 2],
    pub rel_error: f64,
}

impl OracleSample {
    pub fn passed(&self, rtol: f64) -> bool {
        self.rel_error < rtol
    }
}

/// Random rescaling of every rate by a factor in `[0.5, 1.5]`, random
/// phases, and a probe frequency within three total cavity linewidths of
/// the cavity.
pub fn perturb(base: &ValidatedConfig, rng: &mut ChaCha8Rng) -> Result<(ValidatedConfig, Vec<f64>, f64)> {
    let cfg = base.with(|c| {
        let mut f = || rng.gen_range(0.5..1.5);
        c.cavity.kappa0 *= f();
        for k in &mut c.cavity.couplings {
            let s = f();
            k.forward *= s;
            k.backward *= s;
        }
        if let Some(m) = c.magnon.as_mut() {
            m.kappa0 *= f();
            for k in &mut m.couplings {
                let s = f();
                k.forward *= s;
                k.backward *= s;
            }
            m.omega += rng.gen_range(-50.0..50.0);
        }
    })?;
    let phases: Vec<f64> = (0..cfg.mode_count()).map(|_| rng.gen_range(0.0..TAU)).collect();
    let width = cfg.cavity().kappa0 + cfg.kappa_c();
    let omega = cfg.cavity().omega + rng.gen_range(-3.0..3.0) * width;
    Ok((cfg, phases, omega))
}

fn frequency_domain(net: &Network, omega: f64, fault: Fault) -> Result<C> {
    match fault {
        Fault::None => net.s21(omega),
        Fault::CavitySign => {
            let mut bad = *net;
            match &mut bad {
                Network::Cavity(c) => c.output.cavity = -c.output.cavity,
                Network::Coupled(c) => c.output.cavity = -c.output.cavity,
            }
            bad.s21(omega)
        }
    }
}

/// Evaluate one configuration at `omega` both ways.
pub fn compare(cfg: &ValidatedConfig, phases: &[f64], omega: f64, opts: &OracleOptions, fault: Fault) -> Result<(C, C)> {
    let net = Network::build(cfg, phases)?;
    let fd = frequency_domain(&net, omega, fault)?;
    let td = net.time_domain_s21(omega, opts)?;
    Ok((fd, td))
}

/// Run `samples` seeded comparisons on perturbations of `base`.
pub fn oracle_check(
    base: &ValidatedConfig,
    samples: usize,
    seed: u64,
    opts: &OracleOptions,
    fault: Fault,
) -> Result<Vec<OracleSample>> {
    if samples == 0 {
        return Err(Error::config("samples", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|index| {
            let (cfg, phases, omega) = perturb(base, &mut rng)?;
            let (fd, td) = compare(&cfg, &phases, omega, opts, fault)?;
            Ok(OracleSample {
                index,
                omega,
                phases,
                frequency_domain: [fd.re, fd.im],
                time_domain: [td.re, td.im],
                rel_error: (td - fd).norm() / fd.norm().max(0.01),
            })
        })
        .collect()
}
