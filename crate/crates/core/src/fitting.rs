//! Least-squares recovery of model parameters from a measured S21 spectrum
//! with a bounded Nelder-Mead simplex search.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModeCoupling, Scenario, SystemConfig, ValidatedConfig};
use crate::system::Network;

type C = Complex64;

/// Frequency search window, in half-linewidths of the initial guess.
pub const FREQ_WINDOW: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    KappaM0,
    /// Magnon coupling to the dominant mode.
    Kappa1,
    KappaC0,
    /// Cavity coupling to the dominant mode.
    Kappa2,
    OmegaM,
    OmegaC,
    PhaseA,
    /// Mode-B rates and incident fraction relative to mode A.
    Eta,
    /// Mode-B phase relative to mode A.
    Xi,
}

impl ParamKind {
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::KappaM0 => "kappa_m0",
            ParamKind::Kappa1 => "kappa_1",
            ParamKind::KappaC0 => "kappa_c0",
            ParamKind::Kappa2 => "kappa_2",
            ParamKind::OmegaM => "omega_m",
            ParamKind::OmegaC => "omega_c",
            ParamKind::PhaseA => "phase_a",
            ParamKind::Eta => "eta",
            ParamKind::Xi => "xi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::all().iter().copied().find(|k| k.name() == s)
    }

    fn all() -> &'static [ParamKind] {
        &[
            ParamKind::KappaM0,
            ParamKind::Kappa1,
            ParamKind::KappaC0,
            ParamKind::Kappa2,
            ParamKind::OmegaM,
            ParamKind::OmegaC,
            ParamKind::PhaseA,
            ParamKind::Eta,
            ParamKind::Xi,
        ]
    }

    fn is_rate(self) -> bool {
        matches!(
            self,
            ParamKind::KappaM0 | ParamKind::Kappa1 | ParamKind::KappaC0 | ParamKind::Kappa2 | ParamKind::Eta
        )
    }

    /// Parameters that exist for a scenario, in canonical order.
    pub fn for_scenario(s: Scenario) -> Vec<ParamKind> {
        use ParamKind::*;
        match s {
            Scenario::SingleCavity => vec![KappaC0, Kappa2, OmegaC, PhaseA],
            Scenario::SingleCoupled => vec![KappaM0, Kappa1, KappaC0, Kappa2, OmegaM, OmegaC, PhaseA],
            Scenario::MultiCavity => vec![KappaC0, Kappa2, OmegaC, PhaseA, Eta, Xi],
            Scenario::MultiCoupled => vec![KappaM0, Kappa1, KappaC0, Kappa2, OmegaM, OmegaC, PhaseA, Eta, Xi],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub kind: ParamKind,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub frozen: bool,
}

impl FitParam {
    fn log_scaled(&self) -> bool {
        self.kind.is_rate() && self.lower > 0.0
    }

    fn to_unit(&self, x: f64) -> f64 {
        if self.upper == self.lower {
            return 0.0;
        }
        if self.log_scaled() {
            (x.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
        } else {
            (x - self.lower) / (self.upper - self.lower)
        }
    }

    fn unit_to_value(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let x = if self.log_scaled() {
            (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        };
        x.clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    Magnitude(Vec<f64>),
    Complex(Vec<C>),
}

impl Observed {
    fn len(&self) -> usize {
        match self {
            Observed::Magnitude(v) => v.len(),
            Observed::Complex(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    /// Frequencies of the observed samples, MHz.
    pub freqs: Vec<f64>,
    pub observed: Observed,
    /// Structure (scenario, loading, waveguide modes) the parameters are
    /// written into. Couplings are set symmetrically.
    pub template: SystemConfig,
    pub params: Vec<FitParam>,
}

impl FitProblem {
    /// Parameters for `template`, bounded to `[value/10, 10 value]` for
    /// rates and to `FREQ_WINDOW` half-linewidths around the initial value
    /// for frequencies.
    pub fn new(freqs: Vec<f64>, observed: Observed, template: SystemConfig) -> Result<Self> {
        if freqs.len() != observed.len() || freqs.is_empty() {
            return Err(Error::Numerical(format!(
                "fit data has {} frequencies and {} samples",
                freqs.len(),
                observed.len()
            )));
        }
        let cfg = crate::model::validate(template.clone())?;
        let half_width_m = cfg.magnon().map_or(0.0, |m| m.kappa0) + cfg.kappa_m().unwrap_or(0.0);
        let half_width_c = cfg.cavity().kappa0 + cfg.kappa_c();
        let params = ParamKind::for_scenario(cfg.scenario())
            .into_iter()
            .map(|kind| {
                let value = read_param(&cfg, kind);
                let (lower, upper) = match kind {
                    ParamKind::OmegaM => {
                        let w = FREQ_WINDOW * half_width_m.max(1.0);
                        (value - w, value + w)
                    }
                    ParamKind::OmegaC => {
                        let w = FREQ_WINDOW * half_width_c.max(1.0);
                        (value - w, value + w)
                    }
                    ParamKind::PhaseA => (value - std::f64::consts::PI, value + std::f64::consts::PI),
                    ParamKind::Eta | ParamKind::Xi => (0.0, 1.0),
                    _ => (value / 10.0, (value * 10.0).max(1.0)),
                };
                FitParam {
                    kind,
                    value,
                    lower,
                    upper,
                    frozen: false,
                }
            })
            .collect();
        Ok(FitProblem {
            freqs,
            observed,
            template,
            params,
        })
    }

    pub fn param(&self, kind: ParamKind) -> Option<&FitParam> {
        self.params.iter().find(|p| p.kind == kind)
    }

    pub fn param_mut(&mut self, kind: ParamKind) -> Option<&mut FitParam> {
        self.params.iter_mut().find(|p| p.kind == kind)
    }

    pub fn freeze(&mut self, kind: ParamKind) -> Result<()> {
        match self.param_mut(kind) {
            Some(p) => {
                p.frozen = true;
                Ok(())
            }
            None => Err(Error::config(
                format!("freeze.{}", kind.name()),
                "parameter does not exist for this scenario",
            )),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    /// The template with `values` written in.
    pub fn config_for(&self, values: &[f64]) -> Result<ValidatedConfig> {
        let mut cfg = self.template.clone();
        for (p, &v) in self.params.iter().zip(values) {
            write_param(&mut cfg, p.kind, v);
        }
        crate::model::validate(cfg)
    }

    fn check(&self) -> Result<()> {
        for p in &self.params {
            if !(p.lower <= p.value && p.value <= p.upper) || !p.value.is_finite() {
                return Err(Error::config(
                    format!("params.{}", p.kind.name()),
                    format!("initial value {} outside bounds [{}, {}]", p.value, p.lower, p.upper),
                ));
            }
        }
        Ok(())
    }
}

fn read_param(cfg: &ValidatedConfig, kind: ParamKind) -> f64 {
    let a = cfg.dominant();
    let cav = cfg.cavity();
    let mag = cfg.magnon();
    match kind {
        ParamKind::KappaM0 => mag.map_or(0.0, |m| m.kappa0),
        ParamKind::Kappa1 => mag.map_or(0.0, |m| m.couplings[a].forward),
        ParamKind::KappaC0 => cav.kappa0,
        ParamKind::Kappa2 => cav.couplings[a].forward,
        ParamKind::OmegaM => mag.map_or(0.0, |m| m.omega),
        ParamKind::OmegaC => cav.omega,
        ParamKind::PhaseA => cfg.waveguide()[a].phase,
        ParamKind::Eta => cfg.secondary().map_or(0.0, |b| cfg.waveguide()[b].input_fraction.norm()),
        ParamKind::Xi => cfg
            .secondary()
            .and_then(|b| cfg.waveguide()[b].phase_ratio)
            .unwrap_or(0.0),
    }
}

fn dominant_index(cfg: &SystemConfig) -> usize {
    cfg.waveguide.iter().position(|m| m.is_dominant()).unwrap_or(0)
}

fn write_param(cfg: &mut SystemConfig, kind: ParamKind, v: f64) {
    let a = dominant_index(cfg);
    match kind {
        ParamKind::KappaM0 => {
            if let Some(m) = cfg.magnon.as_mut() {
                m.kappa0 = v;
            }
        }
        ParamKind::Kappa1 => {
            if let Some(m) = cfg.magnon.as_mut() {
                m.couplings[a] = ModeCoupling::symmetric(v);
            }
            rescale_secondary(cfg);
        }
        ParamKind::KappaC0 => cfg.cavity.kappa0 = v,
        ParamKind::Kappa2 => {
            cfg.cavity.couplings[a] = ModeCoupling::symmetric(v);
            rescale_secondary(cfg);
        }
        ParamKind::OmegaM => {
            if let Some(m) = cfg.magnon.as_mut() {
                m.omega = v;
            }
        }
        ParamKind::OmegaC => cfg.cavity.omega = v,
        ParamKind::PhaseA => cfg.waveguide[a].phase = v,
        ParamKind::Eta => {
            for (i, m) in cfg.waveguide.iter_mut().enumerate() {
                if i != a {
                    m.input_fraction = C::from(v);
                }
            }
            rescale_secondary(cfg);
        }
        ParamKind::Xi => {
            for (i, m) in cfg.waveguide.iter_mut().enumerate() {
                if i != a {
                    m.phase_ratio = Some(v);
                }
            }
        }
    }
}

/// Keep every secondary mode's rates at `eta` times the dominant ones.
fn rescale_secondary(cfg: &mut SystemConfig) {
    let a = dominant_index(cfg);
    for i in 0..cfg.waveguide.len() {
        if i == a {
            continue;
        }
        let eta = cfg.waveguide[i].input_fraction.norm();
        let ca = cfg.cavity.couplings[a];
        cfg.cavity.couplings[i] = ca.scaled(eta);
        if let Some(m) = cfg.magnon.as_mut() {
            let ma = m.couplings[a];
            m.couplings[i] = ma.scaled(eta);
        }
    }
}

/// Sum of squared residuals on |S21| (magnitude data) or on the real and
/// imaginary parts (complex data). Infeasible parameters give `+inf`.
pub fn residual(problem: &FitProblem, values: &[f64]) -> f64 {
    let out_of_bounds = problem
        .params
        .iter()
        .zip(values)
        .any(|(p, &v)| !(p.lower <= v && v <= p.upper));
    if out_of_bounds {
        return f64::INFINITY;
    }
    let Ok(cfg) = problem.config_for(values) else {
        return f64::INFINITY;
    };
    let phase_a = cfg.waveguide()[cfg.dominant()].phase;
    let Ok(net) = Network::build(&cfg, &cfg.phases_for(phase_a)) else {
        return f64::INFINITY;
    };
    let mut loss = 0.0;
    for (i, &w) in problem.freqs.iter().enumerate() {
        let Ok(s) = net.s21(w) else {
            return f64::INFINITY;
        };
        loss += match &problem.observed {
            Observed::Magnitude(d) => (s.norm() - d[i]).powi(2),
            Observed::Complex(d) => (s - d[i]).norm_sqr(),
        };
    }
    if loss.is_finite() {
        loss
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_evals: usize,
    /// Simplex diameter in unit-normalised parameter space.
    pub tol: f64,
    pub restarts: usize,
    /// Initial simplex edge in unit-normalised space.
    pub initial_step: f64,
    /// Simplex edge for restarts, wider so a restart can leave a stalled basin.
    pub restart_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_evals: 20_000,
            tol: 1e-8,
            restarts: 2,
            initial_step: 0.05,
            restart_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    pub initial_loss: f64,
    pub loss: f64,
    pub evals: usize,
    pub converged: bool,
    /// Best loss after each simplex iteration.
    pub history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn value(&self, kind: ParamKind) -> Option<f64> {
        self.params.iter().find(|p| p.kind == kind).map(|p| p.value)
    }
}

/// Freeze directions the data cannot constrain. Returns warnings.
pub fn apply_identifiability_guard(problem: &mut FitProblem) -> Vec<String> {
    let mut warnings = Vec::new();
    let single_cavity = crate::model::validate(problem.template.clone())
        .map(|c| c.scenario() == Scenario::SingleCavity)
        .unwrap_or(false);
    if single_cavity && matches!(problem.observed, Observed::Magnitude(_)) {
        if let Some(p) = problem.param_mut(ParamKind::PhaseA) {
            if !p.frozen {
                p.frozen = true;
                warnings.push(
                    "phase_a only sets an overall phase of S21 and is unidentifiable from |S21|; frozen".into(),
                );
            }
        }
    }
    warnings
}

struct Objective<'a> {
    problem: &'a FitProblem,
    free: Vec<usize>,
    base: Vec<f64>,
    evals: usize,
    max_evals: usize,
}

impl Objective<'_> {
    fn values(&self, u: &[f64]) -> Vec<f64> {
        let mut v = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            v[i] = self.problem.params[i].unit_to_value(u[k]);
        }
        v
    }

    fn eval(&mut self, u: &[f64]) -> f64 {
        self.evals += 1;
        residual(self.problem, &self.values(u))
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }
}

fn clamp_unit(mut u: Vec<f64>) -> Vec<f64> {
    for x in u.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    u
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(v, _)| v.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// One Nelder-Mead run from `start`; returns the best vertex and whether the
/// simplex collapsed below `tol`.
fn nelder_mead(
    obj: &mut Objective,
    start: &[f64],
    f0: f64,
    step: f64,
    opts: &FitOptions,
    history: &mut Vec<f64>,
) -> (Vec<f64>, f64, bool) {
    let n = start.len();
    let mut simplex = vec![(start.to_vec(), f0)];
    for k in 0..n {
        let mut v = start.to_vec();
        v[k] = if v[k] + step <= 1.0 { v[k] + step } else { v[k] - step };
        let f = obj.eval(&v);
        simplex.push((v, f));
    }
    // dimension-adapted coefficients (Gao & Han)
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        history.push(simplex[0].1);
        if diameter(&simplex) < opts.tol {
            return (simplex[0].0.clone(), simplex[0].1, true);
        }
        if obj.exhausted() {
            return (simplex[0].0.clone(), simplex[0].1, false);
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            clamp_unit(centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect())
        };
        let xr = along(alpha);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(gamma);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(rho);
            let f = obj.eval(&x);
            (x, f)
        } else {
            let x = along(-rho);
            let f = obj.eval(&x);
            (x, f)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + sigma * (x - b)).collect();
            let f = obj.eval(&v);
            *vertex = (v, f);
        }
    }
}

/// Minimise [`residual`] over the free parameters.
pub fn fit(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    problem.check()?;
    let mut problem = problem.clone();
    let warnings = apply_identifiability_guard(&mut problem);
    let base = problem.values();
    let initial_loss = residual(&problem, &base);
    if !initial_loss.is_finite() {
        return Err(Error::Numerical("loss is not finite at the initial guess".into()));
    }
    let free: Vec<usize> = (0..problem.params.len()).filter(|&i| !problem.params[i].frozen).collect();
    if free.is_empty() {
        return Ok(FitResult {
            params: problem.params.clone(),
            initial_loss,
            loss: initial_loss,
            evals: 1,
            converged: true,
            history: vec![initial_loss],
            warnings,
        });
    }

    let mut obj = Objective {
        problem: &problem,
        free: free.clone(),
        base: base.clone(),
        evals: 1,
        max_evals: opts.max_evals.max(free.len() + 2),
    };
    let mut best_u: Vec<f64> = free.iter().map(|&i| problem.params[i].to_unit(base[i])).collect();
    let mut best_f = initial_loss;
    let mut history = vec![initial_loss];
    let mut converged = false;
    for run in 0..=opts.restarts {
        let step = if run == 0 { opts.initial_step } else { opts.restart_step };
        let (u, f, done) = nelder_mead(&mut obj, &best_u, best_f, step, opts, &mut history);
        let improved = f < best_f * (1.0 - 1e-12) || run == 0;
        if f <= best_f {
            best_u = u;
            best_f = f;
        }
        converged = done;
        if !done || obj.exhausted() || (!improved && run > 0) {
            break;
        }
    }
    // keep the recorded trace monotone in the incumbent
    let mut running = f64::INFINITY;
    for h in history.iter_mut() {
        running = running.min(*h);
        *h = running;
    }

    let values = obj.values(&best_u);
    let evals = obj.evals;
    let mut params = problem.params.clone();
    for (p, v) in params.iter_mut().zip(values) {
        p.value = v;
    }
    Ok(FitResult {
        params,
        initial_loss,
        loss: best_f,
        evals,
        converged,
        history,
        warnings,
    })
}

/// Outcome of several fits from jittered starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartResult {
    pub best: FitResult,
    /// Final loss of every start, the unjittered guess first.
    pub losses: Vec<f64>,
    /// Standard deviation of each parameter across the starts.
    pub spread: Vec<(ParamKind, f64)>,
}

/// Run [`fit`] from the initial guess and from `starts - 1` further points
/// drawn uniformly within `jitter` (unit-normalised) of it, seeded by `seed`.
pub fn fit_multistart(
    problem: &FitProblem,
    opts: &FitOptions,
    starts: usize,
    jitter: f64,
    seed: u64,
) -> Result<MultiStartResult> {
    if starts == 0 {
        return Err(Error::config("starts", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(starts);
    for k in 0..starts {
        let mut p = problem.clone();
        if k > 0 {
            for q in p.params.iter_mut().filter(|q| !q.frozen) {
                let u = q.to_unit(q.value) + rng.gen_range(-jitter..=jitter);
                q.value = q.unit_to_value(u);
            }
        }
        results.push(fit(&p, opts)?);
    }
    let losses: Vec<f64> = results.iter().map(|r| r.loss).collect();
    let n = results.len() as f64;
    let spread = problem
        .params
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mean = results.iter().map(|r| r.params[i].value).sum::<f64>() / n;
            let var = results.iter().map(|r| (r.params[i].value - mean).powi(2)).sum::<f64>() / n;
            (q.kind, var.sqrt())
        })
        .collect();
    let best = results
        .into_iter()
        .min_by(|a, b| a.loss.total_cmp(&b.loss))
        .expect("at least one start");
    Ok(MultiStartResult { best, losses, spread })
}

/// `|S21|` samples with multiplicative Gaussian noise of relative size
/// `sigma`, reproducible from `seed`.
pub fn add_magnitude_noise(clean: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(clean.iter().map(|&y| y * (1.0 + normal.sample(&mut rng))).collect())
}

/// Noise-free samples of `cfg` at `freqs`.
pub fn synthesize(cfg: &ValidatedConfig, freqs: &[f64]) -> Result<Vec<C>> {
    let phase_a = cfg.waveguide()[cfg.dominant()].phase;
    let net = Network::build(cfg, &cfg.phases_for(phase_a))?;
    freqs.iter().map(|&w| net.s21(w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linspace, preset_config, validate};

    fn truth() -> SystemConfig {
        let mut c = preset_config(Scenario::SingleCoupled, 0.0, 0.0).unwrap();
        c.magnon.as_mut().unwrap().omega += 100.0;
        c
    }

    fn grid() -> Vec<f64> {
        linspace(9_200.0, 10_800.0, 401)
    }

    fn magnitude_problem(cfg: &SystemConfig) -> FitProblem {
        let clean = synthesize(&validate(cfg.clone()).unwrap(), &grid()).unwrap();
        FitProblem::new(
            grid(),
            Observed::Magnitude(clean.iter().map(|s| s.norm()).collect()),
            cfg.clone(),
        )
        .unwrap()
    }

    #[test]
    fn residual_zero_at_truth() {
        let p = magnitude_problem(&truth());
        assert!(residual(&p, &p.values()) < 1e-20);
    }

    #[test]
    fn residual_positive_off_truth() {
        let p = magnitude_problem(&truth());
        let mut v = p.values();
        let i = p.params.iter().position(|q| q.kind == ParamKind::OmegaC).unwrap();
        v[i] += 10.0;
        assert!(residual(&p, &v) > 0.0);
    }

    #[test]
    fn residual_out_of_bounds_is_rejected() {
        let p = magnitude_problem(&truth());
        let mut v = p.values();
        v[0] = -1.0;
        assert_eq!(residual(&p, &v), f64::INFINITY);
    }

    #[test]
    fn all_frozen_returns_guess() {
        let mut p = magnitude_problem(&truth());
        for q in p.params.iter_mut() {
            q.frozen = true;
        }
        let r = fit(&p, &FitOptions::default()).unwrap();
        assert_eq!(r.evals, 1);
        assert_eq!(r.params, p.params);
    }

    #[test]
    fn cavity_phase_is_frozen_for_magnitudes() {
        let cfg = preset_config(Scenario::SingleCavity, 0.0, 0.0).unwrap();
        let mut p = magnitude_problem(&cfg);
        let w = apply_identifiability_guard(&mut p);
        assert_eq!(w.len(), 1);
        assert!(p.param(ParamKind::PhaseA).unwrap().frozen);
    }

    #[test]
    fn frozen_stay_put_and_loss_never_increases() {
        let mut p = magnitude_problem(&truth());
        p.param_mut(ParamKind::Kappa2).unwrap().value = 300.0;
        p.freeze(ParamKind::PhaseA).unwrap();
        p.freeze(ParamKind::KappaM0).unwrap();
        let r = fit(&p, &FitOptions { max_evals: 400, ..Default::default() }).unwrap();
        assert!(r.loss <= r.initial_loss);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.value(ParamKind::PhaseA), Some(0.0));
        assert_eq!(r.value(ParamKind::KappaM0), Some(1.0));
    }

    #[test]
    fn deterministic() {
        let mut p = magnitude_problem(&truth());
        p.param_mut(ParamKind::Kappa1).unwrap().value = 9.0;
        p.freeze(ParamKind::PhaseA).unwrap();
        let o = FitOptions { max_evals: 300, ..Default::default() };
        assert_eq!(fit(&p, &o).unwrap(), fit(&p, &o).unwrap());
    }

    #[test]
    fn noise_is_seeded() {
        let y = vec![0.5; 50];
        assert_eq!(add_magnitude_noise(&y, 0.01, 7).unwrap(), add_magnitude_noise(&y, 0.01, 7).unwrap());
        assert_ne!(add_magnitude_noise(&y, 0.01, 7).unwrap(), add_magnitude_noise(&y, 0.01, 8).unwrap());
    }

    #[test]
    fn multi_parameters_round_trip_through_config() {
        let cfg = preset_config(Scenario::MultiCoupled, 0.1, 0.2).unwrap();
        let p = magnitude_problem(&cfg);
        let back = p.config_for(&p.values()).unwrap();
        assert_eq!(back.config(), &validate(cfg).unwrap().into_config());
    }

    #[test]
    fn multistart_is_seeded_and_keeps_best() {
        let mut p = magnitude_problem(&truth());
        p.param_mut(ParamKind::Kappa1).unwrap().value = 9.0;
        p.freeze(ParamKind::PhaseA).unwrap();
        let o = FitOptions { max_evals: 400, ..Default::default() };
        let a = fit_multistart(&p, &o, 3, 0.05, 11).unwrap();
        assert_eq!(a, fit_multistart(&p, &o, 3, 0.05, 11).unwrap());
        assert_eq!(a.losses.len(), 3);
        assert_eq!(a.best.loss, a.losses.iter().cloned().fold(f64::INFINITY, f64::min));
        assert_eq!(a.losses[0], fit(&p, &o).unwrap().loss);
        let frozen = a.spread.iter().find(|s| s.0 == ParamKind::PhaseA).unwrap();
        assert_eq!(frozen.1, 0.0);
        assert!(fit_multistart(&p, &o, 0, 0.05, 11).is_err());
    }
}
