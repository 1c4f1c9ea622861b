//! Observables derived from the engines: detuning maps, dips, phase
//! periodicity and level attraction/repulsion classification.

use std::f64::consts::PI;

use num_complex::Complex64;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DetuningMap, Scenario, Spectrum, ValidatedConfig};
use crate::solver::{eigenpairs, Mat2};
use crate::system::{CoupledSystem, Network};

type C = Complex64;

/// `cfg` with the magnon placed at `omega_c + delta_m`.
pub fn with_magnon_detuning(cfg: &ValidatedConfig, delta_m: f64) -> Result<ValidatedConfig> {
    let wc = cfg.cavity().omega;
    cfg.with(|c| {
        if let Some(m) = c.magnon.as_mut() {
            m.omega = wc + delta_m;
        }
    })
}

fn coupled_system(cfg: &ValidatedConfig, phase_a: f64, delta_m: f64) -> Result<CoupledSystem> {
    let cfg = with_magnon_detuning(cfg, delta_m)?;
    match Network::build(&cfg, &cfg.phases_for(phase_a))? {
        Network::Coupled(s) => Ok(s),
        Network::Cavity(_) => unreachable!("coupled scenario builds a coupled system"),
    }
}

fn require_coupled(cfg: &ValidatedConfig, op: &'static str) -> Result<()> {
    cfg.require(op, "a magnon + cavity config", Scenario::is_coupled)
}

/// S21 over `omega_c + delta_c` for the config's own magnon frequency.
pub fn spectrum(cfg: &ValidatedConfig, phases: &[f64], delta_c: &[f64]) -> Result<Spectrum> {
    let net = Network::build(cfg, phases)?;
    let wc = cfg.cavity().omega;
    let freqs: Vec<f64> = delta_c.iter().map(|d| wc + d).collect();
    let values = freqs.iter().map(|&w| net.s21(w)).collect::<Result<Vec<_>>>()?;
    Spectrum::new(freqs, values)
}

fn map_row(cfg: &ValidatedConfig, phase_a: f64, dm: f64, delta_c: &[f64]) -> Result<Vec<f64>> {
    let sys = coupled_system(cfg, phase_a, dm)?;
    let wc = cfg.cavity().omega;
    delta_c.iter().map(|d| sys.s21(wc + d).map(|s| s.norm())).collect()
}

/// |S21| on the `(delta_c, delta_m)` grid, one row per `delta_m`.
/// Single-mode phases are reduced modulo pi, where |S21| is exactly periodic.
pub fn detuning_map(cfg: &ValidatedConfig, phase_a: f64, delta_c: &[f64], delta_m: &[f64]) -> Result<DetuningMap> {
    require_coupled(cfg, "detuning_map")?;
    if delta_c.is_empty() || delta_m.is_empty() {
        return Err(Error::config("grid", "detuning grids must not be empty"));
    }
    let phase_a = if cfg.scenario().is_multi() {
        phase_a
    } else {
        phase_a.rem_euclid(PI)
    };
    #[cfg(feature = "parallel")]
    let rows: Vec<Result<Vec<f64>>> = delta_m
        .par_iter()
        .map(|&dm| map_row(cfg, phase_a, dm, delta_c))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Result<Vec<f64>>> = delta_m
        .iter()
        .map(|&dm| map_row(cfg, phase_a, dm, delta_c))
        .collect();
    let mut values = Vec::with_capacity(delta_c.len() * delta_m.len());
    for r in rows {
        values.extend(r?);
    }
    DetuningMap::new(delta_c.to_vec(), delta_m.to_vec(), values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingLabel {
    Repulsion,
    Attraction,
    Unresolved,
}

impl CouplingLabel {
    pub fn short(self) -> &'static str {
        match self {
            CouplingLabel::Repulsion => "LR",
            CouplingLabel::Attraction => "LA",
            CouplingLabel::Unresolved => "-",
        }
    }
}

/// Hybridisation of the two transmission zeros (the dips seen in |S21|) as
/// the magnon is swept through the cavity.
///
/// Gaps are evaluated at the bare crossing `delta_m_cross`, where the
/// uncoupled zero frequencies coincide. Linewidths are full widths
/// (2 x damping).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingClassification {
    pub label: CouplingLabel,
    pub real_gap: f64,
    pub imag_gap: f64,
    pub mean_linewidth: f64,
    pub strong: bool,
    pub delta_m_cross: f64,
    /// sqrt|G| and arg G of the effective zero coupling G = W12 W21.
    pub coupling_strength: f64,
    pub coupling_phase: f64,
    /// Minimum separations of the pole frequencies and dampings over the sweep.
    pub pole_real_gap: f64,
    pub pole_imag_gap: f64,
    /// |C| from the assembled matrix at the crossing.
    pub cooperativity: f64,
}

/// Eigenfrequency form of the zero matrix: eigenvalues are
/// `frequency + j damping`.
fn zero_frequency_matrix(sys: &CoupledSystem) -> Result<Mat2> {
    let z = sys.zero_matrix()?;
    let mj = C::new(0.0, -1.0);
    Ok(Mat2::new(mj * z.at(0, 0), mj * z.at(0, 1), mj * z.at(1, 0), mj * z.at(1, 1)))
}

/// Relative level below which the zero coupling counts as numerically absent.
const COUPLING_FLOOR: f64 = 1e-6;

pub fn classify_coupling(cfg: &ValidatedConfig, phase_a: f64, delta_m: &[f64]) -> Result<CouplingClassification> {
    require_coupled(cfg, "classify_coupling")?;
    if delta_m.is_empty() {
        return Err(Error::config("delta_m", "detuning grid must not be empty"));
    }
    let w0 = zero_frequency_matrix(&coupled_system(cfg, phase_a, 0.0)?)?;
    let g = w0.at(0, 1) * w0.at(1, 0);
    let cross = -(w0.at(0, 0) - w0.at(1, 1)).re;

    let sys = coupled_system(cfg, phase_a, cross)?;
    let w = zero_frequency_matrix(&sys)?;
    let dgamma = (w.at(0, 0) - w.at(1, 1)).im;
    let delta = 2.0 * (g - C::from(0.25 * dgamma * dgamma)).sqrt();
    let zeros = eigenpairs(&w).values;
    let mean_linewidth = zeros.iter().map(|z| 2.0 * z.im.abs()).sum::<f64>() / 2.0;

    let scale = [w.at(0, 0).im, w.at(1, 1).im, w.at(0, 1).norm(), w.at(1, 0).norm()]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max);
    let (lo, hi) = delta_m
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span_tol = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let in_range = cross >= lo - span_tol && cross <= hi + span_tol;
    let resolved = g.norm().sqrt() > COUPLING_FLOOR * scale && in_range;

    let label = if !resolved {
        CouplingLabel::Unresolved
    } else if (delta * delta).re > 0.0 {
        CouplingLabel::Repulsion
    } else {
        CouplingLabel::Attraction
    };
    let real_gap = delta.re.abs();

    let mut pole_real_gap = f64::INFINITY;
    let mut pole_imag_gap = f64::INFINITY;
    for &dm in delta_m {
        let p = eigenpairs(&coupled_system(cfg, phase_a, dm)?.matrix).values;
        pole_real_gap = pole_real_gap.min((p[0].im - p[1].im).abs());
        pole_imag_gap = pole_imag_gap.min((p[0].re - p[1].re).abs());
    }

    Ok(CouplingClassification {
        label,
        real_gap,
        imag_gap: delta.im.abs(),
        mean_linewidth,
        strong: resolved && real_gap > mean_linewidth,
        delta_m_cross: cross,
        coupling_strength: g.norm().sqrt(),
        coupling_phase: g.arg(),
        pole_real_gap,
        pole_imag_gap,
        cooperativity: sys.cooperativity().norm(),
    })
}

fn track(prev: Option<[C; 2]>, mut next: [C; 2]) -> [C; 2] {
    if let Some(p) = prev {
        let keep = (next[0] - p[0]).norm() + (next[1] - p[1]).norm();
        let swap = (next[1] - p[0]).norm() + (next[0] - p[1]).norm();
        if swap < keep {
            next.swap(0, 1);
        }
    }
    next
}

/// Transmission zeros (`frequency + j damping`) over the sweep, with the two
/// branches kept continuous.
pub fn zero_branches(cfg: &ValidatedConfig, phase_a: f64, delta_m: &[f64]) -> Result<Vec<[C; 2]>> {
    require_coupled(cfg, "zero_branches")?;
    let mut out: Vec<[C; 2]> = Vec::with_capacity(delta_m.len());
    for &dm in delta_m {
        let w = zero_frequency_matrix(&coupled_system(cfg, phase_a, dm)?)?;
        out.push(track(out.last().copied(), eigenpairs(&w).values));
    }
    Ok(out)
}

/// Poles of S21 (`frequency + j damping`) over the sweep, branch-tracked.
pub fn pole_branches(cfg: &ValidatedConfig, phase_a: f64, delta_m: &[f64]) -> Result<Vec<[C; 2]>> {
    require_coupled(cfg, "pole_branches")?;
    let mj = C::new(0.0, -1.0);
    let mut out: Vec<[C; 2]> = Vec::with_capacity(delta_m.len());
    for &dm in delta_m {
        let p = eigenpairs(&coupled_system(cfg, phase_a, dm)?.matrix).values;
        out.push(track(out.last().copied(), [mj * p[0], mj * p[1]]));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    pub freq: f64,
    /// Prominence of the dip in |S21|.
    pub depth: f64,
    /// Full width at half depth.
    pub linewidth: f64,
    /// Minimum |S21|.
    pub min: f64,
}

impl Dip {
    pub fn extinction(&self) -> f64 {
        1.0 - self.min
    }
}

fn crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return x0;
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// Local minima of |S21| whose prominence is at least `prominence`.
///
/// Prominence is topographic: the lower of the highest points reached on
/// each side before the curve drops below the dip (or the grid ends).
/// Position and minimum are refined with a parabola through the three
/// nearest samples; the width is measured at half the prominence with
/// linear interpolation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn find_dips(spectrum: &Spectrum, prominence: f64) -> Vec<Dip> {
    let x = spectrum.freqs();
    let y = spectrum.magnitudes();
    let n = y.len();
    let mut dips = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if !(y[i] < y[i - 1]) {
            i += 1;
            continue;
        }
        // plateau-tolerant right edge of the minimum
        let mut r = i;
        while r + 1 < n && y[r + 1] == y[i] {
            r += 1;
        }
        if r + 1 >= n || !(y[r + 1] > y[i]) {
            i = r + 1;
            continue;
        }
        let (left_peak, left_bound) = flank(&y, i, -1);
        let (right_peak, right_bound) = flank(&y, r, 1);
        let yi = y[i];
        let (mut xm, mut ym) = (0.5 * (x[i] + x[r]), yi);
        if r == i {
            let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
            let den = a - 2.0 * b + c;
            if den > 0.0 && x[i + 1] - x[i] == x[i] - x[i - 1] {
                let t = 0.5 * (a - c) / den;
                xm = x[i] + t * (x[i + 1] - x[i]);
                ym = b - 0.25 * (a - c) * t;
            }
        }
        let depth = left_peak.min(right_peak) - ym;
        if depth >= prominence && depth > 0.0 {
            let half = ym + 0.5 * depth;
            let mut a = i;
            while a > left_bound && y[a] < half {
                a -= 1;
            }
            let xl = if y[a] >= half { crossing(x[a], y[a], x[a + 1], y[a + 1], half) } else { x[a] };
            let mut c = r;
            while c < right_bound && y[c] < half {
                c += 1;
            }
            let xr = if y[c] >= half { crossing(x[c - 1], y[c - 1], x[c], y[c], half) } else { x[c] };
            dips.push(Dip {
                freq: xm,
                depth,
                linewidth: xr - xl,
                min: ym.max(0.0),
            });
        }
        i = r + 1;
    }
    dips
}

/// Highest value reached walking from `start` in direction `dir` until the
/// curve drops below `y[start]`, and the index where the walk stopped.
fn flank(y: &[f64], start: usize, dir: isize) -> (f64, usize) {
    let base = y[start];
    let mut peak = base;
    let mut k = start as isize;
    let mut bound = start;
    loop {
        let nk = k + dir;
        if nk < 0 || nk as usize >= y.len() || y[nk as usize] < base {
            break;
        }
        k = nk;
        bound = k as usize;
        peak = peak.max(y[bound]);
    }
    // the width walk must stay on this side of the flank maximum
    let mut idx = start;
    let mut best = base;
    let mut j = start as isize;
    while j != bound as isize {
        j += dir;
        if y[j as usize] > best {
            best = y[j as usize];
            idx = j as usize;
        }
    }
    (peak, idx)
}

/// Largest |S21| difference between `phi` and `phi + period` over the
/// grids.
pub fn phase_shift_residual(cfg: &ValidatedConfig, omega: &[f64], phi: &[f64], period: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &p in phi {
        let a = Network::build(cfg, &cfg.phases_for(p))?;
        let b = Network::build(cfg, &cfg.phases_for(p + period))?;
        for &w in omega {
            worst = worst.max((a.s21(w)?.norm() - b.s21(w)?.norm()).abs());
        }
    }
    Ok(worst)
}

/// Tests the candidate periods pi and 2 pi of |S21| in the dominant phase.
/// Returns the first one whose residual is below 1e-6, or else the best
/// candidate and its residual.
pub fn phase_periodicity(cfg: &ValidatedConfig, omega: &[f64], phi: &[f64]) -> Result<(f64, f64)> {
    let mut best = (PI, f64::INFINITY);
    for period in [PI, 2.0 * PI] {
        let r = phase_shift_residual(cfg, omega, phi, period)?;
        if r < 1e-6 {
            return Ok((period, r));
        }
        if r < best.1 {
            best = (period, r);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linspace, preset_config, validate, CriticalVariant, Loading, ModeCoupling};

    fn cfg(s: Scenario) -> ValidatedConfig {
        validate(preset_config(s, 0.1, 0.2).unwrap()).unwrap()
    }

    fn critical(c: ValidatedConfig) -> ValidatedConfig {
        c.with(|c| c.loading = Loading::Critical(CriticalVariant::Complex)).unwrap()
    }

    fn lorentz_dip(x: &[f64], x0: f64, fwhm: f64, depth: f64) -> Spectrum {
        let hw2 = 0.25 * fwhm * fwhm;
        let v = x
            .iter()
            .map(|&w| C::from(1.0 - depth * hw2 / ((w - x0).powi(2) + hw2)))
            .collect();
        Spectrum::new(x.to_vec(), v).unwrap()
    }

    #[test]
    fn synthetic_lorentzian() {
        let x = linspace(-800.0, 800.0, 1601);
        for x0 in [0.0, 13.3, -250.7] {
            let dips = find_dips(&lorentz_dip(&x, x0, 34.0, 0.8), 0.05);
            assert_eq!(dips.len(), 1);
            let d = dips[0];
            assert!((d.freq - x0).abs() < 0.1, "{d:?}");
            assert!((d.linewidth - 34.0).abs() / 34.0 < 0.02, "{d:?}");
        }
    }

    #[test]
    fn flat_spectrum_has_no_dips() {
        let x = linspace(0.0, 10.0, 11);
        let s = Spectrum::new(x, vec![C::from(0.7); 11]).unwrap();
        assert!(find_dips(&s, 0.0).is_empty());
    }

    #[test]
    fn critical_cavity_dip() {
        let c = validate(preset_config(Scenario::SingleCavity, 0.0, 0.0).unwrap())
            .unwrap()
            .with(|c| c.loading = Loading::Critical(CriticalVariant::Complex))
            .unwrap();
        let s = spectrum(&c, &[0.0], &linspace(-800.0, 800.0, 1601)).unwrap();
        let dips = find_dips(&s, 0.1);
        assert_eq!(dips.len(), 1);
        assert!((dips[0].freq - c.cavity().omega).abs() < 1e-6);
        assert!((dips[0].extinction() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_mode_map_is_pi_periodic() {
        let c = validate(preset_config(Scenario::SingleCoupled, 0.0, 0.0).unwrap()).unwrap();
        let dc = linspace(-400.0, 400.0, 81);
        let dm = linspace(-300.0, 300.0, 25);
        let a = detuning_map(&c, 0.0, &dc, &dm).unwrap();
        let b = detuning_map(&c, PI, &dc, &dm).unwrap();
        assert_eq!(a, b);
        let c = detuning_map(&c, 0.4, &dc, &dm).unwrap();
        let d = detuning_map(&validate(preset_config(Scenario::SingleCoupled, 0.0, 0.0).unwrap()).unwrap(), 0.4 + PI, &dc, &dm).unwrap();
        for (x, y) in c.values().iter().zip(d.values()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn one_row_map() {
        let c = cfg(Scenario::MultiCoupled);
        let dc = linspace(-400.0, 400.0, 41);
        let m = detuning_map(&c, 0.0, &dc, &[0.0]).unwrap();
        let s = spectrum(&c, &c.phases_for(0.0), &dc).unwrap();
        assert_eq!(m.row(0), s.magnitudes().as_slice());
    }

    #[test]
    fn map_needs_coupled_and_nonempty() {
        let c = cfg(Scenario::MultiCavity);
        assert!(detuning_map(&c, 0.0, &[0.0], &[0.0]).is_err());
        let c = cfg(Scenario::MultiCoupled);
        assert!(detuning_map(&c, 0.0, &[0.0], &[]).is_err());
    }

    #[test]
    fn critical_multi_sequence() {
        let c = critical(cfg(Scenario::MultiCoupled));
        let dm = linspace(-300.0, 300.0, 241);
        let la = classify_coupling(&c, 0.0, &dm).unwrap();
        let lr = classify_coupling(&c, PI, &dm).unwrap();
        let la2 = classify_coupling(&c, 2.0 * PI, &dm).unwrap();
        assert_eq!(la.label, CouplingLabel::Attraction, "{la:?}");
        assert_eq!(lr.label, CouplingLabel::Repulsion, "{lr:?}");
        assert!(lr.strong, "{lr:?}");
        assert_eq!(la2.label, CouplingLabel::Attraction, "{la2:?}");
        assert!(!la.strong && !la2.strong);
    }

    #[test]
    fn single_mode_is_unresolved_and_weak() {
        let c = validate(preset_config(Scenario::SingleCoupled, 0.0, 0.0).unwrap()).unwrap();
        let dm = linspace(-300.0, 300.0, 241);
        for k in 0..5 {
            let r = classify_coupling(&c, 0.5 * PI * k as f64, &dm).unwrap();
            assert!(!r.strong);
            assert_eq!(r.label, CouplingLabel::Unresolved, "{r:?}");
        }
    }

    #[test]
    fn decoupled_magnon_is_unresolved() {
        let c = cfg(Scenario::MultiCoupled)
            .with(|c| c.magnon.as_mut().unwrap().couplings = vec![ModeCoupling::symmetric(0.0); 2])
            .unwrap();
        let r = classify_coupling(&c, 1.0, &linspace(-300.0, 300.0, 61)).unwrap();
        assert_eq!(r.label, CouplingLabel::Unresolved);
        assert!(!r.strong);
    }

    #[test]
    fn branches_are_continuous() {
        let c = critical(cfg(Scenario::MultiCoupled));
        let dm = linspace(-300.0, 300.0, 241);
        let z = zero_branches(&c, PI, &dm).unwrap();
        for pair in z.windows(2) {
            for (a, b) in pair[0].iter().zip(&pair[1]) {
                assert!((b - a).norm() < 10.0);
            }
        }
        let p = pole_branches(&c, PI, &dm).unwrap();
        assert_eq!(p.len(), dm.len());
        assert!(p.iter().all(|v| v[0].im > 0.0 && v[1].im > 0.0));
    }

    #[test]
    fn periodicity() {
        let w: Vec<f64> = linspace(-800.0, 800.0, 161).iter().map(|d| 10_000.0 + d).collect();
        let phi = linspace(0.0, 2.0 * PI, 5);
        let one = validate(preset_config(Scenario::SingleCoupled, 0.0, 0.0).unwrap()).unwrap();
        let (p, r) = phase_periodicity(&one, &w, &phi).unwrap();
        assert_eq!(p, PI);
        assert!(r < 1e-10);
        let multi = cfg(Scenario::MultiCoupled);
        assert!(phase_shift_residual(&multi, &w, &[0.0], PI).unwrap() > 0.01);
    }

    #[test]
    fn decoupled_line_has_any_period() {
        let c = validate(preset_config(Scenario::SingleCoupled, 0.0, 0.0).unwrap())
            .unwrap()
            .with(|c| {
                c.magnon.as_mut().unwrap().couplings[0] = ModeCoupling::symmetric(0.0);
                c.cavity.couplings[0] = ModeCoupling::symmetric(0.0);
            })
            .unwrap();
        let w = [9_900.0, 10_000.0];
        for period in [0.3, PI, 2.0 * PI] {
            assert!(phase_shift_residual(&c, &w, &[0.0, 1.0], period).unwrap() < 1e-15);
        }
    }
}
