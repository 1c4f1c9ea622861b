//! Small dense linear algebra for the 2x2 dynamics, plus a fixed-step RK4
//! integrator used as a time-domain oracle for every frequency-domain result.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

const J: C = C::new(0.0, 1.0);

/// Relative cancellation threshold for determinants.
pub const SINGULAR_RTOL: f64 = 1e-14;

/// 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C; 2]; 2]);

impl Mat2 {
    pub fn new(a: C, b: C, c: C, d: C) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diagonal(a: C, d: C) -> Self {
        Mat2::new(a, C::default(), C::default(), d)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C {
        self.0[i][j]
    }

    pub fn det(&self) -> C {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> C {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul_vec(&self, v: [C; 2]) -> [C; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// `s I - self`.
    pub fn resolvent_operand(&self, s: C) -> Mat2 {
        Mat2::new(s - self.0[0][0], -self.0[0][1], -self.0[1][0], s - self.0[1][1])
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0
            .iter()
            .map(|r| r[0].norm() + r[1].norm())
            .fold(0.0, f64::max)
    }
}

/// Solve `(j omega I - M) X = b` by Cramer's rule.
pub fn solve_steady_state(m: &Mat2, b: [C; 2], omega: f64) -> Result<[C; 2]> {
    let a = m.resolvent_operand(J * omega);
    let diag = a.at(0, 0) * a.at(1, 1);
    let off = a.at(0, 1) * a.at(1, 0);
    let det = diag - off;
    let scale = diag.norm().max(off.norm());
    if det.norm() <= SINGULAR_RTOL * scale || det.norm() == 0.0 {
        return Err(Error::Singular {
            context: "steady-state solve",
            det: det.norm(),
        });
    }
    Ok([
        (a.at(1, 1) * b[0] - a.at(0, 1) * b[1]) / det,
        (a.at(0, 0) * b[1] - a.at(1, 0) * b[0]) / det,
    ])
}

/// Eigenvalues of a 2x2 matrix with unit eigenvectors (`vectors[k]` pairs
/// with `values[k]`), sorted by real part descending, then imaginary part
/// descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub values: [C; 2],
    pub vectors: [[C; 2]; 2],
}

fn normalized(v: [C; 2]) -> [C; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

fn eigenvector(m: &Mat2, lambda: C, fallback: [C; 2]) -> [C; 2] {
    let (a, b, c, d) = (m.at(0, 0), m.at(0, 1), m.at(1, 0), m.at(1, 1));
    let u = [b, lambda - a];
    let w = [lambda - d, c];
    let nu = u[0].norm_sqr() + u[1].norm_sqr();
    let nw = w[0].norm_sqr() + w[1].norm_sqr();
    let scale = m.norm_inf().max(f64::MIN_POSITIVE);
    if nu.max(nw).sqrt() <= 1e-14 * scale {
        return fallback;
    }
    normalized(if nu >= nw { u } else { w })
}

pub fn eigenpairs(m: &Mat2) -> EigenPair {
    let half_tr = 0.5 * m.trace();
    let half_diff = 0.5 * (m.at(0, 0) - m.at(1, 1));
    let s = (half_diff * half_diff + m.at(0, 1) * m.at(1, 0)).sqrt();
    let mut values = [half_tr + s, half_tr - s];
    if (values[1].re, values[1].im) > (values[0].re, values[0].im) {
        values.swap(0, 1);
    }
    let one = C::new(1.0, 0.0);
    let zero = C::default();
    let v0 = eigenvector(m, values[0], [one, zero]);
    let mut v1 = eigenvector(m, values[1], [zero, one]);
    // Degenerate and defective/diagonal: keep the two vectors distinct.
    if values[0] == values[1] && (v0[0] * v1[1] - v0[1] * v1[0]).norm() < 1e-12 {
        v1 = [-v0[1].conj(), v0[0].conj()];
    }
    EigenPair {
        values,
        vectors: [v0, v1],
    }
}

/// Settings for [`integrate_steady_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// RK4 steps per period of the fastest time scale.
    pub steps_per_period: usize,
    /// Stop once the estimated remaining transient in the envelope is below
    /// `rtol * |X|`.
    pub rtol: f64,
    /// Give up after this many slowest-decay times.
    pub settle_decays: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            steps_per_period: 128,
            rtol: 1e-11,
            settle_decays: 50.0,
        }
    }
}

fn matvec<const N: usize>(m: &[[C; N]; N], x: &[C; N]) -> [C; N] {
    let mut out = [C::default(); N];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    out
}

fn axpy<const N: usize>(x: &[C; N], a: C, y: &[C; N]) -> [C; N] {
    let mut out = *x;
    for (o, v) in out.iter_mut().zip(y) {
        *o += a * v;
    }
    out
}

fn vnorm<const N: usize>(x: &[C; N]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Decay rate of the slowest eigenmode of `m` (positive when stable).
fn slowest_decay<const N: usize>(m: &[[C; N]; N]) -> Result<f64> {
    let growth = match N {
        1 => m[0][0].re,
        2 => {
            let e = eigenpairs(&Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1]));
            e.values[0].re
        }
        _ => return Err(Error::Numerical("time-domain oracle supports 1 or 2 modes".into())),
    };
    if growth >= 0.0 {
        return Err(Error::Unstable { growth });
    }
    Ok(-growth)
}

/// Integrate `dx/dt = M x + b e^{j omega t}` from `x(0) = 0` with classical
/// RK4 until the co-rotating envelope `X = x e^{-j omega t}` settles, and
/// return that envelope.
pub fn integrate_steady_state<const N: usize>(
    m: &[[C; N]; N],
    b: &[C; N],
    omega: f64,
    opts: &OracleOptions,
) -> Result<[C; N]> {
    let gamma = slowest_decay(m)?;
    let row_norm = m
        .iter()
        .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let fastest = omega.abs().max(row_norm);
    let h = TAU / fastest / opts.steps_per_period as f64;

    let check_every = ((1.0 / gamma / h).round() as usize).max(1);
    let window = check_every as f64 * h;
    // A transient decaying at rate gamma changes by about gamma*window per
    // window; scale the observed change up to the remaining amplitude.
    let amplification = 1.0 / (1.0 - (-gamma * window).exp());
    let max_steps = (opts.settle_decays / gamma / h).ceil() as usize;

    let f = |t: f64, x: &[C; N]| -> [C; N] {
        let drive = C::from_polar(1.0, omega * t);
        axpy(&matvec(m, x), drive, b)
    };

    let mut x = [C::default(); N];
    let mut last_env: Option<[C; N]> = None;
    let mut change = f64::INFINITY;
    let mut step = 0usize;
    while step < max_steps {
        let t = step as f64 * h;
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * h, &axpy(&x, C::from(0.5 * h), &k1));
        let k3 = f(t + 0.5 * h, &axpy(&x, C::from(0.5 * h), &k2));
        let k4 = f(t + h, &axpy(&x, C::from(h), &k3));
        for i in 0..N {
            x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        step += 1;
        if step.is_multiple_of(check_every) {
            let rot = C::from_polar(1.0, -omega * step as f64 * h);
            let mut env = x;
            for v in env.iter_mut() {
                *v *= rot;
            }
            if let Some(prev) = last_env {
                let mut diff = env;
                for (d, p) in diff.iter_mut().zip(&prev) {
                    *d -= p;
                }
                change = vnorm(&diff) * amplification;
                if change <= opts.rtol * vnorm(&env) {
                    return Ok(env);
                }
            }
            last_env = Some(env);
        }
    }
    Err(Error::NotConverged {
        steps: step,
        change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn diagonal_solve() {
        let x = solve_steady_state(&Mat2::diagonal(c(0.0, 0.0), c(-1.0, 0.0)), [c(1.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        assert!((x[0] - c(0.0, -1.0)).norm() < 1e-15);
        assert_eq!(x[1], C::default());
    }

    #[test]
    fn zero_drive_gives_zero() {
        let m = Mat2::new(c(-1.0, 2.0), c(0.3, 0.0), c(0.3, 0.0), c(-2.0, 1.0));
        let x = solve_steady_state(&m, [C::default(); 2], 1.5).unwrap();
        assert_eq!(x, [C::default(); 2]);
    }

    #[test]
    fn singular_is_reported() {
        // undamped mode driven exactly on resonance
        let m = Mat2::diagonal(c(0.0, 3.0), c(-1.0, 0.0));
        let err = solve_steady_state(&m, [c(1.0, 0.0), C::default()], 3.0).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn random_residuals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r = || c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        for _ in 0..200 {
            let m = Mat2::new(r(), r(), r(), r());
            let b = [r(), r()];
            let omega = r().re;
            let x = solve_steady_state(&m, b, omega).unwrap();
            let a = m.resolvent_operand(J * omega);
            let ax = a.mul_vec(x);
            let res = ((ax[0] - b[0]).norm_sqr() + (ax[1] - b[1]).norm_sqr()).sqrt();
            let bn = (b[0].norm_sqr() + b[1].norm_sqr()).sqrt();
            assert!(res < 1e-10 * bn, "residual {res}");
        }
    }

    #[test]
    fn diagonal_eigenvalues() {
        let e = eigenpairs(&Mat2::diagonal(c(-3.0, 1.0), c(-1.0, 7.0)));
        assert_eq!(e.values, [c(-1.0, 7.0), c(-3.0, 1.0)]);
        assert!((e.vectors[0][1].norm() - 1.0).abs() < 1e-15);
        assert!((e.vectors[1][0].norm() - 1.0).abs() < 1e-15);

        // fully degenerate
        let e = eigenpairs(&Mat2::diagonal(c(2.0, 0.0), c(2.0, 0.0)));
        assert_eq!(e.values[0], e.values[1]);
        let v = e.vectors;
        assert!((v[0][0] * v[1][1] - v[0][1] * v[1][0]).norm() > 0.5);
    }

    #[test]
    fn eigen_identities_and_residuals() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut r = || c(rng.gen_range(-400.0..400.0), rng.gen_range(-1e4..1e4));
        for _ in 0..500 {
            let m = Mat2::new(r(), r() * 0.01, r() * 0.01, r());
            let e = eigenpairs(&m);
            let tr = e.values[0] + e.values[1];
            let det = e.values[0] * e.values[1];
            assert!((tr - m.trace()).norm() <= 1e-10 * m.trace().norm().max(1.0));
            assert!((det - m.det()).norm() <= 1e-10 * m.det().norm().max(1.0));
            for k in 0..2 {
                let mv = m.mul_vec(e.vectors[k]);
                let res = ((mv[0] - e.values[k] * e.vectors[k][0]).norm_sqr()
                    + (mv[1] - e.values[k] * e.vectors[k][1]).norm_sqr())
                .sqrt();
                assert!(res < 1e-10 * m.norm_inf(), "residual {res}");
            }
            assert!(e.values[0].re >= e.values[1].re);
        }
    }

    #[test]
    fn splitting_matches_characteristic_polynomial() {
        // preset single-mode matrix at w_m = w_c, phase 0
        let g = -(8.0f64 * 350.0).sqrt();
        let m = Mat2::new(c(-9.0, 1e4), c(g, 0.0), c(g, 0.0), c(-367.0, 1e4));
        let e = eigenpairs(&m);
        // lambda^2 - tr lambda + det = 0 solved independently in shifted form
        let shift = c(0.0, 1e4);
        let p = -(m.trace() - 2.0 * shift);
        let q = (m.at(0, 0) - shift) * (m.at(1, 1) - shift) - m.at(0, 1) * m.at(1, 0);
        let disc = (p * p - 4.0 * q).sqrt();
        let roots = [(-p + disc) / 2.0 + shift, (-p - disc) / 2.0 + shift];
        let split = (e.values[0] - e.values[1]).norm();
        assert!((split - (roots[0] - roots[1]).norm()).abs() < 1e-9);
        let expected = 2.0 * (((9.0f64 - 367.0) / 2.0).powi(2) + 2800.0).sqrt();
        assert!((split - expected).abs() < 1e-9);
    }

    #[test]
    fn rk4_scalar_relaxation() {
        // dx/dt = (j w0 - g) x + b e^{j w t}  ->  X = b / (j (w - w0) + g)
        let (w0, g, w) = (3.0, 0.7, 4.5);
        let m = [[c(-g, w0)]];
        let b = [c(1.0, 0.0)];
        let x = integrate_steady_state(&m, &b, w, &OracleOptions::default()).unwrap();
        let exact = 1.0 / c(g, w - w0);
        let rel = (x[0] - exact).norm() / exact.norm();
        assert!(rel < 1e-7, "{rel:e}");
    }

    #[test]
    fn rk4_rejects_growth() {
        let m = [[c(0.1, 1.0)]];
        let err = integrate_steady_state(&m, &[c(1.0, 0.0)], 1.0, &OracleOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn rk4_budget_exhaustion() {
        let m = [[c(-1.0, 0.0)]];
        let opts = OracleOptions {
            rtol: 0.0,
            settle_decays: 2.0,
            ..OracleOptions::default()
        };
        let err = integrate_steady_state(&m, &[c(1.0, 0.0)], 0.5, &opts).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
    }
}
