//! Brute-force time integration of the full time-dependent master equation.
//!
//! Used only to verify the Floquet and spectral routes. The right-hand side
//! is evaluated in matrix form with sparse operator products, and the state
//! is integrated with an adaptive 8th-order Dormand-Prince scheme.

use faer::{c64, Mat, MatRef};
use ode_solvers::{DVector, Dop853, OutputType, System};

use crate::error::{PcsError, Result};
use crate::hilbert::{basis_index, Atom};
use crate::linalg::{CMat, I, ZERO};
use crate::liouville::LiouvilleParts;

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: u32,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 20_000_000,
        }
    }
}

/// Sampled density matrices.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CMat>,
}

type Sparse = Vec<(usize, usize, c64)>;

fn sparse(m: &CMat) -> Sparse {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != ZERO {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

struct MasterEquation {
    d: usize,
    delta: f64,
    h_eff: Sparse,
    scan_plus: Sparse,
    scan_minus: Sparse,
    jumps: Vec<(Sparse, f64)>,
    /// Also integrate `∫ rho dt` in the second half of the state.
    accumulate: bool,
}

impl MasterEquation {
    fn new(parts: &LiouvilleParts, delta: f64, accumulate: bool) -> Self {
        let p = parts.params();
        let ops = parts.operators();
        Self {
            d: parts.hilbert_dim(),
            delta,
            h_eff: sparse(parts.h_eff()),
            scan_plus: sparse(parts.scan_plus()),
            scan_minus: sparse(parts.scan_minus()),
            jumps: vec![
                (sparse(&ops.a), 2.0 * p.kappa),
                (sparse(&ops.sigma_minus), p.gamma),
            ],
            accumulate,
        }
    }


    fn derivative(&self, t: f64, rho: &[c64], out: &mut [c64]) {
        let d = self.d;
        out.iter_mut().for_each(|x| *x = ZERO);
        let ph = c64::new(0.0, -self.delta * t).exp();
        let terms = self
            .h_eff
            .iter()
            .map(|&(i, k, v)| (i, k, v))
            .chain(self.scan_plus.iter().map(|&(i, k, v)| (i, k, v * ph)))
            .chain(self.scan_minus.iter().map(|&(i, k, v)| (i, k, v * ph.conj())));
        // −i K rho + i rho K†
        for (r, k, v) in terms {
            let mi_v = -I * v;
            let i_vc = I * v.conj();
            for j in 0..d {
                out[r + d * j] += mi_v * rho[k + d * j];
            }
            for i in 0..d {
                out[i + d * r] += i_vc * rho[i + d * k];
            }
        }
        for (c, rate) in &self.jumps {
            for &(i, k, v) in c {
                for &(j, l, w) in c {
                    out[i + d * j] += v * w.conj() * *rate * rho[k + d * l];
                }
            }
        }
    }
}

impl System<f64, DVector<f64>> for MasterEquation {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        let n = self.d * self.d;
        let clock = y.len() - 1;
        let t = y[clock];
        dy[clock] = 1.0;
        let rho: Vec<c64> = (0..n).map(|k| c64::new(y[2 * k], y[2 * k + 1])).collect();
        let mut out = vec![ZERO; n];
        self.derivative(t, &rho, &mut out);
        for k in 0..n {
            dy[2 * k] = out[k].re;
            dy[2 * k + 1] = out[k].im;
        }
        if self.accumulate {
            for k in 0..2 * n {
                dy[2 * n + k] = y[k];
            }
        }
    }
}

fn pack(rho: MatRef<'_, c64>, len: usize) -> DVector<f64> {
    let d = rho.nrows();
    let mut y = DVector::zeros(len);
    for j in 0..d {
        for i in 0..d {
            let k = i + d * j;
            y[2 * k] = rho[(i, j)].re;
            y[2 * k + 1] = rho[(i, j)].im;
        }
    }
    y
}

fn unpack(y: &DVector<f64>, d: usize, offset: usize) -> CMat {
    Mat::from_fn(d, d, |i, j| {
        let k = i + d * j;
        c64::new(y[offset + 2 * k], y[offset + 2 * k + 1])
    })
}

/// Integrates the full master equation from `rho0` at `t0` to `t1`,
/// returning `samples + 1` equally spaced states including both ends.
pub fn propagate(
    parts: &LiouvilleParts,
    delta: f64,
    rho0: MatRef<'_, c64>,
    t0: f64,
    t1: f64,
    samples: usize,
    opts: &OracleOptions,
) -> Result<Trajectory> {
    let samples = samples.max(1);
    let times: Vec<f64> = (0..=samples)
        .map(|s| t0 + (t1 - t0) * s as f64 / samples as f64)
        .collect();
    let states = propagate_to(parts, delta, rho0, t0, &times, opts)?;
    Ok(Trajectory { times, states })
}

/// States at the nondecreasing sample `times` (all `≥ t0`) of the
/// trajectory starting from `rho0` at `t0`.
pub fn propagate_to(
    parts: &LiouvilleParts,
    delta: f64,
    rho0: MatRef<'_, c64>,
    t0: f64,
    times: &[f64],
    opts: &OracleOptions,
) -> Result<Vec<CMat>> {
    let d = parts.hilbert_dim();
    let mut y = pack(rho0, 2 * d * d);
    let mut now = t0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= now) {
            return Err(PcsError::InvalidParameter {
                name: "times",
                reason: "sample times must be nondecreasing and not precede the start".into(),
            });
        }
        y = integrate(parts, delta, false, now, t, y, opts)?;
        now = t;
        out.push(unpack(&y, d, 0));
    }
    Ok(out)
}

fn integrate(
    parts: &LiouvilleParts,
    delta: f64,
    accumulate: bool,
    t0: f64,
    t1: f64,
    y: DVector<f64>,
    opts: &OracleOptions,
) -> Result<DVector<f64>> {
    let eq = MasterEquation::new(parts, delta, accumulate);
    if t1 == t0 {
        return Ok(y);
    }
    // time is carried as the last state component
    let len = y.len();
    let y = DVector::from_fn(len + 1, |k, _| if k < len { y[k] } else { t0 });
    let mut stepper = Dop853::from_param(
        eq,
        t0,
        t1,
        t1 - t0,
        y,
        opts.rtol,
        opts.atol,
        0.9,
        0.0,
        0.333,
        6.0,
        t1 - t0,
        0.0,
        opts.max_steps,
        u32::MAX,
        OutputType::Sparse,
    );
    stepper
        .integrate()
        .map_err(|e| PcsError::IntegrationFailure(e.to_string()))?;
    let x_end = *stepper
        .x_out()
        .last()
        .ok_or_else(|| PcsError::IntegrationFailure("integrator produced no output".into()))?;
    if (x_end - t1).abs() > 1e-9 * t1.abs().max(1.0) {
        return Err(PcsError::IntegrationFailure(format!(
            "integration stopped at t = {x_end} before {t1}"
        )));
    }
    let y_end = stepper.y_out().last().expect("output checked above");
    Ok(DVector::from_fn(len, |k, _| y_end[k]))
}

/// Trajectory from `|0,g><0,g|` at `t = 0` to `t_final` with `samples`
/// equal intervals.
pub fn time_domain_oracle(
    parts: &LiouvilleParts,
    delta: f64,
    t_final: f64,
    samples: usize,
) -> Result<Trajectory> {
    let d = parts.hilbert_dim();
    let g0 = basis_index(0, Atom::Ground);
    let rho0 = Mat::from_fn(d, d, |i, j| if i == g0 && j == g0 { c64::new(1.0, 0.0) } else { ZERO });
    propagate(parts, delta, rho0.as_ref(), 0.0, t_final, samples, &OracleOptions::default())
}

/// Average of `rho(t)` over the first full beat period `2π/|δ|` that starts
/// after `settle` (rounded up to a whole number of periods), starting from
/// `|0,g><0,g|`. Without a scanning field the state at `settle` is returned.
pub fn cycle_average(parts: &LiouvilleParts, delta: f64, settle: f64, opts: &OracleOptions) -> Result<CMat> {
    let d = parts.hilbert_dim();
    let n = d * d;
    let g0 = basis_index(0, Atom::Ground);
    let rho0 = Mat::from_fn(d, d, |i, j| if i == g0 && j == g0 { c64::new(1.0, 0.0) } else { ZERO });
    if !parts.has_scan() {
        let y = integrate(parts, delta, false, 0.0, settle, pack(rho0.as_ref(), 2 * n), opts)?;
        return Ok(unpack(&y, d, 0));
    }
    let period = 2.0 * std::f64::consts::PI / delta.abs();
    let start = (settle / period).ceil() * period;
    let y = integrate(parts, delta, false, 0.0, start, pack(rho0.as_ref(), 2 * n), opts)?;
    let mut ya = DVector::zeros(4 * n);
    for k in 0..2 * n {
        ya[k] = y[k];
    }
    let y_end = integrate(parts, delta, true, start, start + period, ya, opts)?;
    let acc = unpack(&y_end, d, 2 * n);
    Ok(Mat::from_fn(d, d, |i, j| acc[(i, j)] / period))
}
