//! Two-time pair correlations by quantum regression.
//!
//! Under bichromatic drive the correlation depends on the beat phase at the
//! conditioning photodetection. The phase average is taken exactly: the
//! conditioned state is expanded in beat harmonics `Y_k` which obey the
//! time-independent system `Y_k' = (L0 − ikδ) Y_k + D+ Y_{k+1} + D− Y_{k−1}`,
//! and only `Y_0` survives the average. That system is diagonalized once, so
//! window integrals have closed forms.

use faer::{c64, Mat};

use crate::error::{PcsError, Result};
use crate::floquet::{propagate_to, solve_bloch, steady_state, BlochExpansion, OracleOptions};
use crate::hilbert::{Operators, SystemParams};
use crate::linalg::{dagger, expm, trace, vectorize, CMat, I};
use crate::liouville::{
    build_liouville_parts, EigenSystem, LiouvilleParts, RawEigen, SpectralMethod, Superoperator,
    TransitionMask,
};
use crate::quadrature::{integrate, partition, QuadOptions};
use crate::spectral::ExponentialSeries;

#[derive(Debug, Clone)]
enum Repr {
    Series(ExponentialSeries),
    Dense {
        generator: CMat,
        w: CMat,
        y: CMat,
        scale: f64,
    },
}

/// Phase-averaged `(2κ)² <:n(t0) n(t0 + t):>` as a function of the lag `t`.
#[derive(Debug, Clone)]
pub struct PairCorrelator {
    repr: Repr,
    zero_lag: f64,
}

impl PairCorrelator {
    /// Correlator of a time-independent generator with stationary state `rho`.
    pub fn stationary(generator: &Superoperator, rho: &CMat, ops: &Operators, kappa: f64) -> Result<Self> {
        let y = vectorize(conditioned(ops, rho).as_ref());
        let w = vectorize(ops.number.transpose());
        Self::build(generator.matrix().to_owned(), w, y, 4.0 * kappa * kappa, None)
    }

    /// Correlator of the bichromatic problem keeping `harmonics` beat
    /// harmonics on each side of the conditioned state.
    pub fn bichromatic(parts: &LiouvilleParts, bloch: &BlochExpansion, harmonics: usize) -> Result<Self> {
        Self::bichromatic_with(parts, bloch, harmonics, None)
    }

    /// As [`PairCorrelator::bichromatic`] but with the evaluation method
    /// forced, e.g. to cross-check the eigen-expansion.
    pub fn bichromatic_with(
        parts: &LiouvilleParts,
        bloch: &BlochExpansion,
        harmonics: usize,
        method: Option<SpectralMethod>,
    ) -> Result<Self> {
        let ops = parts.operators();
        let kappa = parts.params().kappa;
        if !parts.has_scan() {
            let y = vectorize(conditioned(ops, bloch.rho0()).as_ref());
            let w = vectorize(ops.number.transpose());
            return Self::build(parts.l0.matrix().to_owned(), w, y, 4.0 * kappa * kappa, method);
        }
        if harmonics < 1 {
            return Err(PcsError::InvalidTruncation("at least one beat harmonic is required".into()));
        }
        let k_max = harmonics as i64;
        let n = parts.dim();
        let blocks = 2 * harmonics + 1;
        let delta = bloch.delta();
        let l0 = parts.l0.matrix();
        let dplus = parts.dplus.matrix();
        let dminus = parts.dminus.matrix();
        let mut a = Mat::<c64>::zeros(blocks * n, blocks * n);
        for b in 0..blocks {
            let k = b as i64 - k_max;
            let shift = I * (k as f64 * delta);
            for j in 0..n {
                for i in 0..n {
                    a[(b * n + i, b * n + j)] = l0[(i, j)];
                }
                a[(b * n + j, b * n + j)] -= shift;
            }
            if b + 1 < blocks {
                for j in 0..n {
                    for i in 0..n {
                        a[(b * n + i, (b + 1) * n + j)] = dplus[(i, j)];
                        a[((b + 1) * n + i, b * n + j)] = dminus[(i, j)];
                    }
                }
            }
        }
        let mut y = Mat::<c64>::zeros(blocks * n, 1);
        for b in 0..blocks {
            let k = b as i64 - k_max;
            if let Some(rk) = bloch.component_ref(k) {
                let v = vectorize(conditioned(ops, rk).as_ref());
                for i in 0..n {
                    y[(b * n + i, 0)] = v[(i, 0)];
                }
            }
        }
        let mut w = Mat::<c64>::zeros(blocks * n, 1);
        let wn = vectorize(ops.number.transpose());
        for i in 0..n {
            w[(harmonics * n + i, 0)] = wn[(i, 0)];
        }
        Self::build(a, w, y, 4.0 * kappa * kappa, method)
    }

    fn build(generator: CMat, w: CMat, y: CMat, scale: f64, method: Option<SpectralMethod>) -> Result<Self> {
        let zero_lag = scale * (w.transpose() * &y)[(0, 0)].re;
        if method != Some(SpectralMethod::ExponentialFallback) {
            let raw = RawEigen::new(generator.as_ref())?;
            let (series, amp) = ExponentialSeries::from_eigen(&raw, w.as_ref(), y.as_ref(), scale);
            let ok = amp < EigenSystem::MAX_AMPLIFICATION && raw.residual < 1e-8;
            if ok || method == Some(SpectralMethod::Diagonalization) {
                return Ok(Self {
                    repr: Repr::Series(series),
                    zero_lag,
                });
            }
        }
        Ok(Self {
            repr: Repr::Dense {
                generator,
                w,
                y,
                scale,
            },
            zero_lag,
        })
    }

    pub fn method(&self) -> SpectralMethod {
        match self.repr {
            Repr::Series(_) => SpectralMethod::Diagonalization,
            Repr::Dense { .. } => SpectralMethod::ExponentialFallback,
        }
    }

    /// The exponential-sum form, when the eigen-expansion is used.
    pub fn series(&self) -> Option<&ExponentialSeries> {
        match &self.repr {
            Repr::Series(s) => Some(s),
            Repr::Dense { .. } => None,
        }
    }

    /// Correlation at lag zero, `(2κ)² <:n²:>`.
    pub fn zero_lag(&self) -> f64 {
        self.zero_lag
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.repr {
            Repr::Series(s) => s.value(t).re,
            Repr::Dense { generator, w, y, scale } => {
                let at = Mat::from_fn(generator.nrows(), generator.ncols(), |i, j| generator[(i, j)] * t);
                let v = &expm(at.as_ref()) * y;
                *scale * (w.transpose() * &v)[(0, 0)].re
            }
        }
    }

    /// `(1/τ) ∫_0^τ G`.
    pub fn window_average(&self, tau: f64) -> f64 {
        match &self.repr {
            Repr::Series(s) => s.window_average(tau).re,
            Repr::Dense { generator, w, y, scale } => *scale * van_loan(generator, w, y, tau, 1) / tau,
        }
    }

    /// `(2/τ²) ∫_0^τ du ∫_0^u G`.
    pub fn nested_average(&self, tau: f64) -> f64 {
        match &self.repr {
            Repr::Series(s) => s.nested_average(tau).re,
            Repr::Dense { generator, w, y, scale } => 2.0 * *scale * van_loan(generator, w, y, tau, 2) / (tau * tau),
        }
    }
}

/// `w^T ∫_0^τ e^{As} y ds` (order 1) or `w^T ∫_0^τ (τ − s) e^{As} y ds`
/// (order 2) from one augmented matrix exponential.
fn van_loan(a: &CMat, w: &CMat, y: &CMat, tau: f64, order: usize) -> f64 {
    let n = a.nrows();
    let m = n + order;
    let mut big = Mat::<c64>::zeros(m, m);
    for j in 0..n {
        for i in 0..n {
            big[(i, j)] = a[(i, j)] * tau;
        }
        big[(j, n)] = y[(j, 0)] * tau;
    }
    if order == 2 {
        big[(n, n + 1)] = c64::new(tau, 0.0);
    }
    let e = expm(big.as_ref());
    let col = n + order - 1;
    let mut acc = c64::new(0.0, 0.0);
    for i in 0..n {
        acc += w[(i, 0)] * e[(i, col)];
    }
    acc.re
}

/// `a rho a†`.
fn conditioned(ops: &Operators, rho: &CMat) -> CMat {
    &(&ops.a * rho) * dagger(ops.a.as_ref())
}

/// Pair correlator with and without the pump; the difference is the
/// background-subtracted two-time rate.
#[derive(Debug, Clone)]
pub struct DifferenceCorrelator {
    pub full: PairCorrelator,
    /// `None` when the pump is off and the two problems coincide.
    pub background: Option<PairCorrelator>,
}

impl DifferenceCorrelator {
    pub fn new(params: &SystemParams, mask: &TransitionMask) -> Result<Self> {
        let parts = build_liouville_parts(params, mask)?;
        let bloch = solve_bloch(&parts, params.delta(), params.m_max)?;
        let full = PairCorrelator::bichromatic(&parts, &bloch, params.m_max)?;
        if params.drive1 == 0.0 {
            return Ok(Self { full, background: None });
        }
        Ok(Self {
            full,
            background: Some(scan_only_correlator(&parts)?),
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.background {
            Some(b) => self.full.value(t) - b.value(t),
            None => 0.0,
        }
    }

    pub fn zero_lag(&self) -> f64 {
        match &self.background {
            Some(b) => self.full.zero_lag() - b.zero_lag(),
            None => 0.0,
        }
    }

    /// Closed-form conditional rate.
    pub fn conditional(&self, tau: f64) -> f64 {
        match &self.background {
            Some(b) => self.full.window_average(tau) - b.window_average(tau),
            None => 0.0,
        }
    }

    /// Closed-form unconditional rate.
    pub fn unconditional(&self, tau: f64) -> f64 {
        match &self.background {
            Some(b) => self.full.nested_average(tau) - b.nested_average(tau),
            None => 0.0,
        }
    }

    /// `(1/τ) ∫_0^τ Δ(t) dt` by adaptive quadrature.
    pub fn conditional_quadrature(&self, tau: f64, opts: &QuadOptions) -> Result<f64> {
        check_window(tau)?;
        Ok(integrate(|t| self.value(t), 0.0, tau, opts)?.value / tau)
    }

    /// `(2/τ²) ∫_0^τ du ∫_0^u Δ(ς) dς` by nested adaptive quadrature. The
    /// inner integral reuses the converged panels of `∫_0^τ Δ` below `u`
    /// and integrates only the panel containing `u` afresh.
    pub fn unconditional_nested_quadrature(&self, tau: f64, opts: &QuadOptions) -> Result<f64> {
        check_window(tau)?;
        let inner_opts = tighter(opts);
        let (_, panels) = partition(|s| self.value(s), 0.0, tau, &inner_opts)?;
        let mut below = Vec::with_capacity(panels.len());
        let mut acc = 0.0;
        for p in &panels {
            below.push(acc);
            acc += p.2;
        }
        let mut failure = None;
        let outer = integrate(
            |u| {
                let k = panels.partition_point(|p| p.1 <= u).min(panels.len() - 1);
                match integrate(|s| self.value(s), panels[k].0, u, &inner_opts) {
                    Ok(r) => below[k] + r.value,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            0.0,
            tau,
            opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(2.0 * outer?.value / (tau * tau))
    }

    /// `(2/τ²) ∫_0^τ dt' ∫_0^{t'} dt Δ(t' − t)`, the pair count before the
    /// change of variables.
    pub fn unconditional_double_quadrature(&self, tau: f64, opts: &QuadOptions) -> Result<f64> {
        check_window(tau)?;
        let inner_opts = tighter(opts);
        let mut failure = None;
        let outer = integrate(
            |tp| match integrate(|t| self.value(tp - t), 0.0, tp, &inner_opts) {
                Ok(r) => r.value,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            0.0,
            tau,
            opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(2.0 * outer?.value / (tau * tau))
    }
}

fn tighter(opts: &QuadOptions) -> QuadOptions {
    QuadOptions {
        abs_tol: opts.abs_tol * 1e-2,
        rel_tol: opts.rel_tol * 1e-2,
        max_intervals: opts.max_intervals,
    }
}

fn check_window(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(PcsError::InvalidParameter {
            name: "tau_w",
            reason: format!("window time must be positive and finite, got {tau}"),
        })
    }
}

/// Correlator of the scan-only problem in the scan frame, where it is
/// time-independent.
pub(crate) fn scan_only_correlator(parts: &LiouvilleParts) -> Result<PairCorrelator> {
    let gen = parts.scan_frame_generator();
    let rho = steady_state(&gen)?;
    PairCorrelator::stationary(&gen, &rho, parts.operators(), parts.params().kappa)
}

/// Phase-averaged `(2κ)² <:n(t0) n(t0 + t):>` in the long-time limit.
pub fn two_time_pair_correlation(params: &SystemParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(PcsError::InvalidParameter {
            name: "t",
            reason: format!("lag must be nonnegative, got {t}"),
        });
    }
    let parts = build_liouville_parts(params, &TransitionMask::new())?;
    let bloch = solve_bloch(&parts, params.delta(), params.m_max)?;
    Ok(PairCorrelator::bichromatic(&parts, &bloch, params.m_max)?.value(t))
}

/// Conditional difference rate `(1/τ) ∫_0^τ Δ(t) dt` by adaptive quadrature.
pub fn conditional_rate(params: &SystemParams, tau_w: f64) -> Result<f64> {
    conditional_rate_with(params, tau_w, &QuadOptions::default())
}

pub fn conditional_rate_with(params: &SystemParams, tau_w: f64, opts: &QuadOptions) -> Result<f64> {
    check_window(tau_w)?;
    DifferenceCorrelator::new(params, &TransitionMask::new())?.conditional_quadrature(tau_w, opts)
}

/// Unconditional difference rate from the nested single-variable form.
pub fn unconditional_rate(params: &SystemParams, tau_w: f64) -> Result<f64> {
    unconditional_rate_with(params, tau_w, &QuadOptions::default())
}

pub fn unconditional_rate_with(params: &SystemParams, tau_w: f64, opts: &QuadOptions) -> Result<f64> {
    check_window(tau_w)?;
    DifferenceCorrelator::new(params, &TransitionMask::new())?.unconditional_nested_quadrature(tau_w, opts)
}

/// Unconditional difference rate from the raw double integral over both
/// detection times.
pub fn unconditional_rate_direct(params: &SystemParams, tau_w: f64, opts: &QuadOptions) -> Result<f64> {
    check_window(tau_w)?;
    DifferenceCorrelator::new(params, &TransitionMask::new())?.unconditional_double_quadrature(tau_w, opts)
}

/// Phase-averaged pair correlation by direct time integration from
/// `phases` equally spaced conditioning times within one beat period.
/// `lags` must be nondecreasing.
pub fn phase_sampled_correlation(
    parts: &LiouvilleParts,
    bloch: &BlochExpansion,
    lags: &[f64],
    phases: usize,
    opts: &OracleOptions,
) -> Result<Vec<f64>> {
    let ops = parts.operators();
    let kappa = parts.params().kappa;
    let delta = bloch.delta();
    let phases = if parts.has_scan() { phases.max(1) } else { 1 };
    let period = if parts.has_scan() { 2.0 * std::f64::consts::PI / delta.abs() } else { 0.0 };
    let mut acc = vec![0.0; lags.len()];
    for j in 0..phases {
        let t0 = period * j as f64 / phases as f64;
        let x0 = conditioned(ops, &bloch.evaluate(t0));
        let times: Vec<f64> = lags.iter().map(|l| t0 + l).collect();
        let states = propagate_to(parts, delta, x0.as_ref(), t0, &times, opts)?;
        for (a, s) in acc.iter_mut().zip(&states) {
            let v = trace((&ops.number * s).as_ref()).re;
            *a += 4.0 * kappa * kappa * v / phases as f64;
        }
    }
    Ok(acc)
}
