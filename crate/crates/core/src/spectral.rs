//! Exponential sums `f(t) = Σ c_n exp(−λ_n t)` and their window averages.

use faer::{c64, Mat, MatRef};

use crate::liouville::RawEigen;

/// Eigenvalues closer than this are merged into one term.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Below this `|μ|` the window kernels are evaluated from their power series.
const SERIES_RADIUS: f64 = 0.5;

/// `(1 − e^{−μ})/μ`.
pub fn window_kernel(mu: c64) -> c64 {
    if mu.norm() < SERIES_RADIUS {
        series(mu, 1)
    } else {
        (c64::new(1.0, 0.0) - (-mu).exp()) / mu
    }
}

/// `[(e^{−μ} − 1)/μ + 1]/μ`.
pub fn nested_kernel(mu: c64) -> c64 {
    if mu.norm() < SERIES_RADIUS {
        series(mu, 2)
    } else {
        (((-mu).exp() - 1.0) / mu + 1.0) / mu
    }
}

/// `Σ_k (−μ)^k / (k + shift)!`.
fn series(mu: c64, shift: u32) -> c64 {
    let mut fact: f64 = (1..=shift).map(f64::from).product();
    let mut term = c64::new(1.0 / fact, 0.0);
    let mut sum = term;
    for k in 1..30u32 {
        fact = f64::from(k + shift);
        term = term * (-mu) / fact;
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

/// A finite exponential sum with pairwise-distinct rates.
#[derive(Debug, Clone, Default)]
pub struct ExponentialSeries {
    terms: Vec<(c64, c64)>,
}

impl ExponentialSeries {
    /// Builds the series from `(coefficient, rate)` pairs, merging rates
    /// closer than [`DEGENERACY_TOL`].
    pub fn new(pairs: impl IntoIterator<Item = (c64, c64)>) -> Self {
        let mut raw: Vec<(c64, c64)> = pairs.into_iter().collect();
        raw.sort_by(|x, y| x.1.re.total_cmp(&y.1.re).then(x.1.im.total_cmp(&y.1.im)));
        let mut terms: Vec<(c64, c64)> = Vec::with_capacity(raw.len());
        let mut used = vec![false; raw.len()];
        for i in 0..raw.len() {
            if used[i] {
                continue;
            }
            let (mut c, lam) = raw[i];
            used[i] = true;
            for j in i + 1..raw.len() {
                if raw[j].1.re - lam.re > DEGENERACY_TOL {
                    break;
                }
                if !used[j] && (raw[j].1 - lam).norm() < DEGENERACY_TOL {
                    c += raw[j].0;
                    used[j] = true;
                }
            }
            terms.push((c, lam));
        }
        Self { terms }
    }

    /// Expansion of `w^T exp(−Λ t) y` over the eigenvectors of `raw`,
    /// scaled by `scale`; returns the series and the expansion amplification.
    pub(crate) fn from_eigen(raw: &RawEigen, w: MatRef<'_, c64>, y: MatRef<'_, c64>, scale: f64) -> (Self, f64) {
        let (c, amp) = raw.expand(y);
        let n = raw.dim();
        let proj: Mat<c64> = w.transpose() * &raw.vectors;
        let pairs = (0..n).map(|k| (proj[(0, k)] * c[(k, 0)] * scale, raw.lambdas[k]));
        (Self::new(pairs), amp)
    }

    pub fn terms(&self) -> &[(c64, c64)] {
        &self.terms
    }

    pub fn value(&self, t: f64) -> c64 {
        self.terms.iter().map(|&(c, l)| c * (-l * t).exp()).sum()
    }

    /// Sum of all coefficients, the value at `t = 0`.
    pub fn zero_lag(&self) -> c64 {
        self.terms.iter().map(|&(c, _)| c).sum()
    }

    /// Sum of the coefficients of non-decaying, non-oscillating terms.
    pub fn stationary(&self) -> c64 {
        self.terms
            .iter()
            .filter(|(_, l)| l.norm() < DEGENERACY_TOL)
            .map(|&(c, _)| c)
            .sum()
    }

    /// `(1/τ) ∫_0^τ f`.
    pub fn window_average(&self, tau: f64) -> c64 {
        self.terms.iter().map(|&(c, l)| c * window_kernel(l * tau)).sum()
    }

    /// `(2/τ²) ∫_0^τ du ∫_0^u f`.
    pub fn nested_average(&self, tau: f64) -> c64 {
        self.terms.iter().map(|&(c, l)| c * nested_kernel(l * tau) * 2.0).sum()
    }

    /// `a · self + b · other`, term lists concatenated and regrouped.
    pub fn combine(&self, a: f64, other: &ExponentialSeries, b: f64) -> ExponentialSeries {
        let left = self.terms.iter().map(|&(c, l)| (c * a, l));
        let right = other.terms.iter().map(|&(c, l)| (c * b, l));
        ExponentialSeries::new(left.chain(right))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_are_continuous_across_series_radius() {
        for &(re, im) in &[(0.4999, 0.0), (0.5001, 0.0), (0.3, 0.39), (0.3, 0.41), (-0.2, 0.46)] {
            let mu = c64::new(re, im);
            let direct1 = (c64::new(1.0, 0.0) - (-mu).exp()) / mu;
            let direct2 = (((-mu).exp() - 1.0) / mu + 1.0) / mu;
            assert!((series(mu, 1) - direct1).norm() < 1e-14);
            assert!((series(mu, 2) - direct2).norm() < 1e-13);
        }
    }

    #[test]
    fn small_argument_limits() {
        assert!((window_kernel(c64::new(1e-12, 0.0)) - 1.0).norm() < 1e-12);
        assert!((nested_kernel(c64::new(1e-12, 0.0)) - 0.5).norm() < 1e-12);
    }

    #[test]
    fn degenerate_rates_are_merged() {
        let s = ExponentialSeries::new([
            (c64::new(1.0, 0.0), c64::new(2.0, 1.0)),
            (c64::new(0.5, 0.0), c64::new(2.0 + 1e-11, 1.0)),
            (c64::new(1.0, 0.0), c64::new(0.0, 0.0)),
        ]);
        assert_eq!(s.terms().len(), 2);
        assert!((s.zero_lag() - c64::new(2.5, 0.0)).norm() < 1e-15);
        assert!((s.stationary() - c64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn window_averages_of_single_exponential() {
        let s = ExponentialSeries::new([(c64::new(2.0, 0.0), c64::new(3.0, 0.0))]);
        let tau: f64 = 0.7;
        let con = 2.0 * (1.0 - (-3.0 * tau).exp()) / (3.0 * tau);
        assert!((s.window_average(tau).re - con).abs() < 1e-15);
        // (2/τ²)∫_0^τ du (2/3)(1 − e^{−3u})
        let unc = 2.0 / (tau * tau) * (2.0 / 3.0) * (tau - (1.0 - (-3.0 * tau).exp()) / 3.0);
        assert!((s.nested_average(tau).re - unc).abs() < 1e-14);
    }
}
