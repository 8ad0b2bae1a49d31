//! Normally ordered photon count rates, multi-photon rates, background
//! subtraction and windowed two-photon rates.

mod regression;

pub use regression::{
    conditional_rate, conditional_rate_with, phase_sampled_correlation, two_time_pair_correlation,
    unconditional_rate, unconditional_rate_direct, unconditional_rate_with, DifferenceCorrelator,
    PairCorrelator,
};

use std::collections::BTreeMap;

use faer::{c64, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{PcsError, Result};
use crate::floquet::{solve_bloch, steady_state};
use crate::hilbert::{make_operators, Operators, SystemParams};
use crate::linalg::{dagger, trace, CMat};
use crate::liouville::{build_liouville_parts, LiouvilleParts, TransitionMask};

/// Diagnostic attached to a rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFlag {
    /// A requested term vanishes identically for a two-level atom.
    DegenerateTerm,
    /// The photon number requested exceeds the Fock truncation.
    TruncationSupport,
}

/// A count rate with an optional breakdown.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub value: f64,
    pub components: BTreeMap<String, f64>,
    pub flags: Vec<RateFlag>,
}

impl RateResult {
    fn flag(&mut self, f: RateFlag) {
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }

    /// Component-wise `self − other`.
    pub fn minus(&self, other: &RateResult) -> RateResult {
        let mut components = self.components.clone();
        for (k, v) in &other.components {
            *components.entry(k.clone()).or_insert(0.0) -= v;
        }
        let mut flags = self.flags.clone();
        for f in &other.flags {
            if !flags.contains(f) {
                flags.push(*f);
            }
        }
        RateResult {
            value: self.value - other.value,
            components,
            flags,
        }
    }
}

/// Value of `<σ+^m a†^k a^k σ−^m>` with a flag for identically vanishing terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub value: f64,
    pub degenerate: bool,
}

/// `<σ+^m a†^k a^k σ−^m> = Tr(a^k σ−^m rho σ+^m a†^k)`.
pub fn normal_ordered_moment(rho: MatRef<'_, c64>, k: usize, m: usize) -> Result<Moment> {
    let d = rho.nrows();
    if d < 6 || d % 2 != 0 || rho.ncols() != d {
        return Err(PcsError::InvalidTruncation(format!(
            "density matrix of dimension {d} does not match a truncated atom-cavity space"
        )));
    }
    let ops = make_operators(d / 2 - 1)?;
    Ok(moment_with(&ops, rho, k, m))
}

pub(crate) fn moment_with(ops: &Operators, rho: MatRef<'_, c64>, k: usize, m: usize) -> Moment {
    if m >= 2 {
        return Moment {
            value: 0.0,
            degenerate: true,
        };
    }
    let mut b = if m == 1 { ops.sigma_minus.clone() } else { crate::linalg::identity(ops.dim()) };
    for _ in 0..k {
        b = &ops.a * &b;
    }
    let x = &(&b * rho) * dagger(b.as_ref());
    Moment {
        value: trace(x.as_ref()).re,
        degenerate: false,
    }
}

/// Binary vector of the multi-time expansion; `α = (2κ)^{ℓ−K} γ^K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KVector {
    entries: Vec<u8>,
}

impl KVector {
    pub fn new(entries: Vec<u8>) -> Result<Self> {
        if entries.iter().any(|&e| e > 1) {
            return Err(PcsError::InvalidParameter {
                name: "kvector",
                reason: "entries must be 0 or 1".into(),
            });
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    /// Photon order `ℓ = len + 2`.
    pub fn ell(&self) -> usize {
        self.entries.len() + 2
    }

    /// Number of atomic-decay slots `K = Σ k_i`.
    pub fn weight(&self) -> usize {
        self.entries.iter().map(|&e| e as usize).sum()
    }

    /// All `2^{ℓ−2}` vectors of order `ℓ`.
    pub fn all(ell: usize) -> Vec<KVector> {
        assert!(ell >= 2, "order must be at least 2");
        let len = ell - 2;
        (0..1usize << len)
            .map(|bits| KVector {
                entries: (0..len).map(|i| ((bits >> i) & 1) as u8).collect(),
            })
            .collect()
    }
}

/// `(2κ)^{ℓ−K} γ^K`.
pub fn alpha_coefficient(kvec: &KVector, params: &SystemParams) -> f64 {
    let k = kvec.weight() as i32;
    (2.0 * params.kappa).powi(kvec.ell() as i32 - k) * params.gamma.powi(k)
}

/// Coefficients of the compact multi-time expansion grouped by `K`:
/// entry `K` is `(number of vectors with weight K, α for that weight)`.
pub fn alpha_by_weight(ell: usize, params: &SystemParams) -> Vec<(usize, f64)> {
    let mut out = vec![(0usize, 0.0f64); ell - 1];
    for kv in KVector::all(ell) {
        let k = kv.weight();
        out[k].0 += 1;
        out[k].1 = alpha_coefficient(&kv, params);
    }
    out
}

/// Rate `Σ_m (2κ)^{ℓ−m} γ^m <σ+^m a†^{ℓ−m} a^{ℓ−m} σ−^m>` on a given state.
pub fn w_multi_on(ell: usize, rho: MatRef<'_, c64>, params: &SystemParams, ops: &Operators) -> Result<RateResult> {
    if ell < 2 {
        return Err(PcsError::InvalidParameter {
            name: "ell",
            reason: "photon order must be at least 2".into(),
        });
    }
    let mut out = RateResult::default();
    if ell > ops.n_max {
        out.flag(RateFlag::TruncationSupport);
    }
    for m in 0..=ell - 2 {
        let mo = moment_with(ops, rho, ell - m, m);
        if mo.degenerate {
            out.flag(RateFlag::DegenerateTerm);
            continue;
        }
        let term = (2.0 * params.kappa).powi((ell - m) as i32) * params.gamma.powi(m as i32) * mo.value;
        out.components.insert(component_name(ell - m, m), term);
        out.value += term;
    }
    Ok(out)
}

/// Key of a moment term, e.g. `a3` for `<a†³a³>` and `s_a2` for
/// `<σ+ a†² a² σ−>`.
pub fn component_name(k: usize, m: usize) -> String {
    match m {
        0 => format!("a{k}"),
        1 => format!("s_a{k}"),
        _ => format!("s{m}_a{k}"),
    }
}

/// Cycle-averaged state of the bichromatic problem.
pub fn bichromatic_state(params: &SystemParams, mask: &TransitionMask) -> Result<(LiouvilleParts, CMat)> {
    let parts = build_liouville_parts(params, mask)?;
    let b = solve_bloch(&parts, params.delta(), params.m_max)?;
    let rho = b.rho0().clone();
    Ok((parts, rho))
}

/// Steady state with the pump switched off, solved exactly in the frame of
/// the scanning field.
pub fn scan_only_state(parts: &LiouvilleParts) -> Result<CMat> {
    steady_state(&parts.scan_frame_generator())
}

/// `(2κ)² <:n²:>` on the cycle-averaged state.
pub fn w_pair(params: &SystemParams) -> Result<RateResult> {
    w_multi(2, params)
}

/// Multi-photon rate of order `ell` on the cycle-averaged state.
pub fn w_multi(ell: usize, params: &SystemParams) -> Result<RateResult> {
    let (parts, rho) = bichromatic_state(params, &TransitionMask::new())?;
    w_multi_on(ell, rho.as_ref(), params, parts.operators())
}

/// Background-subtracted rate: full rate minus the rate with the pump off.
pub fn difference_rate(ell: usize, params: &SystemParams) -> Result<RateResult> {
    difference_rate_masked(ell, params, &TransitionMask::new())
}

pub fn difference_rate_masked(ell: usize, params: &SystemParams, mask: &TransitionMask) -> Result<RateResult> {
    if params.drive1 == 0.0 {
        let (parts, rho) = bichromatic_state(params, mask)?;
        let w = w_multi_on(ell, rho.as_ref(), params, parts.operators())?;
        return Ok(w.minus(&w));
    }
    let (parts, rho) = bichromatic_state(params, mask)?;
    let full = w_multi_on(ell, rho.as_ref(), params, parts.operators())?;
    let bg = scan_only_state(&parts)?;
    let sub = w_multi_on(ell, bg.as_ref(), params, parts.operators())?;
    Ok(full.minus(&sub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{basis_index, Atom};
    use faer::Mat;

    fn fock(n_max: usize, n: usize, atom: Atom) -> CMat {
        let d = 2 * (n_max + 1);
        let k = basis_index(n, atom);
        Mat::from_fn(d, d, |i, j| if i == k && j == k { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
    }

    #[test]
    fn vacuum_and_fock_moments() {
        let vac = fock(4, 0, Atom::Ground);
        for k in 1..4 {
            assert_eq!(normal_ordered_moment(vac.as_ref(), k, 0).unwrap().value, 0.0);
        }
        let two = fock(4, 2, Atom::Ground);
        assert!((normal_ordered_moment(two.as_ref(), 2, 0).unwrap().value - 2.0).abs() < 1e-14);
        let m2 = normal_ordered_moment(two.as_ref(), 1, 2).unwrap();
        assert_eq!(m2.value, 0.0);
        assert!(m2.degenerate);
    }

    #[test]
    fn excited_moment() {
        let rho = fock(4, 3, Atom::Excited);
        // <σ+ a†² a² σ−> on |3,e> = 3·2
        assert!((normal_ordered_moment(rho.as_ref(), 2, 1).unwrap().value - 6.0).abs() < 1e-13);
    }

    #[test]
    fn kvector_alpha() {
        let p = SystemParams::new(9.0, 2.0, 0.0, 0.0, 0.0);
        let k = KVector::new(vec![0, 1]).unwrap();
        assert_eq!(alpha_coefficient(&k, &p), 8.0 * 2.0);
        assert!(KVector::new(vec![2]).is_err());
        assert_eq!(KVector::all(5).len(), 8);
    }

    #[test]
    fn zero_drive_rates_vanish() {
        let p = SystemParams::new(9.0, 2.0, 0.0, 0.0, 1.0).with_truncation(4, 1);
        for ell in 2..=4 {
            assert!(w_multi(ell, &p).unwrap().value.abs() < 1e-15);
        }
    }

    #[test]
    fn difference_without_pump_is_exactly_zero() {
        let p = SystemParams::new(9.0, 2.0, 0.0, 0.5, 1.3).with_truncation(4, 2);
        let d = difference_rate(3, &p).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.components.values().all(|&v| v == 0.0));
    }
}
