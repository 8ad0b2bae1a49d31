//! Long-time Floquet expansion of the bichromatically driven density matrix,
//! the time-independent steady state and truncation convergence checks.

mod oracle;

pub use oracle::{cycle_average, propagate, propagate_to, time_domain_oracle, OracleOptions, Trajectory};

use faer::prelude::*;
use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{PcsError, Result};
use crate::hilbert::SystemParams;
use crate::linalg::{dagger, frobenius, trace, transpose_index, unvectorize, CMat, ONE};
use crate::liouville::{build_liouville_parts, LiouvilleParts, Superoperator, TransitionMask};

/// Fourier components `rho_m`, `−M ≤ m ≤ M`, of the long-time density matrix
/// `rho(t) = Σ rho_m exp(i m δ t)`.
#[derive(Debug, Clone)]
pub struct BlochExpansion {
    components: Vec<CMat>,
    m_max: usize,
    delta: f64,
}

impl BlochExpansion {
    /// A time-independent state.
    pub fn stationary(rho: CMat, m_max: usize, delta: f64) -> Self {
        let d = rho.nrows();
        let mut components = vec![Mat::zeros(d, d); 2 * m_max + 1];
        components[m_max] = rho;
        Self {
            components,
            m_max,
            delta,
        }
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn hilbert_dim(&self) -> usize {
        self.components[0].nrows()
    }

    /// Component `rho_m`; zero outside the retained range.
    pub fn component(&self, m: i64) -> CMat {
        let d = self.hilbert_dim();
        if m.unsigned_abs() as usize > self.m_max {
            return Mat::zeros(d, d);
        }
        self.components[(m + self.m_max as i64) as usize].clone()
    }

    pub fn component_ref(&self, m: i64) -> Option<&CMat> {
        if m.unsigned_abs() as usize > self.m_max {
            None
        } else {
            Some(&self.components[(m + self.m_max as i64) as usize])
        }
    }

    /// Cycle-averaged state `rho_0`.
    pub fn rho0(&self) -> &CMat {
        &self.components[self.m_max]
    }

    /// `rho(t) = Σ rho_m exp(i m δ t)`.
    pub fn evaluate(&self, t: f64) -> CMat {
        let d = self.hilbert_dim();
        let mut out = Mat::zeros(d, d);
        for m in -(self.m_max as i64)..=(self.m_max as i64) {
            let ph = c64::new(0.0, m as f64 * self.delta * t).exp();
            let c = &self.components[(m + self.m_max as i64) as usize];
            for j in 0..d {
                for i in 0..d {
                    out[(i, j)] += ph * c[(i, j)];
                }
            }
        }
        out
    }

    /// Largest per-component residual of the harmonic-balance equations
    /// `(L0 − imδ) rho_m + D+ rho_{m+1} + D− rho_{m−1} = 0`.
    pub fn residual(&self, parts: &LiouvilleParts) -> f64 {
        let m_max = self.m_max as i64;
        let mut worst = 0.0f64;
        for m in -m_max..=m_max {
            let rm = self.component(m);
            let mut r = parts.l0.apply(rm.as_ref());
            let shift = c64::new(0.0, m as f64 * self.delta);
            for j in 0..r.ncols() {
                for i in 0..r.nrows() {
                    r[(i, j)] -= shift * rm[(i, j)];
                }
            }
            if parts.has_scan() {
                r = &r + &parts.dplus.apply(self.component(m + 1).as_ref());
                r = &r + &parts.dminus.apply(self.component(m - 1).as_ref());
            }
            worst = worst.max(frobenius(r.as_ref()));
        }
        worst
    }
}

fn singularity_check(lu: &faer::linalg::solvers::PartialPivLu<c64>, what: &str) -> Result<()> {
    let u = lu.U();
    let n = u.nrows();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..n {
        let v = u[(k, k)].norm();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo > 1e-14 * hi) || !hi.is_finite() {
        return Err(PcsError::NumericalSingularity(format!(
            "{what}: pivot ratio {:e}",
            lo / hi
        )));
    }
    Ok(())
}

/// Solves `M x = b` and rejects numerically singular `M`.
fn checked_solve(m: MatRef<'_, c64>, b: MatRef<'_, c64>, what: &str) -> Result<CMat> {
    let lu = m.partial_piv_lu();
    singularity_check(&lu, what)?;
    let x = lu.solve(b);
    if x.as_ref().has_nan() || !x.as_ref().is_all_finite() {
        return Err(PcsError::NumericalSingularity(format!("{what}: non-finite solution")));
    }
    Ok(x)
}

/// Unit-trace null vector of a time-independent generator.
pub fn steady_state(l0: &Superoperator) -> Result<CMat> {
    let n = l0.dim();
    let d = l0.hilbert_dim();
    let mut k = l0.matrix().to_owned();
    replace_with_trace_row(&mut k, d);
    let mut rhs = Mat::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    let lu = k.partial_piv_lu();
    singularity_check(&lu, "steady state").map_err(|_| {
        PcsError::Degenerate("stationary null space is not one-dimensional".into())
    })?;
    let x = lu.solve(&rhs);
    Ok(unvectorize(x.as_ref(), d))
}

fn replace_with_trace_row(k: &mut CMat, d: usize) {
    for c in 0..k.ncols() {
        k[(0, c)] = c64::new(0.0, 0.0);
    }
    for i in 0..d {
        k[(0, i + d * i)] = ONE;
    }
}

/// Matrix `Q` with `vec(X†) = Q conj(vec X)` composed around `conj(R)`:
/// returns `P conj(R) P` where `P` is the vec-transpose permutation.
fn conjugate_transfer(r: &CMat, d: usize) -> CMat {
    let n = r.nrows();
    Mat::from_fn(n, n, |i, j| r[(transpose_index(i, d), transpose_index(j, d))].conj())
}

/// Solves the truncated harmonic-balance equations by matrix continued
/// fractions, closing the zeroth block with `Tr rho_0 = 1`.
pub fn solve_bloch(parts: &LiouvilleParts, delta: f64, m_max: usize) -> Result<BlochExpansion> {
    if m_max < 1 {
        return Err(PcsError::InvalidTruncation("m_max must be at least 1".into()));
    }
    if !parts.has_scan() {
        return Ok(BlochExpansion::stationary(steady_state(&parts.l0)?, m_max, delta));
    }
    if delta == 0.0 || !delta.is_finite() {
        return Err(PcsError::InvalidParameter {
            name: "delta",
            reason: "beat frequency must be finite and nonzero when the scan field is on".into(),
        });
    }
    let n = parts.dim();
    let d = parts.hilbert_dim();
    let l0 = parts.l0.matrix();
    let dplus = parts.dplus.matrix();
    let dminus = parts.dminus.matrix();
    let neg_dminus = Mat::from_fn(n, n, |i, j| -dminus[(i, j)]);

    // transfer[m - 1] = R_m with rho_m = R_m rho_{m-1}
    let mut transfer: Vec<CMat> = Vec::with_capacity(m_max);
    let mut next: Option<CMat> = None;
    for m in (1..=m_max).rev() {
        let shift = c64::new(0.0, m as f64 * delta);
        let mut block = Mat::from_fn(n, n, |i, j| if i == j { l0[(i, j)] - shift } else { l0[(i, j)] });
        if let Some(r) = &next {
            block = &block + &(dplus * r);
        }
        let r = checked_solve(block.as_ref(), neg_dminus.as_ref(), "harmonic block")?;
        transfer.push(r.clone());
        next = Some(r);
    }
    transfer.reverse();
    let r1 = &transfer[0];
    let q1 = conjugate_transfer(r1, d);
    let mut k0 = &(&l0.to_owned() + &(dplus * r1)) + &(dminus * &q1);
    replace_with_trace_row(&mut k0, d);
    let mut rhs = Mat::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    let x0 = checked_solve(k0.as_ref(), rhs.as_ref(), "zeroth block")?;

    let mut components = vec![Mat::zeros(d, d); 2 * m_max + 1];
    components[m_max] = unvectorize(x0.as_ref(), d);
    let mut prev = x0;
    for m in 1..=m_max {
        let xm = &transfer[m - 1] * &prev;
        let rho_m = unvectorize(xm.as_ref(), d);
        components[m_max - m] = dagger(rho_m.as_ref());
        components[m_max + m] = rho_m;
        prev = xm;
    }
    Ok(BlochExpansion {
        components,
        m_max,
        delta,
    })
}

/// `Tr(a†² a² rho)`.
pub(crate) fn pair_moment(rho: MatRef<'_, c64>, a: &CMat) -> f64 {
    let a2 = a * a;
    let x = &(&a2 * rho) * dagger(a2.as_ref());
    trace(x.as_ref()).re
}

/// Result of a truncation convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_max: usize,
    pub m_max: usize,
    /// `<:n^2:>` at the reported truncations.
    pub pair_moment: f64,
    /// `(n_max, m_max, <:n^2:>)` for every evaluated truncation.
    pub history: Vec<(usize, usize, f64)>,
}

/// Raises `n_max` (then `m_max`) until `<:n^2:>` of the cycle-averaged state
/// changes by less than `1e−6` relative.
pub fn convergence_check(params: &SystemParams) -> Result<ConvergenceReport> {
    const TOL: f64 = 1e-6;
    const N_LIMIT: usize = 14;
    const M_LIMIT: usize = 12;
    params.validate()?;
    let mut history = Vec::new();
    let mut eval = |n: usize, m: usize| -> Result<f64> {
        let p = params.with_truncation(n, m);
        let parts = build_liouville_parts(&p, &TransitionMask::new())?;
        let b = solve_bloch(&parts, p.delta(), m)?;
        let v = pair_moment(b.rho0().as_ref(), &parts.operators().a);
        history.push((n, m, v));
        Ok(v)
    };
    let close = |a: f64, b: f64| (a - b).abs() <= TOL * b.abs().max(1e-300);
    let m = params.m_max;
    let mut n = params.n_max.max(2);
    let mut value = eval(n, m)?;
    loop {
        if n + 1 > N_LIMIT {
            return Err(PcsError::NoConvergence(format!(
                "<:n^2:> still changing at n_max = {N_LIMIT}"
            )));
        }
        let v = eval(n + 1, m)?;
        let done = close(value, v);
        if done {
            break;
        }
        n += 1;
        value = v;
    }
    let mut m = m;
    loop {
        if m + 1 > M_LIMIT {
            return Err(PcsError::NoConvergence(format!(
                "<:n^2:> still changing at m_max = {M_LIMIT}"
            )));
        }
        let v = eval(n, m + 1)?;
        if close(value, v) {
            break;
        }
        m += 1;
        value = v;
    }
    Ok(ConvergenceReport {
        n_max: n,
        m_max: m,
        pair_moment: value,
        history,
    })
}

/// Convenience wrapper: Floquet expansion for `params` without masks.
pub fn bloch_for(params: &SystemParams) -> Result<(LiouvilleParts, BlochExpansion)> {
    let parts = build_liouville_parts(params, &TransitionMask::new())?;
    let b = solve_bloch(&parts, params.delta(), params.m_max)?;
    Ok((parts, b))
}

#[cfg(test)]
pub(crate) fn is_hermitian(m: MatRef<'_, c64>, tol: f64) -> bool {
    let diff = m - m.adjoint();
    frobenius(diff.as_ref()) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{basis_index, Atom};

    fn fig2(delta_tilde: f64) -> SystemParams {
        SystemParams::new(9.0, 2.0, 0.5, 0.5, delta_tilde).with_truncation(4, 2)
    }

    #[test]
    fn monochromatic_limit() {
        let p = fig2(1.0).with_drives(0.5, 0.0);
        let (parts, b) = bloch_for(&p).unwrap();
        let ss = steady_state(&parts.l0).unwrap();
        assert_eq!(frobenius((b.rho0() - &ss).as_ref()), 0.0);
        for m in 1..=p.m_max as i64 {
            assert_eq!(frobenius(b.component(m).as_ref()), 0.0);
        }
    }

    #[test]
    fn dark_state_without_drives() {
        let p = fig2(1.0).with_drives(0.0, 0.0);
        let (_, b) = bloch_for(&p).unwrap();
        let g0 = basis_index(0, Atom::Ground);
        assert!((b.rho0()[(g0, g0)] - ONE).norm() < 1e-14);
        assert!((trace(b.rho0().as_ref()) - ONE).norm() < 1e-14);
    }

    #[test]
    fn expansion_invariants() {
        let p = fig2(1.0 + 2f64.sqrt());
        let (parts, b) = bloch_for(&p).unwrap();
        assert!((trace(b.rho0().as_ref()) - ONE).norm() < 1e-12);
        for m in 1..=p.m_max as i64 {
            assert!(trace(b.component(m).as_ref()).norm() < 1e-10);
            let back = dagger(b.component(-m).as_ref());
            assert!(frobenius((&back - &b.component(m)).as_ref()) < 1e-10);
        }
        assert!(is_hermitian(b.rho0().as_ref(), 1e-12));
        assert!(b.residual(&parts) < 1e-10, "residual {}", b.residual(&parts));
    }

    #[test]
    fn scan_needs_nonzero_beat() {
        let p = fig2(-1.0);
        let parts = build_liouville_parts(&p, &TransitionMask::new()).unwrap();
        assert!(solve_bloch(&parts, p.delta(), 2).is_err());
    }
}
