//! Closed-form background rates, peak-to-valley ratio and the search for
//! the detection window that maximizes it.

use std::fmt;
use std::str::FromStr;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::DifferenceCorrelator;
use crate::ensemble::CouplingDistribution;
use crate::error::{invalid, PcsError, Result};
use crate::hilbert::{Operators, SystemParams};
use crate::linalg::{dagger, vectorize};
use crate::liouville::{build_liouville_parts, eigendecompose, EigenSystem, TransitionMask};
use crate::spectral::{ExponentialSeries, DEGENERACY_TOL};

/// Scan detuning of the peak used for the ratio.
pub const PEAK_DELTA_TILDE: f64 = 1.0 + std::f64::consts::SQRT_2;

/// Backgrounds below this make the ratio meaningless.
pub const MIN_BACKGROUND: f64 = 1e-14;

/// Coincidence counting convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowKind {
    /// Pairs whose second photon arrives within `τ_w` of a trigger photon.
    #[serde(rename = "con")]
    Conditional,
    /// Any two photons within a window of length `τ_w`.
    #[serde(rename = "unc")]
    Unconditional,
}

impl WindowKind {
    pub const BOTH: [WindowKind; 2] = [WindowKind::Conditional, WindowKind::Unconditional];

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Conditional => "con",
            WindowKind::Unconditional => "unc",
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WindowKind {
    type Err = PcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "con" | "conditional" => Ok(WindowKind::Conditional),
            "unc" | "unconditional" => Ok(WindowKind::Unconditional),
            _ => Err(invalid("kind", format!("unknown window kind `{s}`"))),
        }
    }
}

fn check_window(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(invalid("tau_w", format!("window time must be positive and finite, got {tau}")))
    }
}

/// Pair correlation of a time-independent problem as
/// `c0 + Σ c_n exp(−λ_n t)`.
#[derive(Debug, Clone)]
pub struct BackgroundExpansion {
    /// Asymptotic pair rate `(2κ)² <n>²`.
    pub c0: f64,
    /// Decaying terms `(c_n, λ_n)`.
    pub terms: Vec<(c64, c64)>,
    series: ExponentialSeries,
}

impl BackgroundExpansion {
    /// Expansion of `(2κ)² Tr(n e^{Lt}[a rho_ss a†])` over the modes of `eig`.
    pub fn new(eig: &EigenSystem, ops: &Operators, kappa: f64) -> Result<Self> {
        let rho = eig.steady_state();
        let y = vectorize((&(&ops.a * &rho) * dagger(ops.a.as_ref())).as_ref());
        let w = vectorize(ops.number.transpose());
        let (series, amp) = ExponentialSeries::from_eigen(eig.raw(), w.as_ref(), y.as_ref(), 4.0 * kappa * kappa);
        if !(amp < EigenSystem::MAX_AMPLIFICATION) {
            return Err(PcsError::NumericalSingularity(format!(
                "eigenmode expansion amplifies the initial condition by {amp:e}"
            )));
        }
        let c0 = series.stationary().re;
        let terms = series
            .terms()
            .iter()
            .copied()
            .filter(|(_, l)| l.norm() >= DEGENERACY_TOL)
            .collect();
        Ok(Self { c0, terms, series })
    }

    /// Background of the pump-only problem: the scanning field is far
    /// detuned and its time-dependent part is dropped.
    pub fn for_params(params: &SystemParams) -> Result<Self> {
        let parts = build_liouville_parts(params, &TransitionMask::new())?;
        let eig = eigendecompose(&parts.l0)?;
        Self::new(&eig, parts.operators(), params.kappa)
    }

    /// `c0 + Σ c_n`, the zero-lag value `(2κ)² <:n²:>`.
    pub fn zero_lag(&self) -> f64 {
        self.series.zero_lag().re
    }

    /// Windowed background as a complex number; the imaginary part measures
    /// the reconstruction error.
    pub fn windowed(&self, tau: f64, kind: WindowKind) -> c64 {
        match kind {
            WindowKind::Conditional => self.series.window_average(tau),
            WindowKind::Unconditional => self.series.nested_average(tau),
        }
    }
}

/// Closed-form windowed background:
/// `c0 + Σ c_n (1 − e^{−μ_n})/μ_n` (conditional) or
/// `c0 + 2 Σ c_n [(e^{−μ_n} − 1)/μ_n + 1]/μ_n` (unconditional), `μ_n = λ_n τ_w`.
pub fn background_closed_form(expansion: &BackgroundExpansion, tau_w: f64, kind: WindowKind) -> Result<f64> {
    check_window(tau_w)?;
    Ok(expansion.windowed(tau_w, kind).re)
}

struct Node {
    weight: f64,
    peak: DifferenceCorrelator,
    valley: BackgroundExpansion,
}

/// Precomputed peak correlators and background expansions for every node of
/// a coupling distribution.
pub struct PvrEvaluator {
    nodes: Vec<Node>,
}

impl PvrEvaluator {
    /// Uses `params` as given, including its scan detuning.
    pub fn new(params: &SystemParams, dist: &CouplingDistribution) -> Result<Self> {
        params.validate()?;
        let built: Vec<Result<Node>> = dist
            .iter()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(g, weight)| {
                let p = params.with_coupling(g);
                Ok(Node {
                    weight,
                    peak: DifferenceCorrelator::new(&p, &TransitionMask::new())?,
                    valley: BackgroundExpansion::for_params(&p)?,
                })
            })
            .collect();
        Ok(Self {
            nodes: built.into_iter().collect::<Result<_>>()?,
        })
    }

    /// Ensemble-averaged windowed difference rate at the peak.
    pub fn peak(&self, tau: f64, kind: WindowKind) -> f64 {
        self.nodes
            .iter()
            .map(|n| {
                n.weight
                    * match kind {
                        WindowKind::Conditional => n.peak.conditional(tau),
                        WindowKind::Unconditional => n.peak.unconditional(tau),
                    }
            })
            .sum()
    }

    /// Ensemble-averaged closed-form background.
    pub fn valley(&self, tau: f64, kind: WindowKind) -> f64 {
        self.nodes.iter().map(|n| n.weight * n.valley.windowed(tau, kind).re).sum()
    }

    pub fn pvr(&self, tau: f64, kind: WindowKind) -> Result<f64> {
        check_window(tau)?;
        let valley = self.valley(tau, kind);
        if !(valley.abs() >= MIN_BACKGROUND) {
            return Err(PcsError::IllConditionedRatio { background: valley });
        }
        Ok(self.peak(tau, kind) / valley)
    }

    /// Maximizes the ratio over `κτ_w ∈ [1e−3, 10]`.
    pub fn optimize(&self, kind: WindowKind) -> Result<WindowOptimum> {
        self.optimize_in(kind, TAU_MIN, TAU_MAX, GRID_POINTS)
    }

    /// Maximizes the ratio over `κτ_w ∈ [lo, hi]` with a coarse grid of
    /// `grid` points.
    pub fn optimize_in(&self, kind: WindowKind, lo: f64, hi: f64, grid: usize) -> Result<WindowOptimum> {
        maximize_log(|t| self.pvr(t, kind), lo, hi, grid, TAU_REL_TOL)
    }
}

/// Ensemble peak-to-valley ratio at `PEAK_DELTA_TILDE`.
pub fn pvr(params: &SystemParams, tau_w: f64, dist: &CouplingDistribution, kind: WindowKind) -> Result<f64> {
    check_window(tau_w)?;
    PvrEvaluator::new(&params.with_delta_tilde(PEAK_DELTA_TILDE), dist)?.pvr(tau_w, kind)
}

pub const TAU_MIN: f64 = 1e-3;
pub const TAU_MAX: f64 = 10.0;
pub const GRID_POINTS: usize = 41;
pub const TAU_REL_TOL: f64 = 1e-3;

/// Result of a window search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOptimum {
    pub tau_opt: f64,
    pub pvr_max: f64,
    /// The best grid point lies on the bracket edge, so no interior
    /// maximum was found.
    pub at_boundary: bool,
}

/// Coarse log grid followed by golden-section refinement in `ln τ` until
/// the bracket is narrower than `rel_tol` relative.
pub fn maximize_log<F>(mut f: F, lo: f64, hi: f64, grid: usize, rel_tol: f64) -> Result<WindowOptimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo > 0.0 && hi > lo && grid >= 3 && rel_tol > 0.0) {
        return Err(invalid("bracket", "need 0 < lo < hi, at least 3 grid points and a positive tolerance"));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let xs: Vec<f64> = (0..grid)
        .map(|i| llo + (lhi - llo) * i as f64 / (grid - 1) as f64)
        .collect();
    let mut ys = Vec::with_capacity(grid);
    for &x in &xs {
        ys.push(f(x.exp())?);
    }
    let best = (0..grid)
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
        .expect("grid is nonempty");
    if best == 0 || best == grid - 1 {
        return Ok(WindowOptimum {
            tau_opt: xs[best].exp(),
            pvr_max: ys[best],
            at_boundary: true,
        });
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (xs[best - 1], xs[best + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c.exp())?;
    let mut fd = f(d.exp())?;
    let tol = rel_tol.ln_1p();
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d.exp())?;
        }
    }
    let (x, fx) = if fc > fd { (c, fc) } else { (d, fd) };
    let (x, fx) = if ys[best] > fx { (xs[best], ys[best]) } else { (x, fx) };
    Ok(WindowOptimum {
        tau_opt: x.exp(),
        pvr_max: fx,
        at_boundary: false,
    })
}

/// Optimal window for the ensemble at `PEAK_DELTA_TILDE`.
pub fn optimize_window(params: &SystemParams, dist: &CouplingDistribution, kind: WindowKind) -> Result<WindowOptimum> {
    PvrEvaluator::new(&params.with_delta_tilde(PEAK_DELTA_TILDE), dist)?.optimize(kind)
}

/// Least-squares line `y = slope x + intercept` with Pearson coefficient `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(invalid("data", "x and y must have equal length"));
    }
    if xs.len() < 3 {
        return Err(PcsError::InsufficientData(format!(
            "a line fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(PcsError::InsufficientData("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let r = if syy == 0.0 { 0.0 } else { sxy / (sxx * syy).sqrt() };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r: r.clamp(-1.0, 1.0),
    })
}

/// Optimal windows at one decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPoint {
    pub gamma: f64,
    pub con: Result<WindowOptimum>,
    pub unc: Result<WindowOptimum>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSweep {
    pub points: Vec<GammaPoint>,
    pub con: Result<LinearFit>,
    pub unc: Result<LinearFit>,
}

/// Optimal windows over `gammas` and the line fits of `κτ_opt` against
/// `γ/κ`. Failed optimizations and boundary optima are left out of the fits.
pub fn gamma_sweep_fit(gammas: &[f64], params: &SystemParams, dist: &CouplingDistribution) -> Result<GammaSweep> {
    let mut points = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let p = params.with_gamma(gamma);
        let (con, unc) = match PvrEvaluator::new(&p.with_delta_tilde(PEAK_DELTA_TILDE), dist) {
            Ok(ev) => (ev.optimize(WindowKind::Conditional), ev.optimize(WindowKind::Unconditional)),
            Err(e) => (Err(e.clone()), Err(e)),
        };
        points.push(GammaPoint { gamma, con, unc });
    }
    fit_gamma_points(points, params.kappa)
}

/// Line fits of `κτ_opt` against `γ/κ` over precomputed optima. Failed
/// optimizations and boundary optima are left out.
pub fn fit_gamma_points(points: Vec<GammaPoint>, kappa: f64) -> Result<GammaSweep> {
    let fit = |pick: fn(&GammaPoint) -> &Result<WindowOptimum>| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = points
            .iter()
            .filter_map(|pt| match pick(pt) {
                Ok(o) if !o.at_boundary => Some((pt.gamma / kappa, o.tau_opt * kappa)),
                _ => None,
            })
            .unzip();
        linear_fit(&xs, &ys)
    };
    let con = fit(|p| &p.con);
    let unc = fit(|p| &p.unc);
    if con.is_err() && unc.is_err() {
        return Err(PcsError::InsufficientData(
            "fewer than 3 successful window optimizations".into(),
        ));
    }
    Ok(GammaSweep { points, con, unc })
}
