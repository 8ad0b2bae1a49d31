//! Coupling-strength distribution behind the mask, ensemble averages,
//! spectrum sweeps and resonance-line predictions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{bichromatic_state, moment_with, scan_only_state, w_multi_on};
use crate::error::{invalid, PcsError, Result};
use crate::hilbert::SystemParams;
use crate::liouville::TransitionMask;

/// Rectangular mask in front of a standing-wave TEM00 mode.
///
/// Lengths along the cavity axis are in optical wavelengths and transverse
/// lengths in mode waists. The coupling at a point is
/// `g_max cos(2πx) exp(−(y² + z²))`, where `x` is measured from the antinode,
/// `y` across the mask and `z` along the beam path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskGeometry {
    /// Mask height in units of the waist.
    pub waist_ratio: f64,
    /// Mask length along the cavity axis in units of the wavelength.
    pub mask_length_fraction: f64,
    /// Lower cut-off `F` of the support `(F g_max, g_max]`.
    pub cutoff: f64,
    pub g_max: f64,
    /// Half-length of the sampled beam path in waists; zero places every
    /// atom in the mask plane.
    pub transit_half_length: f64,
}

impl Default for MaskGeometry {
    fn default() -> Self {
        let mut geom = Self {
            waist_ratio: 1.0,
            mask_length_fraction: 0.1,
            cutoff: 0.0,
            g_max: 10.0,
            transit_half_length: 0.0,
        };
        geom.cutoff = geom.corner_fraction();
        geom
    }
}

impl MaskGeometry {
    /// `g / g_max` at a point.
    pub fn coupling_fraction(&self, x: f64, y: f64, z: f64) -> f64 {
        (2.0 * std::f64::consts::PI * x).cos() * (-(y * y + z * z)).exp()
    }

    /// Smallest `g / g_max` reachable: the mask corner at the end of the path.
    pub fn corner_fraction(&self) -> f64 {
        self.coupling_fraction(
            0.5 * self.mask_length_fraction,
            0.5 * self.waist_ratio,
            self.transit_half_length,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_max > 0.0 && self.g_max.is_finite()) {
            return Err(invalid("g_max", "must be positive and finite"));
        }
        if !(self.waist_ratio > 0.0 && self.waist_ratio.is_finite()) {
            return Err(invalid("waist_ratio", "must be positive and finite"));
        }
        if !(self.mask_length_fraction > 0.0 && self.mask_length_fraction < 0.5) {
            return Err(invalid("mask_length_fraction", "must lie in (0, 0.5)"));
        }
        if !(self.transit_half_length >= 0.0 && self.transit_half_length.is_finite()) {
            return Err(invalid("transit_half_length", "must be nonnegative and finite"));
        }
        if !(self.cutoff > 0.0 && self.cutoff < 1.0) {
            return Err(invalid("cutoff", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Discrete coupling distribution `{(g_i, p_i)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDistribution {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl CouplingDistribution {
    /// Checks that nodes are positive and strictly increasing and the weights
    /// are nonnegative and sum to one.
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(PcsError::EmptySupport(
                "nodes and weights must be nonempty and of equal length".into(),
            ));
        }
        if nodes.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(invalid("nodes", "couplings must be positive and finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("nodes", "must be strictly increasing"));
        }
        if weights.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("weights", "must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("must sum to 1, got {total}")));
        }
        Ok(Self { nodes, weights })
    }

    /// `P(g) = δ(g − g0)`.
    pub fn point(g: f64) -> Result<Self> {
        Self::new(vec![g], vec![1.0])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(g, p)| g * p).sum()
    }
}

/// Number of Monte Carlo positions used by [`build_distribution`].
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Seed used by [`build_distribution`].
pub const DEFAULT_SEED: u64 = 0x5eed_2001;

/// Distribution from [`DEFAULT_SAMPLES`] positions with [`DEFAULT_SEED`].
pub fn build_distribution(geom: &MaskGeometry, n_nodes: usize) -> Result<CouplingDistribution> {
    build_distribution_with(geom, n_nodes, DEFAULT_SAMPLES, DEFAULT_SEED)
}

/// Samples positions uniformly over the mask (and beam path), keeps
/// couplings in `(F g_max, g_max]`, sorts them into `n_nodes` equal-width
/// bins and places each node at the mean coupling of its bin. Empty bins are
/// dropped.
pub fn build_distribution_with(
    geom: &MaskGeometry,
    n_nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<CouplingDistribution> {
    geom.validate()?;
    if n_nodes < 8 {
        return Err(invalid("n_nodes", format!("at least 8 nodes are required, got {n_nodes}")));
    }
    if samples == 0 {
        return Err(invalid("samples", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = geom.cutoff;
    let width = (1.0 - lo) / n_nodes as f64;
    let mut count = vec![0usize; n_nodes];
    let mut sum = vec![0.0f64; n_nodes];
    let hx = 0.5 * geom.mask_length_fraction;
    let hy = 0.5 * geom.waist_ratio;
    let hz = geom.transit_half_length;
    for _ in 0..samples {
        let x = rng.random_range(-hx..=hx);
        let y = rng.random_range(-hy..=hy);
        let z = if hz > 0.0 { rng.random_range(-hz..=hz) } else { 0.0 };
        let f = geom.coupling_fraction(x, y, z);
        if f <= lo {
            continue;
        }
        let bin = (((f - lo) / width) as usize).min(n_nodes - 1);
        count[bin] += 1;
        sum[bin] += f;
    }
    let kept: usize = count.iter().sum();
    if kept == 0 {
        return Err(PcsError::EmptySupport(format!(
            "no coupling exceeds F g_max with F = {}; the smallest coupling in the mask is {:.6} g_max",
            geom.cutoff,
            geom.corner_fraction()
        )));
    }
    let mut nodes = Vec::with_capacity(n_nodes);
    let mut weights = Vec::with_capacity(n_nodes);
    for (c, s) in count.iter().zip(&sum) {
        if *c > 0 {
            nodes.push(geom.g_max * s / *c as f64);
            weights.push(*c as f64 / kept as f64);
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|p| *p /= total);
    CouplingDistribution::new(nodes, weights)
}

/// `Σ p_i f(g_i)`.
pub fn ensemble_average(observable: impl Fn(f64) -> f64, dist: &CouplingDistribution) -> f64 {
    dist.iter().map(|(g, p)| p * observable(g)).sum()
}

/// Parallel [`ensemble_average`] of a fallible observable. The sum is taken
/// in node order, so the result does not depend on scheduling.
pub fn try_ensemble_average<F>(observable: F, dist: &CouplingDistribution) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values: Vec<Result<f64>> = dist.nodes().par_iter().map(|&g| observable(g)).collect();
    let mut acc = 0.0;
    for (v, p) in values.into_iter().zip(dist.weights()) {
        acc += p * v?;
    }
    Ok(acc)
}

/// Quantity tabulated by [`spectrum_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// Two-photon rate `w2`.
    W2,
    /// Background-subtracted two-photon rate.
    Diff2,
    /// Three-photon rate `w3`.
    W3,
    /// Background-subtracted three-photon rate.
    Diff3,
    /// `Δ2 + Δ3`.
    Diff23,
    /// Moment `<a†³ a³>`.
    A3,
    /// Moment `<σ+ a†² a² σ−>`.
    SA2,
    /// Moment `<:n²:>`.
    N2,
}

impl RateKind {
    pub const ALL: [RateKind; 8] = [
        RateKind::W2,
        RateKind::Diff2,
        RateKind::W3,
        RateKind::Diff3,
        RateKind::Diff23,
        RateKind::A3,
        RateKind::SA2,
        RateKind::N2,
    ];

    /// Column name in tables.
    pub fn name(self) -> &'static str {
        match self {
            RateKind::W2 => "w2",
            RateKind::Diff2 => "diff2",
            RateKind::W3 => "w3",
            RateKind::Diff3 => "diff3",
            RateKind::Diff23 => "diff23",
            RateKind::A3 => "a3",
            RateKind::SA2 => "s_a2",
            RateKind::N2 => "n2",
        }
    }

    fn needs_background(self) -> bool {
        matches!(self, RateKind::Diff2 | RateKind::Diff3 | RateKind::Diff23)
    }
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateKind {
    type Err = PcsError;

    fn from_str(s: &str) -> Result<Self> {
        RateKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid("kind", format!("unknown rate kind `{s}`")))
    }
}

/// A failed `(δ̃, g)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub delta_tilde: f64,
    pub g: f64,
    pub error: PcsError,
}

/// One row per scan detuning; values follow the order of `kinds`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub delta_tilde: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectrumTable {
    pub kinds: Vec<RateKind>,
    pub rows: Vec<SpectrumRow>,
    pub failures: Vec<CellFailure>,
}

impl SpectrumTable {
    pub fn column(&self, kind: RateKind) -> Option<Vec<f64>> {
        let k = self.kinds.iter().position(|&x| x == kind)?;
        Some(self.rows.iter().map(|r| r.values[k]).collect())
    }

    pub fn grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta_tilde).collect()
    }

    /// Interior grid points where `kind` exceeds both neighbours.
    pub fn local_maxima(&self, kind: RateKind) -> Vec<f64> {
        let Some(col) = self.column(kind) else {
            return Vec::new();
        };
        local_maxima(&self.grid(), &col)
    }
}

/// Interior points of `ys` that exceed both neighbours.
pub fn local_maxima(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    (1..ys.len().saturating_sub(1))
        .filter(|&i| ys[i] > ys[i - 1] && ys[i] > ys[i + 1])
        .map(|i| xs[i])
        .collect()
}

fn cell_values(params: &SystemParams, mask: &TransitionMask, kinds: &[RateKind]) -> Result<Vec<f64>> {
    let (parts, rho) = bichromatic_state(params, mask)?;
    let ops = parts.operators();
    let need_bg = kinds.iter().any(|k| k.needs_background());
    let full2 = w_multi_on(2, rho.as_ref(), params, ops)?.value;
    let full3 = w_multi_on(3, rho.as_ref(), params, ops)?.value;
    let (bg2, bg3) = if need_bg && params.drive1 != 0.0 {
        let bg = scan_only_state(&parts)?;
        (
            w_multi_on(2, bg.as_ref(), params, ops)?.value,
            w_multi_on(3, bg.as_ref(), params, ops)?.value,
        )
    } else {
        (full2, full3)
    };
    Ok(kinds
        .iter()
        .map(|k| match k {
            RateKind::W2 => full2,
            RateKind::Diff2 => full2 - bg2,
            RateKind::W3 => full3,
            RateKind::Diff3 => full3 - bg3,
            RateKind::Diff23 => (full2 - bg2) + (full3 - bg3),
            RateKind::A3 => moment_with(ops, rho.as_ref(), 3, 0).value,
            RateKind::SA2 => moment_with(ops, rho.as_ref(), 2, 1).value,
            RateKind::N2 => moment_with(ops, rho.as_ref(), 2, 0).value,
        })
        .collect())
}

/// Ensemble-averaged rates over a grid of scan detunings.
///
/// Cells `(δ̃, g_i)` are solved in parallel. A failed cell sets its row to
/// NaN and is reported in `failures`; the sweep continues.
pub fn spectrum_sweep(
    template: &SystemParams,
    delta_grid: &[f64],
    dist: &CouplingDistribution,
    kinds: &[RateKind],
    mask: &TransitionMask,
) -> Result<SpectrumTable> {
    if kinds.is_empty() {
        return Ok(SpectrumTable::default());
    }
    template.validate()?;
    mask.validate(template.n_max)?;
    if delta_grid.windows(2).any(|w| w[1] <= w[0]) || delta_grid.iter().any(|d| !d.is_finite()) {
        return Err(invalid("delta_grid", "must be finite and strictly increasing"));
    }
    let ng = dist.len();
    let cells: Vec<Result<Vec<f64>>> = (0..delta_grid.len() * ng)
        .into_par_iter()
        .map(|c| {
            let p = template
                .with_delta_tilde(delta_grid[c / ng])
                .with_coupling(dist.nodes()[c % ng]);
            cell_values(&p, mask, kinds)
        })
        .collect();
    let mut table = SpectrumTable {
        kinds: kinds.to_vec(),
        rows: Vec::with_capacity(delta_grid.len()),
        failures: Vec::new(),
    };
    for (i, &dt) in delta_grid.iter().enumerate() {
        let mut values = vec![0.0; kinds.len()];
        for (j, (g, p)) in dist.iter().enumerate() {
            match &cells[i * ng + j] {
                Ok(v) => values.iter_mut().zip(v).for_each(|(acc, x)| *acc += p * x),
                Err(e) => {
                    values.iter_mut().for_each(|x| *x = f64::NAN);
                    table.failures.push(CellFailure {
                        delta_tilde: dt,
                        g,
                        error: e.clone(),
                    });
                }
            }
        }
        table.rows.push(SpectrumRow {
            delta_tilde: dt,
            values,
        });
    }
    Ok(table)
}

/// A predicted resonance in the scan detuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceLine {
    /// Photons absorbed from the pump and the scanning field.
    pub pump_photons: u8,
    pub scan_photons: u8,
    /// Target dressed state: `+1` for `|n>_+`, `−1` for `|n>_−`.
    pub branch: i8,
    pub delta_tilde: f64,
}

/// Three-photon resonance conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceLines {
    pub lines: Vec<ResonanceLine>,
    /// Whether three pump photons alone reach `|3>_−`, independent of δ̃.
    pub pump_only_resonant: bool,
}

fn check_couplings(g: f64, g_f: f64) -> Result<()> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(invalid("g", "must be positive and finite"));
    }
    if !(g_f > 0.0 && g_f.is_finite()) {
        return Err(invalid("g_f", "must be positive and finite"));
    }
    Ok(())
}

/// Scan detunings at which `k` pump and `3 − k` scan photons reach `|3>_±`
/// (`k = 0, 1, 2`), sorted ascending.
pub fn resonance_lines(g: f64, g_f: f64) -> Result<ResonanceLines> {
    check_couplings(g, g_f)?;
    let r = 3f64.sqrt() * g / g_f;
    let mut lines = Vec::with_capacity(6);
    for branch in [-1i8, 1] {
        let s = f64::from(branch);
        lines.push(ResonanceLine {
            pump_photons: 2,
            scan_photons: 1,
            branch,
            delta_tilde: 2.0 + s * r,
        });
        lines.push(ResonanceLine {
            pump_photons: 1,
            scan_photons: 2,
            branch,
            delta_tilde: (1.0 + s * r) / 2.0,
        });
        lines.push(ResonanceLine {
            pump_photons: 0,
            scan_photons: 3,
            branch,
            delta_tilde: s * r / 3.0,
        });
    }
    lines.sort_by(|a, b| a.delta_tilde.total_cmp(&b.delta_tilde));
    let pump_only_resonant = (3f64.sqrt() * g - 3.0 * g_f).abs() <= 1e-12 * g_f;
    Ok(ResonanceLines {
        lines,
        pump_only_resonant,
    })
}

/// Scan detunings at which one pump and one scan photon, or two scan
/// photons, reach `|2>_±`, sorted ascending.
pub fn two_photon_lines(g: f64, g_f: f64) -> Result<Vec<ResonanceLine>> {
    check_couplings(g, g_f)?;
    let r = 2f64.sqrt() * g / g_f;
    let mut lines = Vec::with_capacity(4);
    for branch in [-1i8, 1] {
        let s = f64::from(branch);
        lines.push(ResonanceLine {
            pump_photons: 1,
            scan_photons: 1,
            branch,
            delta_tilde: 1.0 + s * r,
        });
        lines.push(ResonanceLine {
            pump_photons: 0,
            scan_photons: 2,
            branch,
            delta_tilde: s * r / 2.0,
        });
    }
    lines.sort_by(|a, b| a.delta_tilde.total_cmp(&b.delta_tilde));
    Ok(lines)
}
