//! Master-equation superoperators, dressed-basis transition masks and
//! spectral decomposition of time-independent Liouvilleans.
//!
//! Superoperators act on column-stacked density matrices: the element
//! `(i, j)` of a `D x D` matrix sits at position `i + D j`.

use std::collections::BTreeSet;

use faer::prelude::*;
use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{PcsError, Result};
use crate::hilbert::{
    add_damping, coupled_hamiltonian, dressed_basis, drive_operator, h_eff_with_drive,
    make_operators, DressedLabel, Operators, SystemParams,
};
use crate::linalg::{dagger, frobenius, identity, sandwich, unvectorize, vectorize, CMat, I, ONE, ZERO};

/// Linear map on `D x D` matrices stored as a dense `D^2 x D^2` matrix.
#[derive(Debug, Clone)]
pub struct Superoperator {
    matrix: CMat,
    hilbert_dim: usize,
}

impl Superoperator {
    pub fn zeros(hilbert_dim: usize) -> Self {
        let n = hilbert_dim * hilbert_dim;
        Self {
            matrix: Mat::zeros(n, n),
            hilbert_dim,
        }
    }

    pub fn from_matrix(matrix: CMat, hilbert_dim: usize) -> Self {
        assert_eq!(matrix.nrows(), hilbert_dim * hilbert_dim);
        assert_eq!(matrix.ncols(), hilbert_dim * hilbert_dim);
        Self { matrix, hilbert_dim }
    }

    /// `rho -> −i[h, rho]` for a general (possibly non-Hermitian) `h`,
    /// i.e. `−i(h rho − rho h†)`.
    pub fn hamiltonian(h: MatRef<'_, c64>) -> Self {
        let d = h.nrows();
        let id = identity(d);
        let left = sandwich(h, id.as_ref());
        let hd = dagger(h);
        let right = sandwich(id.as_ref(), hd.as_ref());
        let m = Mat::from_fn(d * d, d * d, |i, j| -I * (left[(i, j)] - right[(i, j)]));
        Self::from_matrix(m, d)
    }

    /// `rho -> −i[v, rho]` (a commutator, not the non-Hermitian form).
    pub fn commutator(v: MatRef<'_, c64>) -> Self {
        let d = v.nrows();
        let id = identity(d);
        let left = sandwich(v, id.as_ref());
        let right = sandwich(id.as_ref(), v);
        let m = Mat::from_fn(d * d, d * d, |i, j| -I * (left[(i, j)] - right[(i, j)]));
        Self::from_matrix(m, d)
    }

    /// `rho -> rate · c rho c†`.
    pub fn jump(c: MatRef<'_, c64>, rate: f64) -> Self {
        let d = c.nrows();
        let cd = dagger(c);
        let mut m = sandwich(c, cd.as_ref());
        let r = c64::new(rate, 0.0);
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                m[(i, j)] *= r;
            }
        }
        Self::from_matrix(m, d)
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Superoperator dimension `D^2`.
    pub fn dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn apply(&self, rho: MatRef<'_, c64>) -> CMat {
        let v = &self.matrix * vectorize(rho);
        unvectorize(v.as_ref(), self.hilbert_dim)
    }

    pub fn is_zero(&self) -> bool {
        frobenius(self.matrix.as_ref()) == 0.0
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &Superoperator, factor: c64) -> Superoperator {
        assert_eq!(self.hilbert_dim, other.hilbert_dim);
        let m = Mat::from_fn(self.dim(), self.dim(), |i, j| {
            self.matrix[(i, j)] + factor * other.matrix[(i, j)]
        });
        Self::from_matrix(m, self.hilbert_dim)
    }
}

impl std::ops::Add for &Superoperator {
    type Output = Superoperator;

    fn add(self, rhs: &Superoperator) -> Superoperator {
        self.add_scaled(rhs, ONE)
    }
}

/// Which driving field a mask entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveField {
    /// The fixed pump E1.
    Drive1,
    /// The scanning field E2.
    Drive2,
}

impl std::fmt::Display for DriveField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DriveField::Drive1 => "drive1",
            DriveField::Drive2 => "drive2",
        })
    }
}

/// One removed dressed-basis coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MaskEntry {
    pub from: DressedLabel,
    pub to: DressedLabel,
    pub field: DriveField,
}

/// A set of drive matrix elements to be zeroed in the dressed basis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransitionMask {
    entries: Vec<MaskEntry>,
}

impl TransitionMask {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(from: DressedLabel, to: DressedLabel, field: DriveField) -> Self {
        Self::new().with(from, to, field)
    }

    pub fn with(mut self, from: DressedLabel, to: DressedLabel, field: DriveField) -> Self {
        self.entries.push(MaskEntry { from, to, field });
        self
    }

    pub fn entries(&self) -> &[MaskEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn validate(&self, n_max: usize) -> Result<()> {
        for e in &self.entries {
            for label in [e.from, e.to] {
                if let DressedLabel::Plus(n) | DressedLabel::Minus(n) = label {
                    if n == 0 || n > n_max {
                        return Err(PcsError::OutOfRange(format!(
                            "mask entry {} -> {} references couplet outside 1..={n_max}",
                            e.from, e.to
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Unordered dressed-index pairs masked for one field.
    fn index_pairs(&self, field: DriveField) -> BTreeSet<(usize, usize)> {
        self.entries
            .iter()
            .filter(|e| e.field == field)
            .map(|e| {
                let (a, b) = (e.from.dressed_index(), e.to.dressed_index());
                (a.min(b), a.max(b))
            })
            .collect()
    }
}

/// Zeroes the masked dressed-basis elements of `op` for one field.
///
/// Both `(from, to)` and `(to, from)` are removed. The dressed basis does
/// not depend on the coupling strength, so no `g` is needed. Components that
/// are already zero to rounding are left untouched, which makes the map
/// exactly idempotent.
pub fn apply_mask(op: &CMat, mask: &TransitionMask, field: DriveField) -> Result<CMat> {
    let d = op.nrows();
    let n_max = d / 2 - 1;
    mask.validate(n_max)?;
    let pairs = mask.index_pairs(field);
    if pairs.is_empty() {
        return Ok(op.clone());
    }
    let u = dressed_basis(n_max)?;
    let threshold = 8.0 * f64::EPSILON * frobenius(op.as_ref());
    let mut out = op.clone();
    let remove = |i: usize, j: usize, out: &mut CMat| {
        let ui = u.col(i);
        let uj = u.col(j);
        let x: c64 = ui.adjoint() * op.as_ref() * uj;
        if x.norm() > threshold {
            for c in 0..d {
                let ujc = uj[c].conj();
                if ujc == ZERO {
                    continue;
                }
                for r in 0..d {
                    out[(r, c)] -= x * ui[r] * ujc;
                }
            }
        }
    };
    for &(i, j) in &pairs {
        remove(i, j, &mut out);
        if i != j {
            remove(j, i, &mut out);
        }
    }
    Ok(out)
}

/// Superoperator parts of the bichromatically driven master equation in
/// the frame rotating at the pump frequency.
#[derive(Debug, Clone)]
pub struct LiouvilleParts {
    /// Time-independent part including the pump.
    pub l0: Superoperator,
    /// Coefficient of `exp(−iδt)`.
    pub dplus: Superoperator,
    /// Coefficient of `exp(+iδt)`.
    pub dminus: Superoperator,
    params: SystemParams,
    ops: Operators,
    h_eff: CMat,
    scan_plus: CMat,
    scan_minus: CMat,
}

impl LiouvilleParts {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn operators(&self) -> &Operators {
        &self.ops
    }

    pub fn hilbert_dim(&self) -> usize {
        self.ops.dim()
    }

    /// Superoperator dimension `D^2`.
    pub fn dim(&self) -> usize {
        self.l0.dim()
    }

    pub fn h_eff(&self) -> &CMat {
        &self.h_eff
    }

    /// Scan coupling `V+ = iE2 σ+` (masked), the `exp(−iδt)` part.
    pub fn scan_plus(&self) -> &CMat {
        &self.scan_plus
    }

    /// Scan coupling `V− = −iE2 σ−` (masked), the `exp(+iδt)` part.
    pub fn scan_minus(&self) -> &CMat {
        &self.scan_minus
    }

    pub fn has_scan(&self) -> bool {
        !(self.dplus.is_zero() && self.dminus.is_zero())
    }

    /// Full generator at time `t`.
    pub fn generator_at(&self, t: f64) -> Superoperator {
        let delta = self.params.delta();
        let ph = c64::new(0.0, -delta * t).exp();
        self.l0
            .add_scaled(&self.dplus, ph)
            .add_scaled(&self.dminus, ph.conj())
    }

    /// Time-independent generator of the scan-only problem (pump switched
    /// off) written in the frame rotating at the scan frequency.
    pub fn scan_frame_generator(&self) -> Superoperator {
        let mut h = coupled_hamiltonian(&self.ops, -self.params.scan_detuning(), self.params.g);
        h = &(&h + &self.scan_plus) + &self.scan_minus;
        add_damping(&mut h, &self.params, &self.ops);
        lindblad(&h, &self.params, &self.ops)
    }

    /// Matrix-form evaluation of the full right-hand side at time `t`.
    pub fn rhs(&self, t: f64, rho: MatRef<'_, c64>) -> CMat {
        self.generator_at(t).apply(rho)
    }
}

fn lindblad(h_eff: &CMat, params: &SystemParams, ops: &Operators) -> Superoperator {
    let ham = Superoperator::hamiltonian(h_eff.as_ref());
    let cav = Superoperator::jump(ops.a.as_ref(), 2.0 * params.kappa);
    let atom = Superoperator::jump(ops.sigma_minus.as_ref(), params.gamma);
    &(&ham + &cav) + &atom
}

pub fn build_liouville_parts(params: &SystemParams, mask: &TransitionMask) -> Result<LiouvilleParts> {
    params.validate()?;
    mask.validate(params.n_max)?;
    let ops = make_operators(params.n_max)?;
    let pump = apply_mask(&drive_operator(&ops, params.drive1), mask, DriveField::Drive1)?;
    let h_eff = h_eff_with_drive(params, &ops, &pump);
    let l0 = lindblad(&h_eff, params, &ops);
    let d = ops.dim();
    let (scan_plus, scan_minus) = if params.drive2 == 0.0 {
        (Mat::zeros(d, d), Mat::zeros(d, d))
    } else {
        let sp = apply_mask(&ops.sigma_plus, mask, DriveField::Drive2)?;
        let sm = apply_mask(&ops.sigma_minus, mask, DriveField::Drive2)?;
        let e = c64::new(0.0, params.drive2);
        (
            Mat::from_fn(d, d, |i, j| e * sp[(i, j)]),
            Mat::from_fn(d, d, |i, j| -e * sm[(i, j)]),
        )
    };
    let (dplus, dminus) = if params.drive2 == 0.0 {
        (Superoperator::zeros(d), Superoperator::zeros(d))
    } else {
        (
            Superoperator::commutator(scan_plus.as_ref()),
            Superoperator::commutator(scan_minus.as_ref()),
        )
    };
    Ok(LiouvilleParts {
        l0,
        dplus,
        dminus,
        params: *params,
        ops,
        h_eff,
        scan_plus,
        scan_minus,
    })
}

/// How the expansion of an initial condition over eigenmodes is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    /// Eigenvector expansion.
    Diagonalization,
    /// Matrix exponentials, used when the eigenvector basis is too
    /// ill-conditioned for a stable expansion.
    ExponentialFallback,
}

/// Eigen-decomposition of a dense generator matrix `A`: `A v_n = −λ_n v_n`.
#[derive(Debug)]
pub(crate) struct RawEigen {
    pub lambdas: Vec<c64>,
    pub vectors: CMat,
    lu: faer::linalg::solvers::PartialPivLu<c64>,
    /// Relative residual `‖A V + V Λ‖ / (‖A‖ ‖V‖)`.
    pub residual: f64,
}

impl RawEigen {
    pub fn new(a: MatRef<'_, c64>) -> Result<Self> {
        let eig = a
            .eigen()
            .map_err(|e| PcsError::EigenFailure(format!("{e:?}")))?;
        let n = a.nrows();
        let s = eig.S().column_vector();
        let mut order: Vec<usize> = (0..n).collect();
        let key = |k: usize| (s[k].re.abs(), s[k].norm());
        order.sort_by(|&x, &y| key(x).partial_cmp(&key(y)).unwrap_or(std::cmp::Ordering::Equal));
        let u = eig.U();
        let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
        let lambdas: Vec<c64> = order.iter().map(|&k| -s[k]).collect();
        let av = a * &vectors;
        let vl = Mat::from_fn(n, n, |i, j| vectors[(i, j)] * lambdas[j]);
        let residual = frobenius((&av + &vl).as_ref())
            / (frobenius(a).max(f64::MIN_POSITIVE) * frobenius(vectors.as_ref()));
        if !residual.is_finite() {
            return Err(PcsError::EigenFailure("non-finite eigenvectors".into()));
        }
        let lu = vectors.partial_piv_lu();
        Ok(Self {
            lambdas,
            vectors,
            lu,
            residual,
        })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// Expansion coefficients `c` with `V c = y`, and the amplification
    /// `Σ |c_n| ‖v_n‖ / ‖y‖`.
    pub fn expand(&self, y: MatRef<'_, c64>) -> (CMat, f64) {
        let c = self.lu.solve(y);
        let mut amp = 0.0;
        for k in 0..self.dim() {
            amp += c[(k, 0)].norm() * self.vectors.col(k).norm_l2();
        }
        let yn = y.norm_l2();
        let amp = if yn > 0.0 { amp / yn } else { 1.0 };
        (c, if amp.is_finite() { amp } else { f64::INFINITY })
    }
}

/// Spectral decomposition of a time-independent Liouvillean.
#[derive(Debug)]
pub struct EigenSystem {
    /// Generator eigenvalues are `−lambdas[n]`; sorted by `|Re λ|`.
    pub lambdas: Vec<c64>,
    pub method: SpectralMethod,
    raw: RawEigen,
    generator: Superoperator,
}

impl EigenSystem {
    /// Conditioning threshold beyond which expansions fall back to
    /// matrix exponentials.
    pub const MAX_AMPLIFICATION: f64 = 1e8;

    pub fn hilbert_dim(&self) -> usize {
        self.generator.hilbert_dim()
    }

    pub fn generator(&self) -> &Superoperator {
        &self.generator
    }

    /// Mode matrix `rho_n`; the steady mode (index 0) has unit trace.
    pub fn mode(&self, n: usize) -> CMat {
        let v = self.raw.vectors.col(n);
        let col = Mat::from_fn(v.nrows(), 1, |i, _| v[i]);
        unvectorize(col.as_ref(), self.hilbert_dim())
    }

    pub fn steady_state(&self) -> CMat {
        self.mode(0)
    }

    /// Relative eigen-residual of the decomposition.
    pub fn residual(&self) -> f64 {
        self.raw.residual
    }

    /// Largest growth rate `max Re(−λ)`.
    pub fn max_growth(&self) -> f64 {
        self.lambdas.iter().map(|l| -l.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn raw(&self) -> &RawEigen {
        &self.raw
    }

    /// `exp(L t) rho`, via the eigen-expansion or, for an ill-conditioned
    /// basis, a matrix exponential.
    pub fn evolve(&self, rho: MatRef<'_, c64>, t: f64) -> CMat {
        let y = vectorize(rho);
        let (c, amp) = self.raw.expand(y.as_ref());
        let out = if self.method == SpectralMethod::Diagonalization && amp < Self::MAX_AMPLIFICATION {
            let n = self.raw.dim();
            let scaled = Mat::from_fn(n, 1, |k, _| c[(k, 0)] * (-self.lambdas[k] * t).exp());
            &self.raw.vectors * &scaled
        } else {
            let m = self.generator.matrix();
            let at = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * t);
            &crate::linalg::expm(at.as_ref()) * &y
        };
        unvectorize(out.as_ref(), self.hilbert_dim())
    }
}

/// Full eigen-decomposition of a time-independent Liouvillean.
///
/// The steady mode is placed first and trace-normalized.
pub fn eigendecompose(l: &Superoperator) -> Result<EigenSystem> {
    let mut raw = RawEigen::new(l.matrix())?;
    let d = l.hilbert_dim();
    let near_zero: Vec<usize> = (0..raw.dim()).filter(|&k| raw.lambdas[k].norm() < 1e-8).collect();
    if near_zero.len() != 1 {
        return Err(PcsError::Degenerate(format!(
            "expected one stationary mode, found {}",
            near_zero.len()
        )));
    }
    let k0 = near_zero[0];
    let n = raw.dim();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.remove(k0);
    perm.insert(0, k0);
    let tr: c64 = (0..d).map(|i| raw.vectors[(i + d * i, k0)]).sum();
    if tr.norm() < 1e-12 {
        return Err(PcsError::Degenerate("stationary mode has zero trace".into()));
    }
    let vectors = Mat::from_fn(n, n, |i, j| {
        let v = raw.vectors[(i, perm[j])];
        if j == 0 {
            v / tr
        } else {
            v
        }
    });
    let lambdas: Vec<c64> = perm.iter().map(|&k| raw.lambdas[k]).collect();
    raw = RawEigen {
        lu: vectors.partial_piv_lu(),
        vectors,
        lambdas: lambdas.clone(),
        residual: raw.residual,
    };
    let probe = Mat::from_fn(n, 1, |i, _| c64::new(1.0 + (i % 7) as f64, (i % 3) as f64 - 1.0));
    let (_, amp) = raw.expand(probe.as_ref());
    let method = if amp < EigenSystem::MAX_AMPLIFICATION && raw.residual < 1e-8 {
        SpectralMethod::Diagonalization
    } else {
        SpectralMethod::ExponentialFallback
    };
    Ok(EigenSystem {
        lambdas,
        method,
        raw,
        generator: l.clone(),
    })
}
