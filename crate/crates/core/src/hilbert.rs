//! Truncated atom ⊗ cavity operator algebra, dressed states and the
//! effective Hamiltonian.
//!
//! Basis states `|n, s>` are stored at index `2n + s` with `s = 0` for the
//! atomic ground state and `s = 1` for the excited state. All rates are in
//! units of the cavity decay rate κ.

use std::fmt;
use std::str::FromStr;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PcsError, Result};
use crate::linalg::{CMat, I, ONE};

/// Physical rates, detunings and truncation orders of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Coupling of the subensemble the pump is resonant with.
    pub g_f: f64,
    /// Actual atom-cavity coupling.
    pub g: f64,
    pub kappa: f64,
    pub gamma: f64,
    /// Pump amplitude E1.
    pub drive1: f64,
    /// Scanning field amplitude E2.
    pub drive2: f64,
    /// Normalized scan detuning (ω2 − ω)/(ω − ω1).
    pub delta_tilde: f64,
    /// Fock-space truncation.
    pub n_max: usize,
    /// Number of retained Floquet harmonics on each side.
    pub m_max: usize,
}

impl SystemParams {
    pub const DEFAULT_N_MAX: usize = 6;
    pub const DEFAULT_M_MAX: usize = 3;

    /// Parameters with κ = 1, `g = g_f` and default truncations.
    pub fn new(g_f: f64, gamma: f64, drive1: f64, drive2: f64, delta_tilde: f64) -> Self {
        Self {
            g_f,
            g: g_f,
            kappa: 1.0,
            gamma,
            drive1,
            drive2,
            delta_tilde,
            n_max: Self::DEFAULT_N_MAX,
            m_max: Self::DEFAULT_M_MAX,
        }
    }

    pub fn with_coupling(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_drives(mut self, drive1: f64, drive2: f64) -> Self {
        self.drive1 = drive1;
        self.drive2 = drive2;
        self
    }

    pub fn with_delta_tilde(mut self, delta_tilde: f64) -> Self {
        self.delta_tilde = delta_tilde;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_truncation(mut self, n_max: usize, m_max: usize) -> Self {
        self.n_max = n_max;
        self.m_max = m_max;
        self
    }

    /// Hilbert-space dimension `2 (n_max + 1)`.
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }

    /// Cavity detuning from the pump, ω − ω1.
    pub fn pump_detuning(&self) -> f64 {
        self.g_f
    }

    /// Scanning field detuning from the cavity, ω2 − ω.
    pub fn scan_detuning(&self) -> f64 {
        self.g_f * self.delta_tilde
    }

    /// Beat frequency δ = ω2 − ω1.
    pub fn delta(&self) -> f64 {
        self.g_f * (1.0 + self.delta_tilde)
    }

    pub fn validate(&self) -> Result<()> {
        fn finite(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite, got {v}")))
            }
        }
        finite("g_f", self.g_f)?;
        finite("g", self.g)?;
        finite("kappa", self.kappa)?;
        finite("gamma", self.gamma)?;
        finite("drive1", self.drive1)?;
        finite("drive2", self.drive2)?;
        finite("delta_tilde", self.delta_tilde)?;
        if self.kappa <= 0.0 {
            return Err(invalid("kappa", "must be positive"));
        }
        if self.gamma < 0.0 {
            return Err(invalid("gamma", "must be nonnegative"));
        }
        if self.g_f <= 0.0 {
            return Err(invalid("g_f", "must be positive"));
        }
        if self.g <= 0.0 {
            return Err(invalid("g", "must be positive"));
        }
        if self.n_max < 2 {
            return Err(PcsError::InvalidTruncation(format!(
                "n_max must be at least 2, got {}",
                self.n_max
            )));
        }
        if self.m_max < 1 {
            return Err(PcsError::InvalidTruncation(format!(
                "m_max must be at least 1, got {}",
                self.m_max
            )));
        }
        Ok(())
    }
}

/// Atomic state of a product basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom {
    Ground,
    Excited,
}

/// Index of `|n, s>` in the product basis.
pub fn basis_index(n: usize, atom: Atom) -> usize {
    2 * n
        + match atom {
            Atom::Ground => 0,
            Atom::Excited => 1,
        }
}

/// The operator set of the truncated space.
#[derive(Debug, Clone)]
pub struct Operators {
    pub n_max: usize,
    pub a: CMat,
    pub a_dag: CMat,
    pub sigma_minus: CMat,
    pub sigma_plus: CMat,
    /// (|e><e| − |g><g|)/2.
    pub sigma_z: CMat,
    /// Photon number a†a.
    pub number: CMat,
    /// Excited-state projector σ+σ−.
    pub excited: CMat,
    /// Excitation number σ+σ− + a†a.
    pub excitation: CMat,
}

impl Operators {
    pub fn dim(&self) -> usize {
        2 * (self.n_max + 1)
    }
}

pub fn make_operators(n_max: usize) -> Result<Operators> {
    if n_max < 2 {
        return Err(PcsError::InvalidTruncation(format!(
            "n_max must be at least 2, got {n_max}"
        )));
    }
    let d = 2 * (n_max + 1);
    let mut a = Mat::zeros(d, d);
    let mut sm = Mat::zeros(d, d);
    let mut sz = Mat::zeros(d, d);
    let mut num = Mat::zeros(d, d);
    let mut exc = Mat::zeros(d, d);
    for n in 0..=n_max {
        for atom in [Atom::Ground, Atom::Excited] {
            let k = basis_index(n, atom);
            if n > 0 {
                a[(basis_index(n - 1, atom), k)] = c64::new((n as f64).sqrt(), 0.0);
            }
            num[(k, k)] = c64::new(n as f64, 0.0);
            let excited = atom == Atom::Excited;
            sz[(k, k)] = c64::new(if excited { 0.5 } else { -0.5 }, 0.0);
            if excited {
                exc[(k, k)] = ONE;
            }
        }
        sm[(basis_index(n, Atom::Ground), basis_index(n, Atom::Excited))] = ONE;
    }
    let excitation = &num + &exc;
    Ok(Operators {
        n_max,
        a_dag: a.adjoint().to_owned(),
        a,
        sigma_plus: sm.adjoint().to_owned(),
        sigma_minus: sm,
        sigma_z: sz,
        number: num,
        excited: exc,
        excitation,
    })
}

/// Dressed eigenstate label of the Jaynes-Cummings ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DressedLabel {
    Ground,
    Plus(usize),
    Minus(usize),
}

impl DressedLabel {
    pub fn couplet(&self) -> usize {
        match *self {
            DressedLabel::Ground => 0,
            DressedLabel::Plus(n) | DressedLabel::Minus(n) => n,
        }
    }

    /// Column of this state in [`dressed_basis`].
    pub fn dressed_index(&self) -> usize {
        match *self {
            DressedLabel::Ground => 0,
            DressedLabel::Minus(n) => 2 * n - 1,
            DressedLabel::Plus(n) => 2 * n,
        }
    }

    fn check(&self, n_max: usize) -> Result<()> {
        match *self {
            DressedLabel::Ground => Ok(()),
            DressedLabel::Plus(0) | DressedLabel::Minus(0) => Err(PcsError::OutOfRange(
                "couplet index of a ± state must be at least 1".into(),
            )),
            DressedLabel::Plus(n) | DressedLabel::Minus(n) if n > n_max => Err(
                PcsError::OutOfRange(format!("couplet {n} exceeds n_max = {n_max}")),
            ),
            _ => Ok(()),
        }
    }

    /// Eigenvalue `n g_f ± √n g` of the undamped Hamiltonian.
    pub fn energy(&self, g_f: f64, g: f64) -> f64 {
        match *self {
            DressedLabel::Ground => 0.0,
            DressedLabel::Plus(n) => n as f64 * g_f + (n as f64).sqrt() * g,
            DressedLabel::Minus(n) => n as f64 * g_f - (n as f64).sqrt() * g,
        }
    }
}

impl fmt::Display for DressedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DressedLabel::Ground => write!(f, "0"),
            DressedLabel::Plus(n) => write!(f, "{n}+"),
            DressedLabel::Minus(n) => write!(f, "{n}-"),
        }
    }
}

impl FromStr for DressedLabel {
    type Err = PcsError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return Ok(DressedLabel::Ground);
        }
        let bad = || PcsError::OutOfRange(format!("cannot parse dressed label `{s}`"));
        let (digits, sign) = s.split_at(s.len().checked_sub(1).ok_or_else(bad)?);
        let n: usize = digits.parse().map_err(|_| bad())?;
        let label = match sign {
            "+" => DressedLabel::Plus(n),
            "-" => DressedLabel::Minus(n),
            _ => return Err(bad()),
        };
        if n == 0 {
            return Err(bad());
        }
        Ok(label)
    }
}

/// Product-basis coefficients of a dressed state as a `D x 1` column.
pub fn dressed_vector(label: DressedLabel, n_max: usize) -> Result<CMat> {
    label.check(n_max)?;
    let d = 2 * (n_max + 1);
    let mut v = Mat::zeros(d, 1);
    match label {
        DressedLabel::Ground => v[(0, 0)] = ONE,
        DressedLabel::Plus(n) | DressedLabel::Minus(n) => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let sign = if matches!(label, DressedLabel::Plus(_)) { 1.0 } else { -1.0 };
            // (i/√2)(|n−1,e> ± i|n,g>)
            v[(basis_index(n - 1, Atom::Excited), 0)] = I * s;
            v[(basis_index(n, Atom::Ground), 0)] = c64::new(-sign * s, 0.0);
        }
    }
    Ok(v)
}

/// Unitary whose columns are the dressed states ordered by
/// [`DressedLabel::dressed_index`]; the last column is the uncoupled
/// truncation edge state `|n_max, e>`.
pub fn dressed_basis(n_max: usize) -> Result<CMat> {
    if n_max < 2 {
        return Err(PcsError::InvalidTruncation(format!(
            "n_max must be at least 2, got {n_max}"
        )));
    }
    let d = 2 * (n_max + 1);
    let mut u = Mat::zeros(d, d);
    let mut put = |label: DressedLabel| -> Result<()> {
        let v = dressed_vector(label, n_max)?;
        let col = label.dressed_index();
        for r in 0..d {
            u[(r, col)] = v[(r, 0)];
        }
        Ok(())
    };
    put(DressedLabel::Ground)?;
    for n in 1..=n_max {
        put(DressedLabel::Minus(n))?;
        put(DressedLabel::Plus(n))?;
    }
    u[(basis_index(n_max, Atom::Excited), d - 1)] = ONE;
    Ok(u)
}

/// Drive term Υ(E) = iE(σ+ − σ−).
pub fn drive_operator(ops: &Operators, amplitude: f64) -> CMat {
    let e = c64::new(0.0, amplitude);
    Mat::from_fn(ops.dim(), ops.dim(), |i, j| {
        e * (ops.sigma_plus[(i, j)] - ops.sigma_minus[(i, j)])
    })
}

/// Undamped, undriven Hamiltonian in the frame rotating at the pump
/// frequency: `g_f N + i g (a†σ− − aσ+)` with N the excitation number.
pub fn jc_hamiltonian(params: &SystemParams, ops: &Operators) -> CMat {
    coupled_hamiltonian(ops, params.pump_detuning(), params.g)
}

/// `detuning N + i g (a†σ− − aσ+)`.
pub(crate) fn coupled_hamiltonian(ops: &Operators, detuning: f64, g: f64) -> CMat {
    let up = &ops.a_dag * &ops.sigma_minus;
    let down = &ops.a * &ops.sigma_plus;
    let ig = c64::new(0.0, g);
    Mat::from_fn(ops.dim(), ops.dim(), |i, j| {
        ops.excitation[(i, j)] * detuning + ig * (up[(i, j)] - down[(i, j)])
    })
}

/// Adds `−iκ a†a − i(γ/2)σ+σ−` to a Hermitian Hamiltonian.
pub(crate) fn add_damping(h: &mut CMat, params: &SystemParams, ops: &Operators) {
    for k in 0..ops.dim() {
        let loss = params.kappa * ops.number[(k, k)].re + 0.5 * params.gamma * ops.excited[(k, k)].re;
        h[(k, k)] -= c64::new(0.0, loss);
    }
}

/// Non-Hermitian effective Hamiltonian including the pump drive.
pub fn build_h_eff(params: &SystemParams) -> Result<CMat> {
    params.validate()?;
    let ops = make_operators(params.n_max)?;
    let drive = drive_operator(&ops, params.drive1);
    Ok(h_eff_with_drive(params, &ops, &drive))
}

pub(crate) fn h_eff_with_drive(params: &SystemParams, ops: &Operators, drive: &CMat) -> CMat {
    let mut h = &jc_hamiltonian(params, ops) + drive;
    add_damping(&mut h, params, ops);
    h
}
