//! Globally adaptive Gauss-Kronrod (7, 15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{PcsError, Result};

/// Stopping rule: finish once the error estimate is below `abs_tol` or
/// below `rel_tol · |integral|`, whichever is reached first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-8,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 21-point Gauss-Kronrod panel with the QUADPACK error scaling.
fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut values = [(0.0, 0.0); 7];
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = (f(c - x), f(c + x));
        values[j] = pair;
        k += WGK[j] * (pair.0 + pair.1);
        if j % 2 == 1 {
            g += WG[j / 2] * (pair.0 + pair.1);
        }
    }
    let mean = 0.5 * k;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((values[j].0 - mean).abs() + (values[j].1 - mean).abs());
    }
    let asc = asc * h.abs();
    let mut error = ((k - g) * h).abs();
    if asc > 0.0 && error > 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    Segment {
        a,
        b,
        value: k * h,
        error,
    }
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    adapt(&mut f, a, b, opts).map(|(result, _)| result)
}

/// Panel `(a_i, b_i, ∫)` of an adaptive partition.
pub type Panel = (f64, f64, f64);

/// Integrates `f` over `[a, b]` and returns the final panels in ascending
/// order.
pub fn partition<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<(QuadResult, Vec<Panel>)> {
    let (result, heap) = adapt(&mut f, a, b, opts)?;
    let mut panels: Vec<Panel> = heap.into_iter().map(|s| (s.a, s.b, s.value)).collect();
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok((result, panels))
}

fn adapt<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, opts: &QuadOptions) -> Result<(QuadResult, BinaryHeap<Segment>)> {
    let mut heap = BinaryHeap::new();
    if a == b {
        let result = QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
        return Ok((result, heap));
    }
    let first = kronrod(f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut evaluations = 21;
    heap.push(first);
    loop {
        if !value.is_finite() || !error.is_finite() {
            return Err(PcsError::QuadratureNonConvergence { residual: error });
        }
        if error <= opts.abs_tol || error <= opts.rel_tol * value.abs() {
            let result = QuadResult {
                value,
                error,
                evaluations,
            };
            return Ok((result, heap));
        }
        if heap.len() >= opts.max_intervals {
            return Err(PcsError::QuadratureNonConvergence { residual: error });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(PcsError::QuadratureNonConvergence { residual: error });
        }
        let left = kronrod(f, worst.a, mid);
        let right = kronrod(f, mid, worst.b);
        evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // resum to keep the running totals free of drift
            value = heap.iter().map(|s| s.value).sum();
            error = heap.iter().map(|s| s.error).sum();
        }
    }
}
