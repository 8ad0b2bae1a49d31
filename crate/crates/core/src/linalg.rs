//! Dense complex matrix helpers on top of faer.

use faer::prelude::*;
use faer::{c64, Mat, MatRef};

/// Dense complex matrix.
pub type CMat = Mat<c64>;

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub(crate) const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn zeros(n: usize) -> CMat {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn dagger(m: MatRef<'_, c64>) -> CMat {
    m.adjoint().to_owned()
}

pub fn trace(m: MatRef<'_, c64>) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Frobenius norm.
pub fn frobenius(m: MatRef<'_, c64>) -> f64 {
    m.norm_l2()
}

pub fn max_abs(m: MatRef<'_, c64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// Column-stacked vectorization, element `(i, j)` goes to `i + d j`.
pub fn vectorize(m: MatRef<'_, c64>) -> CMat {
    let d = m.nrows();
    Mat::from_fn(d * m.ncols(), 1, |k, _| m[(k % d, k / d)])
}

/// Inverse of [`vectorize`] for a `d x d` matrix.
pub fn unvectorize(v: MatRef<'_, c64>, d: usize) -> CMat {
    assert_eq!(v.nrows(), d * d, "vector length must be d^2");
    Mat::from_fn(d, d, |i, j| v[(i + d * j, 0)])
}

/// Superoperator matrix of `rho -> a rho b` in the column-stacked convention.
pub fn sandwich(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> CMat {
    let d = a.nrows();
    let mut s = Mat::zeros(d * d, d * d);
    for l in 0..d {
        for j in 0..d {
            let blj = b[(l, j)];
            if blj == ZERO {
                continue;
            }
            for k in 0..d {
                for i in 0..d {
                    let aik = a[(i, k)];
                    if aik != ZERO {
                        s[(i + d * j, k + d * l)] += aik * blj;
                    }
                }
            }
        }
    }
    s
}

/// Index map of the transposition `vec(X) -> vec(X^T)`.
pub fn transpose_index(k: usize, d: usize) -> usize {
    (k / d) + d * (k % d)
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade approximant.
pub fn expm(a: MatRef<'_, c64>) -> CMat {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = c64::new(0.5f64.powi(s), 0.0);
    let a1 = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let id = identity(n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let lin = |c: [f64; 4], m0: &CMat, m1: &CMat, m2: &CMat, m3: &CMat| {
        Mat::from_fn(n, n, |i, j| {
            m0[(i, j)] * c[0] + m1[(i, j)] * c[1] + m2[(i, j)] * c[2] + m3[(i, j)] * c[3]
        })
    };
    let zero = zeros(n);
    let u_inner = lin([B[13], B[11], B[9], 0.0], &a6, &a4, &a2, &zero);
    let u_outer = lin([B[7], B[5], B[3], B[1]], &a6, &a4, &a2, &id);
    let u = &a1 * &(&(&a6 * &u_inner) + &u_outer);
    let v_inner = lin([B[12], B[10], B[8], 0.0], &a6, &a4, &a2, &zero);
    let v_outer = lin([B[6], B[4], B[2], B[0]], &a6, &a4, &a2, &id);
    let v = &(&a6 * &v_inner) + &v_outer;
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d: usize, seed: u64) -> CMat {
        let mut x = seed;
        let mut next = move || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        Mat::from_fn(d, d, |_, _| c64::new(next(), next()))
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let (a, b, x) = (sample(4, 1), sample(4, 2), sample(4, 3));
        let direct = &(&a * &x) * &b;
        let via = unvectorize((&sandwich(a.as_ref(), b.as_ref()) * &vectorize(x.as_ref())).as_ref(), 4);
        assert!(frobenius((&direct - &via).as_ref()) < 1e-13);
    }

    #[test]
    fn transpose_index_is_involution() {
        for k in 0..25 {
            assert_eq!(transpose_index(transpose_index(k, 5), 5), k);
        }
        let x = sample(3, 9);
        let v = vectorize(x.as_ref());
        let vt = vectorize(x.transpose());
        for k in 0..9 {
            assert_eq!(vt[(k, 0)], v[(transpose_index(k, 3), 0)]);
        }
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let mut a = zeros(3);
        a[(0, 0)] = c64::new(-1.0, 2.0);
        a[(1, 1)] = c64::new(3.0, 0.0);
        a[(0, 2)] = c64::new(5.0, 0.0);
        let e = expm(a.as_ref());
        assert!((e[(0, 0)] - c64::new(-1.0, 2.0).exp()).norm() < 1e-13);
        assert!((e[(1, 1)] - c64::new(3.0f64.exp(), 0.0)).norm() < 1e-12);
        // e^{a} for a = diag(z, 3, 0) + 5 E_02 has (0,2) = 5 (e^z - 1)/z
        let z = c64::new(-1.0, 2.0);
        let expect = (z.exp() - ONE) / z * 5.0;
        assert!((e[(0, 2)] - expect).norm() < 1e-12);
    }

    #[test]
    fn expm_group_property() {
        let a = sample(6, 11);
        let scaled = Mat::from_fn(6, 6, |i, j| a[(i, j)] * 8.0);
        let half = Mat::from_fn(6, 6, |i, j| a[(i, j)] * 4.0);
        let full = expm(scaled.as_ref());
        let h = expm(half.as_ref());
        let sq = &h * &h;
        assert!(frobenius((&full - &sq).as_ref()) < 1e-9 * frobenius(full.as_ref()));
    }
}
