//! Tridiagonal kernels: a pre-factored complex Thomas solver for the
//! Crank–Nicolson system, and Sturm-sequence bisection plus inverse
//! iteration for the lowest eigenpairs of a real symmetric tridiagonal
//! matrix with constant off-diagonal.

use num_complex::Complex64;

use crate::{Error, Result};

/// LU factors of a complex tridiagonal matrix with constant off-diagonals
/// `lower` (sub) and `upper` (super).
#[derive(Debug, Clone)]
pub(crate) struct ComplexTridiagonalLu {
    /// Modified super-diagonal `c'ᵢ`.
    c_prime: Vec<Complex64>,
    /// Reciprocal pivots.
    inv_pivot: Vec<Complex64>,
    lower: Complex64,
}

impl ComplexTridiagonalLu {
    pub fn factor(diag: &[Complex64], lower: Complex64, upper: Complex64) -> Result<Self> {
        let n = diag.len();
        let mut c_prime = vec![Complex64::default(); n];
        let mut inv_pivot = vec![Complex64::default(); n];
        let scale = diag
            .iter()
            .map(|d| d.norm())
            .fold(lower.norm() + upper.norm(), f64::max);
        let mut prev_c = Complex64::default();
        for i in 0..n {
            let pivot = diag[i] - lower * prev_c;
            if !(pivot.norm() > f64::EPSILON * scale) || !pivot.re.is_finite() {
                return Err(Error::SingularSystem { row: i });
            }
            inv_pivot[i] = pivot.inv();
            prev_c = upper * inv_pivot[i];
            c_prime[i] = prev_c;
        }
        Ok(ComplexTridiagonalLu {
            c_prime,
            inv_pivot,
            lower,
        })
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.c_prime.len());
        let mut prev = Complex64::default();
        for (r, inv) in rhs.iter_mut().zip(&self.inv_pivot) {
            prev = (*r - self.lower * prev) * inv;
            *r = prev;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.c_prime[i] * next;
        }
    }
}

/// Number of eigenvalues strictly below `x`.
pub(crate) fn sturm_count(diag: &[f64], off: f64, x: f64) -> usize {
    let off_sq = off * off;
    let mut count = 0;
    let mut q = 1.0;
    for (i, &d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off_sq / q };
        if q == 0.0 {
            q = -f64::EPSILON * (d.abs() + off.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) by bisection on the Sturm count.
pub(crate) fn kth_eigenvalue(diag: &[f64], off: f64, k: usize) -> Result<f64> {
    let n = diag.len();
    if k >= n {
        return Err(Error::NonConvergence(format!(
            "requested eigenvalue {k} of a {n}×{n} matrix"
        )));
    }
    let spread = 2.0 * off.abs();
    let mut lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - spread;
    let mut hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + spread;
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
            return Ok(mid);
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "bisection for eigenvalue {k} did not converge"
    )))
}

/// Solves `(T − shift·I) x = rhs` for the symmetric tridiagonal `T`, using
/// Gaussian elimination with partial pivoting (the system is indefinite
/// near an eigenvalue).
pub(crate) fn shifted_solve(diag: &[f64], off: f64, shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Row i of the upper-triangular factor holds (u0, u1, u2) for columns
    // i, i+1, i+2.
    let mut u0: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut u1 = vec![off; n];
    let mut u2 = vec![0.0; n];
    let mut b = rhs.to_vec();
    let tiny = f64::EPSILON * (diag.iter().fold(0.0f64, |m, d| m.max(d.abs())) + off.abs());
    let tiny = tiny.max(f64::MIN_POSITIVE);
    for i in 0..n.saturating_sub(1) {
        let sub = off;
        if u0[i].abs() >= sub.abs() {
            let piv = if u0[i] == 0.0 { tiny } else { u0[i] };
            u0[i] = piv;
            let m = sub / piv;
            u0[i + 1] -= m * u1[i];
            // u1[i + 1] unchanged apart from the fill from u2[i] (zero here).
            u1[i + 1] -= m * u2[i];
            b[i + 1] -= m * b[i];
        } else {
            // Swap rows i and i+1.
            let m = u0[i] / sub;
            let (r0, r1, r2) = (sub, u0[i + 1], if i + 1 < n - 1 { u1[i + 1] } else { 0.0 });
            let (s1, s2) = (u1[i], u2[i]);
            u0[i] = r0;
            u1[i] = r1;
            u2[i] = r2;
            u0[i + 1] = s1 - m * r1;
            if i + 1 < n - 1 {
                u1[i + 1] = s2 - m * r2;
            }
            let bi = b[i];
            b[i] = b[i + 1];
            b[i + 1] = bi - m * b[i];
        }
    }
    if n > 0 && u0[n - 1] == 0.0 {
        u0[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= u2[i] * x[i + 2];
        }
        x[i] = s / u0[i];
    }
    x
}

/// Eigenvector for `eigenvalue` by inverse iteration, unit Euclidean norm.
pub(crate) fn inverse_iteration(diag: &[f64], off: f64, eigenvalue: f64) -> Vec<f64> {
    let n = diag.len();
    // Deterministic, non-symmetric start so no eigenvector is missed.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).fract())
        .collect();
    normalize(&mut v);
    for _ in 0..3 {
        v = shifted_solve(diag, off, eigenvalue, &v);
        normalize(&mut v);
    }
    v
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}
