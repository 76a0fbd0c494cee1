//! Complex vector/matrix helpers sized for the precoding problem: long
//! channel vectors, small (≤ 8×8) Hermitian Gram systems.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at column {col})")]
    NotPositiveDefinite { col: usize, pivot: f64 },
}

/// Hermitian inner product `a^H b`.
#[inline]
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

#[inline]
pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Gram matrix `A^H A` (k×k, row-major) of a column-major N×k matrix.
pub fn gram(cols: &[&[Complex64]]) -> Vec<Complex64> {
    let k = cols.len();
    let mut g = vec![Complex64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in i..k {
            let v = dot_conj(cols[i], cols[j]);
            g[i * k + j] = v;
            g[j * k + i] = v.conj();
        }
    }
    g
}

/// In-place Cholesky factorization of a Hermitian positive-definite matrix
/// (row-major k×k). On success the lower triangle holds L with `A = L L^H`.
pub fn cholesky(a: &mut [Complex64], k: usize) -> Result<(), LinalgError> {
    for j in 0..k {
        let mut d = a[j * k + j].re;
        for p in 0..j {
            d -= a[j * k + p].norm_sqr();
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { col: j, pivot: d });
        }
        let ljj = d.sqrt();
        a[j * k + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p].conj();
            }
            a[i * k + j] = s / ljj;
        }
    }
    Ok(())
}

/// Solve `A x = b` given the Cholesky factor L (lower triangle of `a`),
/// overwriting `b` with the solution.
pub fn cholesky_solve(a: &[Complex64], k: usize, b: &mut [Complex64]) {
    // Forward: L y = b.
    for i in 0..k {
        let mut s = b[i];
        for p in 0..i {
            s -= a[i * k + p] * b[p];
        }
        b[i] = s / a[i * k + i].re;
    }
    // Backward: L^H x = y.
    for i in (0..k).rev() {
        let mut s = b[i];
        for p in (i + 1)..k {
            s -= a[p * k + i].conj() * b[p];
        }
        b[i] = s / a[i * k + i].re;
    }
}

/// Crude condition estimate of the factored matrix from the Cholesky
/// diagonal: cond(A) ≳ (max L_ii / min L_ii)². Good enough to trigger the
/// degenerate-drop policy.
pub fn cholesky_cond_estimate(a: &[Complex64], k: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..k {
        let d = a[i * k + i].re;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).powi(2)
    }
}
