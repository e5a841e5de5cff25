//! Algebraic Lyapunov equations `AX + XAᵀ + Q = 0`.
//!
//! Solved by Kronecker vectorisation: `(I⊗A + A⊗I) vec X = -vec Q`, an
//! `n²×n²` dense LU solve. The cost is O(n⁶) in time and O(n⁴) in memory,
//! which is fine for the state dimensions met here (n up to about 20).

use super::{linalg, RMat};
use crate::error::{Error, Result};

/// Hurwitz threshold on the spectral abscissa.
pub const HURWITZ_MARGIN: f64 = -1e-10;

/// Frobenius norm of `AX + XAᵀ + Q`.
pub fn lyap_residual(a: &RMat, x: &RMat, q: &RMat) -> f64 {
    (a * x + x * a.transpose() + q).norm()
}

/// Solves `AX + XAᵀ + Q = 0` for Hurwitz `A`.
pub fn lyap_solve(a: &RMat, q: &RMat) -> Result<RMat> {
    let n = a.nrows();
    if !a.is_square() || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov equation with A {}x{} and Q {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let eig = linalg::try_eigenvalues(a)?;
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if n > 0 && abscissa >= HURWITZ_MARGIN {
        return Err(Error::NotHurwitz { abscissa });
    }
    let mut gap = f64::INFINITY;
    for x in &eig {
        for y in &eig {
            gap = gap.min((x + y).norm());
        }
    }
    if gap < 1e-12 {
        return Err(Error::IllConditioned { gap });
    }

    let nn = n * n;
    let mut k = RMat::zeros(nn, nn);
    // Column-major vec: vec(AX) = (I⊗A) vec X, vec(XAᵀ) = (A⊗I) vec X.
    for blk in 0..n {
        for i in 0..n {
            for j in 0..n {
                k[(blk * n + i, blk * n + j)] += a[(i, j)];
                k[(blk * n + i, j * n + i)] += a[(blk, j)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_iterator(nn, q.iter().map(|v| -v));
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::IllConditioned { gap })?;
    Ok(RMat::from_column_slice(n, n, sol.as_slice()))
}

/// Solves `(A + cI)X + X(A + cI)ᵀ + Q = 0`.
pub fn lyap_solve_shifted(a: &RMat, shift: f64, q: &RMat) -> Result<RMat> {
    let n = a.nrows();
    lyap_solve(&(a + RMat::identity(n, n) * shift), q)
}
