use nalgebra::{ComplexField, DMatrix, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use super::{CMat, RMat, PSD_CLIP};
use crate::error::{Error, Result};

pub fn to_complex(a: &RMat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Frobenius inner product `Tr(AᵀB)` of two real matrices.
pub fn frobenius_inner(a: &RMat, b: &RMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn max_abs<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.iter().map(|x| x.clone().modulus()).fold(0.0, f64::max)
}

pub fn try_eigenvalues(a: &RMat) -> Result<Vec<Complex64>> {
    let schur = Schur::try_new(a.clone(), 1e-15, 10_000).ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &RMat) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(try_eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Largest singular value.
pub fn opnorm2<T: ComplexField<RealField = f64>>(k: &DMatrix<T>) -> f64 {
    if k.is_empty() {
        return 0.0;
    }
    k.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn hermitian_part<T: ComplexField<RealField = f64>>(k: &DMatrix<T>) -> DMatrix<T> {
    (k + k.adjoint()) * T::from_real(0.5)
}

/// Eigenvalues of a Hermitian matrix (the anti-Hermitian part is ignored).
pub fn hermitian_eigenvalues<T: ComplexField<RealField = f64>>(k: &DMatrix<T>) -> Vec<f64> {
    SymmetricEigen::new(hermitian_part(k))
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

fn clipped_eigen<T: ComplexField<RealField = f64>>(
    k: &DMatrix<T>,
) -> Result<(DMatrix<T>, Vec<f64>, f64)> {
    let eig = SymmetricEigen::new(hermitian_part(k));
    let scale = opnorm2(k).max(f64::MIN_POSITIVE);
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_CLIP * scale {
        return Err(Error::NotPsd { min_eig });
    }
    let vals = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    Ok((eig.eigenvectors, vals, scale))
}

fn reassemble<T: ComplexField<RealField = f64>>(v: &DMatrix<T>, d: &[f64]) -> DMatrix<T> {
    let mut scaled = v.clone();
    for (j, &s) in d.iter().enumerate() {
        scaled.column_mut(j).scale_mut(s);
    }
    &scaled * v.adjoint()
}

/// Principal square root of a symmetric/Hermitian PSD matrix; eigenvalues
/// within the clipping band below zero are set to zero.
pub fn sqrt_psd<T: ComplexField<RealField = f64>>(k: &DMatrix<T>) -> Result<DMatrix<T>> {
    if k.is_empty() {
        return Ok(k.clone());
    }
    let (v, d, _) = clipped_eigen(k)?;
    let roots: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    Ok(reassemble(&v, &roots))
}

/// Inverse principal square root of a positive definite matrix.
pub fn inv_sqrt_psd<T: ComplexField<RealField = f64>>(k: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (v, d, scale) = clipped_eigen(k)?;
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= PSD_CLIP * scale {
        return Err(Error::NotPsd { min_eig: min });
    }
    let inv: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    Ok(reassemble(&v, &inv))
}

/// Lower-triangular `L` with `LLᵀ = K` for a real symmetric PSD `K`, robust to
/// rank deficiency: the clipped eigen-factor is re-triangularised by QR.
pub fn psd_cholesky(k: &RMat) -> Result<RMat> {
    let n = k.nrows();
    if n == 0 {
        return Ok(k.clone());
    }
    let (v, d, _) = clipped_eigen(k)?;
    let roots: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let mut f = v;
    for (j, &s) in roots.iter().enumerate() {
        f.column_mut(j).scale_mut(s);
    }
    // F Fᵀ = K and Fᵀ = QR give K = RᵀR.
    let r = f.transpose().qr().r();
    let mut l = r.transpose();
    for j in 0..n {
        if l[(j, j)] < 0.0 {
            l.column_mut(j).neg_mut();
        }
    }
    Ok(l)
}

/// Eigenvalues and unit-norm eigenvectors of a real matrix.
///
/// Eigenvectors of a conjugate pair are returned as exact conjugates, and a
/// cluster of `k` (numerically) equal eigenvalues gets `k` orthonormal vectors
/// spanning the null space of `A - λI`.
pub fn eigenvectors(a: &RMat) -> Result<(Vec<Complex64>, CMat)> {
    let n = a.nrows();
    let vals = try_eigenvalues(a)?;
    let scale = a.norm().max(1.0);
    let tol = 1e-8 * scale;
    let mut vecs = CMat::zeros(n, n);
    let mut done = vec![false; n];
    let ac = to_complex(a);

    for i in 0..n {
        if done[i] {
            continue;
        }
        let lam = vals[i];
        let cluster: Vec<usize> = (0..n)
            .filter(|&j| !done[j] && (vals[j] - lam).norm() <= tol)
            .collect();
        let partner: Vec<usize> = if lam.im.abs() > tol {
            (0..n)
                .filter(|&j| !done[j] && !cluster.contains(&j) && (vals[j] - lam.conj()).norm() <= tol)
                .collect()
        } else {
            Vec::new()
        };
        let shifted = &ac - CMat::identity(n, n) * lam;
        let svd = SVD::new(shifted, false, true);
        let vt = svd.v_t.ok_or(Error::EigenFailure)?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        for (slot, &col) in cluster.iter().enumerate() {
            let row = order[slot];
            let v: Vec<Complex64> = vt.row(row).iter().map(|z| z.conj()).collect();
            for (r, z) in v.iter().enumerate() {
                vecs[(r, col)] = *z;
            }
            done[col] = true;
        }
        for (slot, &col) in partner.iter().enumerate() {
            let src = cluster[slot.min(cluster.len() - 1)];
            for r in 0..n {
                vecs[(r, col)] = vecs[(r, src)].conj();
            }
            done[col] = true;
        }
    }
    for mut c in vecs.column_iter_mut() {
        let nrm = c.norm();
        if nrm > 0.0 {
            c.unscale_mut(nrm);
        }
    }
    Ok((vals, vecs))
}
