//! Random physically realizable models for property tests and benchmarks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matfun::RMat;
use crate::model::{build_model, CcrMatrix, OqhoModel, PhysicalParams};

/// Attempts before giving up on drawing a Hurwitz model.
pub const MAX_ATTEMPTS: usize = 100_000;

fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> RMat {
    RMat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Symmetric matrix with unit-variance entries.
pub fn random_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RMat {
    let g = normal_matrix(rng, n, n);
    let mut s = RMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            s[(i, j)] = g[(i, j)];
            s[(j, i)] = g[(i, j)];
        }
    }
    s
}

/// Symmetric positive definite matrix `GGᵀ/n + I/2`.
pub fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RMat {
    let g = normal_matrix(rng, n, n);
    let mut s = &g * g.transpose() / n as f64 + RMat::identity(n, n) * 0.5;
    s = (&s + s.transpose()) * 0.5;
    s
}

/// Random antisymmetric CCR matrix, obtained from `½𝐉⊗I` by a random
/// near-identity congruence and rejected if badly conditioned.
pub fn random_ccr<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CcrMatrix> {
    let base = crate::model::block_symplectic(n) * 0.5;
    for _ in 0..MAX_ATTEMPTS {
        let s = RMat::identity(n, n) + normal_matrix(rng, n, n) * 0.3;
        let t = &s * &base * s.transpose();
        let theta = (&t - t.transpose()) * 0.5;
        if let Ok(ccr) = CcrMatrix::new(theta) {
            let sv = ccr.matrix().singular_values();
            let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
            if min > 0.1 {
                return Ok(ccr);
            }
        }
    }
    Err(Error::InvalidArgument("could not draw a CCR matrix".into()))
}

/// Draws `R` (symmetric, entries scaled by `energy_scale`) and `M`
/// (unit-variance entries) until the drift is Hurwitz.
pub fn random_model_scaled<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    energy_scale: f64,
) -> Result<OqhoModel> {
    let ccr = random_ccr(rng, n)?;
    for _ in 0..MAX_ATTEMPTS {
        let energy = random_symmetric(rng, n) * energy_scale;
        let coupling = normal_matrix(rng, m, n);
        let params = PhysicalParams::new(energy, coupling)?;
        let model = build_model(ccr.clone(), params)?;
        if model.is_hurwitz() && model.abscissa() < -1e-3 {
            return Ok(model);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no Hurwitz model found for n={n}, m={m}"
    )))
}

/// Unit-variance `R` and `M`, rejecting non-Hurwitz drifts.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Result<OqhoModel> {
    random_model_scaled(rng, n, m, 1.0)
}
