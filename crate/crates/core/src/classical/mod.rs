//! Classical complex Gaussian diffusion `dζ = Aζ dt + (1/√2) BΩ dω` sharing
//! the two-point covariance of the quantum model, simulated by exact
//! discretization of the real augmented state `ϑ = (ξ, η)`.

mod mc;

pub use mc::{
    mc_quadform_variance, mc_rs_rate, mc_rs_rate_with_step, mc_stationary_stats, McEstimate,
    McMatrixEstimate, StationaryStats, MIN_PATHS,
};

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian::{gramian_steady, SpectralDensity};
use crate::matfun::{
    expm, frobenius_inner, hermitian_eigenvalues, integrate_realline_with, opnorm2, psd_cholesky,
    sqrt_psd, to_complex, CMat, QuadratureSpec, RMat, PSD_CLIP,
};
use crate::model::OqhoModel;
use crate::quartic::WeightMatrix;

/// Invariant covariance `½[[P, −Θ], [Θ, P]]` of `(ξ, η)` together with its
/// complex reduction `E ζζ* = P + iΘ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalCovariance {
    pub augmented: RMat,
    pub complex: CMat,
}

pub fn invariant_classical_cov(model: &OqhoModel) -> Result<ClassicalCovariance> {
    let steady = gramian_steady(model)?;
    let p = steady.gramian();
    let theta = model.theta();
    let n = model.n();
    let mut aug = RMat::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(p * 0.5));
    aug.view_mut((n, n), (n, n)).copy_from(&(p * 0.5));
    aug.view_mut((0, n), (n, n)).copy_from(&(theta * -0.5));
    aug.view_mut((n, 0), (n, n)).copy_from(&(theta * 0.5));
    Ok(ClassicalCovariance {
        augmented: aug,
        complex: steady.quantum_cov().clone(),
    })
}

fn block_diag2(a: &RMat) -> RMat {
    let n = a.nrows();
    let mut out = RMat::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (n, n)).copy_from(a);
    out
}

/// One exact step `ϑ ← Φϑ + w` with `w ~ N(0, Σ(h))`,
/// `Σ(h) = P_aug − Φ P_aug Φᵀ`.
#[derive(Debug, Clone)]
pub struct AugmentedStepper {
    h: f64,
    phi_aug: RMat,
    noise_cov: RMat,
    noise_chol: RMat,
    initial_chol: RMat,
}

impl AugmentedStepper {
    pub fn new(model: &OqhoModel, h: f64) -> Result<Self> {
        let cov = invariant_classical_cov(model)?;
        Self::from_drift(model.drift(), &cov.augmented, h)
    }

    /// Stepper for drift `I₂⊗A` and stationary covariance `p_aug`.
    pub fn from_drift(drift: &RMat, p_aug: &RMat, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::StepperConstructionFailure(format!("step {h} must be positive")));
        }
        if p_aug.nrows() != 2 * drift.nrows() || !p_aug.is_square() {
            return Err(Error::DimensionMismatch("augmented covariance".into()));
        }
        let phi = block_diag2(&expm(drift, h)?);
        let raw = p_aug - &phi * p_aug * phi.transpose();
        let noise = (&raw + raw.transpose()) * 0.5;
        let floor = hermitian_eigenvalues(&noise).into_iter().fold(f64::INFINITY, f64::min);
        if floor < -PSD_CLIP * opnorm2(p_aug).max(1.0) {
            return Err(Error::StepperConstructionFailure(format!(
                "one-step noise covariance has eigenvalue {floor:.3e}"
            )));
        }
        let noise_chol = psd_cholesky(&noise)
            .map_err(|e| Error::StepperConstructionFailure(e.to_string()))?;
        let initial_chol = psd_cholesky(p_aug)
            .map_err(|e| Error::StepperConstructionFailure(e.to_string()))?;
        Ok(Self {
            h,
            phi_aug: phi,
            noise_cov: noise,
            noise_chol,
            initial_chol,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn phi(&self) -> &RMat {
        &self.phi_aug
    }

    pub fn noise_cov(&self) -> &RMat {
        &self.noise_cov
    }

    pub fn noise_chol(&self) -> &RMat {
        &self.noise_chol
    }

    pub fn state_dim(&self) -> usize {
        self.phi_aug.nrows()
    }

    fn gaussian(chol: &RMat, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(chol.ncols(), |_, _| StandardNormal.sample(rng));
        chol * z
    }

    /// Draw from the invariant law.
    pub fn initial(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        Self::gaussian(&self.initial_chol, rng)
    }

    pub fn advance(&self, state: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
        &self.phi_aug * state + Self::gaussian(&self.noise_chol, rng)
    }

    /// Allocation-free [`advance`](Self::advance); `scratch` holds at least
    /// twice the state dimension.
    pub fn advance_in_place(&self, state: &mut [f64], scratch: &mut [f64], rng: &mut ChaCha8Rng) {
        let d = state.len();
        let (z, next) = scratch.split_at_mut(d);
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let phi = self.phi_aug.as_slice();
        let chol = self.noise_chol.as_slice();
        next[..d].fill(0.0);
        // Column-major storage: accumulate column by column.
        for j in 0..d {
            let (sj, zj) = (state[j], z[j]);
            let (pc, lc) = (&phi[j * d..(j + 1) * d], &chol[j * d..(j + 1) * d]);
            for i in 0..d {
                next[i] += pc[i] * sj + lc[i] * zj;
            }
        }
        state.copy_from_slice(&next[..d]);
    }
}

/// Generator for path `index` of a run seeded with `seed`.
pub fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Stored trajectories of `ϑ`, laid out path-major then step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub h: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    n: usize,
    states: Vec<f64>,
}

impl PathBatch {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let width = 2 * self.n;
        let start = (path * (self.steps + 1) + step) * width;
        &self.states[start..start + width]
    }

    /// `ζ = ξ + iη`.
    pub fn zeta(&self, path: usize, step: usize) -> Vec<Complex64> {
        let s = self.state(path, step);
        (0..self.n).map(|j| Complex64::new(s[j], s[self.n + j])).collect()
    }
}

pub fn simulate(model: &OqhoModel, h: f64, steps: usize, paths: usize, seed: u64) -> Result<PathBatch> {
    model.require_hurwitz()?;
    let stepper = AugmentedStepper::new(model, h)?;
    let per_path = crate::par::map_range(paths, |p| {
        let mut rng = path_rng(seed, p);
        let mut x = stepper.initial(&mut rng).as_slice().to_vec();
        let mut scratch = vec![0.0; 2 * x.len()];
        let mut out = Vec::with_capacity((steps + 1) * x.len());
        out.extend_from_slice(&x);
        for _ in 0..steps {
            stepper.advance_in_place(&mut x, &mut scratch, &mut rng);
            out.extend_from_slice(&x);
        }
        out
    });
    Ok(PathBatch {
        h,
        steps,
        paths,
        seed,
        n: model.n(),
        states: per_path.concat(),
    })
}

/// Stationary variance `⟨Π, PΠP − ΘΠΘ⟩` of `ζ*Πζ`.
pub fn classical_quadform_variance(model: &OqhoModel, pi: &WeightMatrix) -> Result<f64> {
    pi.check_dim(model)?;
    let steady = gramian_steady(model)?;
    let (p, theta, w) = (steady.gramian(), model.theta(), pi.matrix());
    Ok(frobenius_inner(w, &(p * w * p - theta * w * theta)))
}

/// `√Π D(λ) √Π` for the classical rate integrands.
struct WeightedDensity<'a> {
    density: SpectralDensity<'a>,
    root: CMat,
}

impl<'a> WeightedDensity<'a> {
    fn new(model: &'a OqhoModel, pi: &WeightMatrix) -> Result<Self> {
        pi.check_dim(model)?;
        Ok(Self {
            density: SpectralDensity::new(model)?,
            root: to_complex(&sqrt_psd(pi.matrix())?),
        })
    }

    fn at(&self, lambda: f64) -> Result<CMat> {
        let d = self.density.density(lambda)?;
        Ok(&self.root * d * &self.root)
    }

    fn top_eigenvalue(&self, lambda: f64) -> f64 {
        self.at(lambda)
            .map(|k| hermitian_eigenvalues(&k).into_iter().fold(0.0, f64::max))
            .unwrap_or(f64::INFINITY)
    }
}

/// `sup_λ λ_max(√Π D(λ) √Π)`, by a grid scan with golden-section refinement.
fn peak_density(wd: &WeightedDensity, scale: f64) -> f64 {
    let grid = 4001;
    let us: Vec<f64> = (0..grid)
        .map(|k| -0.5 * PI + PI * (k as f64 + 0.5) / grid as f64)
        .collect();
    let values = crate::par::map_slice(&us, |&u| wd.top_eigenvalue(scale * u.tan()));
    let (best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
    let du = PI / grid as f64;
    let (mut lo, mut hi) = (us[best] - du, us[best] + du);
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |u: f64| wd.top_eigenvalue(scale * u.tan());
    for _ in 0..60 {
        let a = hi - golden * (hi - lo);
        let b = lo + golden * (hi - lo);
        if eval(a) > eval(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    values[best].max(eval(0.5 * (lo + hi))).max(wd.top_eigenvalue(0.0))
}

/// Upper end `2/‖√Π G Ω‖²_∞ = 1/sup_λ λ_max(√Π D √Π)` of the admissible `θ`.
pub fn classical_theta_limit(model: &OqhoModel, pi: &WeightMatrix) -> Result<f64> {
    let wd = WeightedDensity::new(model, pi)?;
    let peak = peak_density(&wd, crate::cumulants::frequency_scale(model));
    Ok(if peak > 0.0 { 1.0 / peak } else { f64::INFINITY })
}

fn check_theta(theta: f64, limit: f64) -> Result<()> {
    if theta < 0.0 {
        return Err(Error::NegativeTheta(theta));
    }
    if theta >= limit {
        return Err(Error::ThetaOutOfRange { theta, limit });
    }
    Ok(())
}

/// `−∫ ln det(I − θ√ΠD√Π) dλ`.
fn log_det_integral(model: &OqhoModel, pi: &WeightMatrix, theta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let wd = WeightedDensity::new(model, pi)?;
    check_theta(theta, classical_theta_limit(model, pi)?)?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let spec = QuadratureSpec {
        scale: crate::cumulants::frequency_scale(model),
        ..*spec
    };
    let integrand = |lambda: f64| -> f64 {
        match wd.at(lambda) {
            Ok(k) => hermitian_eigenvalues(&k)
                .into_iter()
                .map(|e| -(-theta * e).ln_1p())
                .sum(),
            Err(_) => f64::NAN,
        }
    };
    integrate_realline_with(integrand, &spec)
}

/// Rate with the `1/4π` prefactor in front of the log-determinant integral.
pub fn classical_rs_rate_paper(
    model: &OqhoModel,
    pi: &WeightMatrix,
    theta: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(log_det_integral(model, pi, theta, spec)? / (4.0 * PI))
}

/// Rate of the diffusion itself: `1/2π` prefactor, so the slope at `θ = 0` is
/// the stationary mean `⟨Π, P⟩`.
pub fn classical_rs_rate_sde(
    model: &OqhoModel,
    pi: &WeightMatrix,
    theta: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(log_det_integral(model, pi, theta, spec)? / (2.0 * PI))
}

/// Truncated power series of [`classical_rs_rate_paper`] and a bound on the
/// neglected terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEstimate {
    pub value: f64,
    pub remainder_bound: f64,
}

/// `(1/4π) Σ_{r≤order} (θ^r/r) ∫ Tr((ΠD)^r) dλ`.
pub fn classical_rs_rate_series(
    model: &OqhoModel,
    pi: &WeightMatrix,
    theta: f64,
    order: usize,
    spec: &QuadratureSpec,
) -> Result<SeriesEstimate> {
    if order == 0 {
        return Err(Error::InvalidArgument("series order must be positive".into()));
    }
    let wd = WeightedDensity::new(model, pi)?;
    let scale = crate::cumulants::frequency_scale(model);
    let peak = peak_density(&wd, scale);
    check_theta(theta, if peak > 0.0 { 1.0 / peak } else { f64::INFINITY })?;
    let spec = QuadratureSpec { scale, ..*spec };
    let traces = integrate_realline_with(
        |lambda: f64| -> Vec<f64> {
            let Ok(k) = wd.at(lambda) else {
                return vec![f64::NAN; order];
            };
            let mut power = k.clone();
            (0..order)
                .map(|r| {
                    if r > 0 {
                        power = &power * &k;
                    }
                    power.trace().re
                })
                .collect()
        },
        &spec,
    )?;
    let value = traces
        .iter()
        .enumerate()
        .map(|(r, tr)| theta.powi(r as i32 + 1) / (r + 1) as f64 * tr)
        .sum::<f64>()
        / (4.0 * PI);
    let ratio = theta * peak;
    let remainder_bound = traces[0] / (4.0 * PI) * theta * ratio.powi(order as i32)
        / ((order + 1) as f64 * (1.0 - ratio));
    Ok(SeriesEstimate {
        value,
        remainder_bound,
    })
}
