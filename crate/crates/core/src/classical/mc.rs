//! Monte Carlo estimators over simulated stationary paths.

use num_complex::Complex64;

use super::{classical_theta_limit, path_rng, AugmentedStepper, PathBatch};
use crate::error::{Error, Result};
use crate::matfun::CMat;
use crate::model::OqhoModel;
use crate::quartic::WeightMatrix;

/// Fewest paths accepted by the stationary estimators.
pub const MIN_PATHS: usize = 100;
/// Smallest effective sample size accepted by the exponential estimator.
const MIN_ESS: f64 = 50.0;
/// Admissible fraction of the classical risk-parameter limit for the
/// exponential estimator.
pub const MC_THETA_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|value − target| / stderr`, zero when both vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        z(self.value - target, self.stderr)
    }
}

fn z(dev: f64, se: f64) -> f64 {
    if se > 0.0 {
        dev.abs() / se
    } else if dev == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Entrywise estimate; `stderr` carries the standard errors of the real and
/// imaginary parts in its real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct McMatrixEstimate {
    pub value: CMat,
    pub stderr: CMat,
    pub paths: usize,
    pub seed: u64,
}

impl McMatrixEstimate {
    /// Largest entrywise deviation from `target` in units of standard error.
    pub fn max_z_score(&self, target: &CMat) -> f64 {
        self.value
            .iter()
            .zip(self.stderr.iter())
            .zip(target.iter())
            .map(|((v, se), t)| z(v.re - t.re, se.re).max(z(v.im - t.im, se.im)))
            .fold(0.0, f64::max)
    }
}

/// Sample means and standard errors of `x_p` for complex samples.
fn moments(samples: &[Vec<Complex64>], seed: u64) -> McMatrixEstimate {
    let count = samples.len() as f64;
    let width = samples[0].len();
    let mut mean = vec![Complex64::new(0.0, 0.0); width];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![(0.0, 0.0); width];
    for s in samples {
        for ((v, x), m) in var.iter_mut().zip(s).zip(&mean) {
            let d = x - m;
            v.0 += d.re * d.re;
            v.1 += d.im * d.im;
        }
    }
    let dim = (width as f64).sqrt() as usize;
    let se = var
        .iter()
        .map(|(r, i)| {
            let norm = (count - 1.0) * count;
            Complex64::new((r / norm).sqrt(), (i / norm).sqrt())
        })
        .collect::<Vec<_>>();
    McMatrixEstimate {
        value: CMat::from_column_slice(dim, dim, &mean),
        stderr: CMat::from_column_slice(dim, dim, &se),
        paths: samples.len(),
        seed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryStats {
    /// `E ζ(t) ζ(t)*`.
    pub cov0: McMatrixEstimate,
    /// `E ζ(t+τ) ζ(t)*` with `τ = lag·h`.
    pub covlag: McMatrixEstimate,
    pub lag_time: f64,
}

/// Covariances at the final step and across the last `lag_steps` steps.
pub fn mc_stationary_stats(batch: &PathBatch, lag_steps: usize) -> Result<StationaryStats> {
    if batch.paths < MIN_PATHS {
        return Err(Error::InsufficientPaths {
            got: batch.paths,
            min: MIN_PATHS,
        });
    }
    if lag_steps > batch.steps {
        return Err(Error::InvalidArgument(format!(
            "lag {lag_steps} exceeds the {} simulated steps",
            batch.steps
        )));
    }
    let n = batch.dim();
    let outer = |a: &[Complex64], b: &[Complex64]| -> Vec<Complex64> {
        // Column-major `a b*`.
        (0..n * n).map(|k| a[k % n] * b[k / n].conj()).collect()
    };
    let last = batch.steps;
    let (same, lagged): (Vec<_>, Vec<_>) = (0..batch.paths)
        .map(|p| {
            let end = batch.zeta(p, last);
            let start = batch.zeta(p, last - lag_steps);
            (outer(&end, &end), outer(&end, &start))
        })
        .unzip();
    Ok(StationaryStats {
        cov0: moments(&same, batch.seed),
        covlag: moments(&lagged, batch.seed),
        lag_time: lag_steps as f64 * batch.h,
    })
}

fn quad_form(state: &[f64], pi: &WeightMatrix) -> f64 {
    let n = pi.dim();
    let w = pi.matrix();
    let mut acc = 0.0;
    for half in [&state[..n], &state[n..]] {
        for i in 0..n {
            for j in 0..n {
                acc += half[i] * w[(i, j)] * half[j];
            }
        }
    }
    acc
}

/// Sample variance of `ζ*Πζ` at the final step, with the standard error of
/// the variance estimator from the fourth central moment.
pub fn mc_quadform_variance(batch: &PathBatch, pi: &WeightMatrix) -> Result<McEstimate> {
    if batch.paths < MIN_PATHS {
        return Err(Error::InsufficientPaths {
            got: batch.paths,
            min: MIN_PATHS,
        });
    }
    if pi.dim() != batch.dim() {
        return Err(Error::DimensionMismatch("weight matrix".into()));
    }
    let q: Vec<f64> = (0..batch.paths)
        .map(|p| quad_form(batch.state(p, batch.steps), pi))
        .collect();
    let count = q.len() as f64;
    let mean = q.iter().sum::<f64>() / count;
    let m2 = q.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
    let m4 = q.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / count;
    Ok(McEstimate {
        value: m2 * count / (count - 1.0),
        stderr: ((m4 - m2 * m2).max(0.0) / count).sqrt(),
        paths: batch.paths,
        seed: batch.seed,
    })
}

/// Default step: small against the fastest drift time scale.
fn default_step(model: &OqhoModel) -> f64 {
    0.05 / crate::matfun::opnorm2(model.drift()).max(1.0)
}

/// `(1/t) ln mean_p exp(θ ∫₀^t ζ*Πζ)` over stationary paths, trapezoidal sums,
/// jackknife standard error. Biased upwards by roughly the squared standard
/// error.
pub fn mc_rs_rate(
    model: &OqhoModel,
    pi: &WeightMatrix,
    theta: f64,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_rs_rate_with_step(model, pi, theta, horizon, paths, seed, default_step(model))
}

pub fn mc_rs_rate_with_step(
    model: &OqhoModel,
    pi: &WeightMatrix,
    theta: f64,
    horizon: f64,
    paths: usize,
    seed: u64,
    h: f64,
) -> Result<McEstimate> {
    pi.check_dim(model)?;
    if theta < 0.0 {
        return Err(Error::NegativeTheta(theta));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    if paths < MIN_PATHS {
        return Err(Error::InsufficientPaths { got: paths, min: MIN_PATHS });
    }
    let zero = McEstimate { value: 0.0, stderr: 0.0, paths, seed };
    if theta == 0.0 || pi.matrix().iter().all(|&x| x == 0.0) {
        return Ok(zero);
    }
    let limit = MC_THETA_FRACTION * classical_theta_limit(model, pi)?;
    if theta > limit {
        return Err(Error::ThetaOutOfRange { theta, limit });
    }
    let steps = (horizon / h).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let stepper = AugmentedStepper::new(model, h)?;
    let exponents = crate::par::map_range(paths, |p| {
        let mut rng = path_rng(seed, p);
        let mut x = stepper.initial(&mut rng).as_slice().to_vec();
        let mut scratch = vec![0.0; 2 * x.len()];
        let mut prev = quad_form(&x, pi);
        let mut integral = 0.0;
        for _ in 0..steps {
            stepper.advance_in_place(&mut x, &mut scratch, &mut rng);
            let next = quad_form(&x, pi);
            integral += 0.5 * h * (prev + next);
            prev = next;
        }
        theta * integral
    });
    let shift = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
    let total: f64 = weights.iter().sum();
    let ess = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    if ess < MIN_ESS {
        return Err(Error::VarianceBlowup { ess });
    }
    let count = paths as f64;
    let log_mean = |sum: f64, k: f64| (sum / k).ln() + shift;
    let value = log_mean(total, count) / horizon;
    let leave_out: Vec<f64> = weights
        .iter()
        .map(|w| log_mean(total - w, count - 1.0) / horizon)
        .collect();
    let centre = leave_out.iter().sum::<f64>() / count;
    let spread = leave_out.iter().map(|v| (v - centre).powi(2)).sum::<f64>();
    Ok(McEstimate {
        value,
        stderr: ((count - 1.0) / count * spread).sqrt(),
        paths,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::simulate;
    use super::*;
    use crate::fixtures::tiny;

    #[test]
    fn tiny_lagged_covariance() {
        let model = tiny();
        let batch = simulate(&model, 0.1, 10, 20_000, 7).unwrap();
        let stats = mc_stationary_stats(&batch, 10).unwrap();
        let j = crate::model::block_symplectic(2);
        let target = |scale: f64| {
            CMat::from_fn(2, 2, |r, c| {
                Complex64::new(if r == c { 0.5 * scale } else { 0.0 }, 0.5 * scale * j[(r, c)])
            })
        };
        assert!(stats.cov0.max_z_score(&target(1.0)) < 5.0);
        assert!(stats.covlag.max_z_score(&target((-1.0f64).exp())) < 5.0);
        assert!(mc_stationary_stats(&batch, 11).is_err());
    }

    #[test]
    fn tiny_quadform_variance_mc() {
        let batch = simulate(&tiny(), 0.5, 1, 20_000, 3).unwrap();
        let est = mc_quadform_variance(&batch, &WeightMatrix::identity(2)).unwrap();
        assert!(est.z_score(1.0) < 5.0, "{est:?}");
    }

    #[test]
    fn rate_trivial_cases() {
        let model = tiny();
        let pi = WeightMatrix::identity(2);
        let est = mc_rs_rate(&model, &pi, 0.0, 5.0, 200, 1).unwrap();
        assert_eq!((est.value, est.stderr), (0.0, 0.0));
        let zero = WeightMatrix::new(crate::matfun::RMat::zeros(2, 2)).unwrap();
        assert_eq!(mc_rs_rate(&model, &zero, 0.1, 5.0, 200, 1).unwrap().value, 0.0);
        assert!(matches!(
            mc_rs_rate(&model, &pi, 0.2, 5.0, 200, 1),
            Err(Error::ThetaOutOfRange { .. })
        ));
        assert!(matches!(
            mc_rs_rate(&model, &pi, 0.1, 5.0, 10, 1),
            Err(Error::InsufficientPaths { .. })
        ));
    }

    #[test]
    fn too_few_paths() {
        let batch = simulate(&tiny(), 0.1, 2, 50, 1).unwrap();
        assert!(matches!(
            mc_stationary_stats(&batch, 1),
            Err(Error::InsufficientPaths { .. })
        ));
    }
}
