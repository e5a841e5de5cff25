//! Second-moment objects of the invariant Gaussian state: Gramians, the
//! two-point kernels, the spectral density and quasi-characteristic functions.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matfun::{
    expm, hermitian_eigenvalues, lyap_residual, lyap_solve, opnorm2, to_complex, CMat, RMat,
};
use crate::model::OqhoModel;

/// Steady-state Gramian `P` and the quantum covariance `P + iΘ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    gramian: RMat,
    quantum_cov: CMat,
}

impl SteadyState {
    pub fn gramian(&self) -> &RMat {
        &self.gramian
    }

    pub fn quantum_cov(&self) -> &CMat {
        &self.quantum_cov
    }

    /// Smallest eigenvalue of `P + iΘ`.
    pub fn uncertainty_floor(&self) -> f64 {
        hermitian_eigenvalues(&self.quantum_cov)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

fn quantum_cov(p: &RMat, theta: &RMat) -> CMat {
    to_complex(p) + to_complex(theta) * Complex64::i()
}

pub fn gramian_steady(model: &OqhoModel) -> Result<SteadyState> {
    model.require_hurwitz()?;
    let a = model.drift();
    let b = model.dispersion();
    let bbt = b * b.transpose();
    let p = lyap_solve(a, &bbt)?;
    let p = (&p + p.transpose()) * 0.5;
    let residual = lyap_residual(a, &p, &bbt);
    let scale = a.norm() * p.norm() + bbt.norm();
    if residual > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::CertificateViolation {
            what: "steady Gramian equation",
            residual,
        });
    }
    let steady = SteadyState {
        quantum_cov: quantum_cov(&p, model.theta()),
        gramian: p,
    };
    let floor = steady.uncertainty_floor();
    if floor < -1e-8 * steady.gramian.norm().max(1.0) {
        return Err(Error::CertificateViolation {
            what: "uncertainty relation P + iΘ ≥ 0",
            residual: -floor,
        });
    }
    Ok(steady)
}

/// `Σ(t) = P − e^{tA} P e^{tAᵀ}`.
pub fn gramian_finite(model: &OqhoModel, t: f64) -> Result<RMat> {
    CovarianceKernel::new(model)?.sigma(t)
}

/// Evaluators of the steady two-point kernels of a Hurwitz model.
#[derive(Debug, Clone)]
pub struct CovarianceKernel<'a> {
    model: &'a OqhoModel,
    steady: SteadyState,
}

/// `V(τ)`, `Λ(τ)` and `S(τ) = V(τ) + iΛ(τ)` at one signed lag.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelValue {
    pub real: RMat,
    pub commutator: RMat,
    pub complex: CMat,
}

impl<'a> CovarianceKernel<'a> {
    pub fn new(model: &'a OqhoModel) -> Result<Self> {
        Ok(Self {
            steady: gramian_steady(model)?,
            model,
        })
    }

    pub fn model(&self) -> &OqhoModel {
        self.model
    }

    pub fn steady(&self) -> &SteadyState {
        &self.steady
    }

    pub fn gramian(&self) -> &RMat {
        &self.steady.gramian
    }

    fn propagator(&self, tau: f64) -> Result<RMat> {
        expm(self.model.drift(), tau)
    }

    /// `V(τ) = e^{τA}P` for `τ ≥ 0`, `V(τ) = V(−τ)ᵀ` otherwise.
    pub fn v(&self, tau: f64) -> Result<RMat> {
        let e = self.propagator(tau.abs())?;
        let v = e * self.gramian();
        Ok(if tau < 0.0 { v.transpose() } else { v })
    }

    /// `Λ(τ) = e^{τA}Θ` for `τ ≥ 0`, `Λ(τ) = −Λ(−τ)ᵀ` otherwise.
    pub fn lambda(&self, tau: f64) -> Result<RMat> {
        let e = self.propagator(tau.abs())?;
        let l = e * self.model.theta();
        Ok(if tau < 0.0 { -l.transpose() } else { l })
    }

    /// `S(τ) = e^{τA}(P + iΘ)` for `τ ≥ 0`, `S(τ) = S(−τ)*` otherwise.
    pub fn s(&self, tau: f64) -> Result<CMat> {
        let e = to_complex(&self.propagator(tau.abs())?);
        let s = e * self.steady.quantum_cov();
        Ok(if tau < 0.0 { s.adjoint() } else { s })
    }

    pub fn at(&self, tau: f64) -> Result<KernelValue> {
        let real = self.v(tau)?;
        let commutator = self.lambda(tau)?;
        let complex = to_complex(&real) + to_complex(&commutator) * Complex64::i();
        Ok(KernelValue {
            real,
            commutator,
            complex,
        })
    }

    /// `Σ(t) = P − e^{tA}Pe^{tAᵀ}`.
    pub fn sigma(&self, t: f64) -> Result<RMat> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let e = self.propagator(t)?;
        let p = self.gramian();
        let s = p - &e * p * e.transpose();
        Ok((&s + s.transpose()) * 0.5)
    }

    /// `C(s, τ) = e^{(s−τ)A}Σ(τ)` for `s ≥ τ`; `C(τ, s)ᵀ` for `s < τ`.
    pub fn two_point(&self, s: f64, tau: f64) -> Result<RMat> {
        if s < 0.0 || tau < 0.0 {
            return Err(Error::NegativeTime(s.min(tau)));
        }
        if s < tau {
            return Ok(self.two_point(tau, s)?.transpose());
        }
        Ok(self.propagator(s - tau)? * self.sigma(tau)?)
    }
}

pub fn kernel_at(model: &OqhoModel, tau: f64) -> Result<KernelValue> {
    CovarianceKernel::new(model)?.at(tau)
}

pub fn two_point_c(model: &OqhoModel, s: f64, tau: f64) -> Result<RMat> {
    CovarianceKernel::new(model)?.two_point(s, tau)
}

/// Transfer function and spectral density evaluators.
#[derive(Debug, Clone)]
pub struct SpectralDensity<'a> {
    model: &'a OqhoModel,
    drift: CMat,
    dispersion: CMat,
    ito_conj: CMat,
}

/// `G(iλ)`, `D(λ) = GΩG*` and the flipped density `D(−λ)ᵀ = GΩ̄G*` at one
/// frequency, sharing the resolvent solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralValue {
    pub transfer: CMat,
    pub density: CMat,
    pub flipped: CMat,
}

impl<'a> SpectralDensity<'a> {
    pub fn new(model: &'a OqhoModel) -> Result<Self> {
        model.require_hurwitz()?;
        Ok(Self {
            model,
            drift: to_complex(model.drift()),
            dispersion: to_complex(model.dispersion()),
            ito_conj: model.ito().map(|z| z.conj()),
        })
    }

    /// `G(iλ) = (iλI − A)⁻¹B`.
    pub fn transfer(&self, lambda: f64) -> Result<CMat> {
        let n = self.model.n();
        let shifted = CMat::identity(n, n) * Complex64::new(0.0, lambda) - &self.drift;
        shifted
            .lu()
            .solve(&self.dispersion)
            .ok_or_else(|| Error::LinearSolveFailure(format!("resolvent singular at λ={lambda}")))
    }

    pub fn at(&self, lambda: f64) -> Result<SpectralValue> {
        let g = self.transfer(lambda)?;
        let gh = g.adjoint();
        let density = &g * self.model.ito() * &gh;
        let flipped = &g * &self.ito_conj * &gh;
        Ok(SpectralValue {
            transfer: g,
            density,
            flipped,
        })
    }

    pub fn density(&self, lambda: f64) -> Result<CMat> {
        Ok(self.at(lambda)?.density)
    }

    /// `D(−λ)ᵀ`.
    pub fn flipped(&self, lambda: f64) -> Result<CMat> {
        Ok(self.at(lambda)?.flipped)
    }
}

pub fn spectral_d(model: &OqhoModel, lambda: f64) -> Result<CMat> {
    SpectralDensity::new(model)?.density(lambda)
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::UnsortedTimes);
    }
    Ok(())
}

/// One-point quasi-characteristic function `Φ(t, u)` of the Gaussian state
/// started at time 0 with zero mean and real covariance `P0`, propagated to
/// time `s` and then advanced to `t` by the linear functional relation.
pub fn qcf_onepoint(
    model: &OqhoModel,
    initial_cov: &RMat,
    s: f64,
    t: f64,
    u: &DVector<f64>,
) -> Result<Complex64> {
    let n = model.n();
    if initial_cov.shape() != (n, n) || u.len() != n {
        return Err(Error::DimensionMismatch("initial covariance or argument".into()));
    }
    if s < 0.0 {
        return Err(Error::NegativeTime(s));
    }
    if t < s {
        return Err(Error::UnsortedTimes);
    }
    if initial_cov != &initial_cov.transpose() {
        return Err(Error::NotSymmetric("P0"));
    }
    let floor = hermitian_eigenvalues(&quantum_cov(initial_cov, model.theta()))
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if floor < -1e-10 * opnorm2(initial_cov).max(1.0) {
        return Err(Error::InvalidInitialState { min_eig: floor });
    }
    let kernel = CovarianceKernel::new(model)?;
    let es = expm(model.drift(), s)?;
    let cov_s = &es * initial_cov * es.transpose() + kernel.sigma(s)?;
    let shifted = expm(model.drift(), t - s)?.transpose() * u;
    let at_s = shifted.dot(&(&cov_s * &shifted));
    let growth = u.dot(&(kernel.sigma(t - s)? * u));
    Ok(Complex64::new((-0.5 * (at_s + growth)).exp(), 0.0))
}

fn check_points(n: usize, times: &[f64], vectors: &[DVector<f64>]) -> Result<()> {
    if times.is_empty() || times.len() != vectors.len() || vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch("times and vectors".into()));
    }
    check_times(times)
}

/// Steady multi-point QCF `exp(−½ Σ_{j,k} v_jᵀ V(t_j − t_k) v_k)`.
///
/// The double sum is formed with the complex kernel `S` and its imaginary part
/// is checked to cancel.
pub fn qcf_multipoint_steady(
    model: &OqhoModel,
    times: &[f64],
    vectors: &[DVector<f64>],
) -> Result<Complex64> {
    check_points(model.n(), times, vectors)?;
    let kernel = CovarianceKernel::new(model)?;
    let cv: Vec<nalgebra::DVector<Complex64>> =
        vectors.iter().map(|v| v.map(|x| Complex64::new(x, 0.0))).collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut magnitude = 0.0;
    for (j, vj) in cv.iter().enumerate() {
        for (k, vk) in cv.iter().enumerate() {
            let term = vj.transpose() * kernel.s(times[j] - times[k])? * vk;
            total += term[(0, 0)];
            magnitude += term[(0, 0)].norm();
        }
    }
    if total.im.abs() > 1e-12 * (1.0 + magnitude) {
        return Err(Error::CertificateViolation {
            what: "real multi-point exponent",
            residual: total.im.abs(),
        });
    }
    Ok(Complex64::new((-0.5 * total.re).exp(), 0.0))
}

/// The same function evaluated by folding the last point into the previous
/// one, `v_{N−1} ← v_{N−1} + e^{ΔAᵀ}v_N`, with the factor
/// `exp(−½ v_Nᵀ Σ(Δ) v_N)`, down to a single point.
pub fn qcf_multipoint_recursive(
    model: &OqhoModel,
    times: &[f64],
    vectors: &[DVector<f64>],
) -> Result<Complex64> {
    check_points(model.n(), times, vectors)?;
    let kernel = CovarianceKernel::new(model)?;
    let mut acc = vectors.to_vec();
    let mut log_factor = 0.0;
    for k in (1..times.len()).rev() {
        let gap = times[k] - times[k - 1];
        let last = acc.pop().expect("nonempty");
        log_factor += -0.5 * last.dot(&(kernel.sigma(gap)? * &last));
        let pushed = expm(model.drift(), gap)?.transpose() * &last;
        acc[k - 1] += pushed;
    }
    let first = &acc[0];
    log_factor += -0.5 * first.dot(&(kernel.gramian() * first));
    Ok(Complex64::new(log_factor.exp(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{reference, tiny};
    use crate::model::{build_model, CcrMatrix, PhysicalParams};
    use crate::matfun::max_abs;
    use nalgebra::dmatrix;

    fn j2() -> RMat {
        dmatrix![0.0, 1.0; -1.0, 0.0]
    }

    fn half_omega() -> CMat {
        (to_complex(&RMat::identity(2, 2)) + to_complex(&j2()) * Complex64::i())
            * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn tiny_gramian_and_floor() {
        let model = tiny();
        let ss = gramian_steady(&model).unwrap();
        assert!(max_abs(&(ss.gramian() - RMat::identity(2, 2) * 0.5)) < 1e-14);
        let mut eig = hermitian_eigenvalues(ss.quantum_cov());
        eig.sort_by(f64::total_cmp);
        assert!(eig[0].abs() < 1e-14 && (eig[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn example_gramian_matches_print() {
        let model = crate::fixtures::paper_example();
        let p = gramian_steady(&model).unwrap();
        let printed = reference::gramian();
        let scale = printed.abs().max();
        assert!(max_abs(&(p.gramian() - printed)) <= 5e-3 * scale);
    }

    #[test]
    fn zero_noise_gives_zero_gramian() {
        // With B = 0 the drift 2ΘR is traceless and never Hurwitz, so the
        // degenerate case is exercised on the solver directly.
        let p = lyap_solve(&(-RMat::identity(2, 2)), &RMat::zeros(2, 2)).unwrap();
        assert_eq!(p, RMat::zeros(2, 2));
    }

    #[test]
    fn tiny_finite_gramian_and_two_point() {
        let model = tiny();
        let k = CovarianceKernel::new(&model).unwrap();
        assert_eq!(k.sigma(0.0).unwrap(), RMat::zeros(2, 2));
        for t in [0.3f64, 1.0, 4.0] {
            let expect = RMat::identity(2, 2) * (0.5 * (1.0 - (-2.0 * t).exp()));
            assert!(max_abs(&(k.sigma(t).unwrap() - expect)) < 1e-14);
        }
        let c = k.two_point(2.0, 1.0).unwrap();
        let expect = RMat::identity(2, 2) * ((-1.0f64).exp() * 0.5 * (1.0 - (-2.0f64).exp()));
        assert!(max_abs(&(c - expect)) < 1e-14);
        assert_eq!(k.two_point(3.0, 0.0).unwrap(), RMat::zeros(2, 2));
        assert!(max_abs(&(k.two_point(2.0, 2.0).unwrap() - k.sigma(2.0).unwrap())) < 1e-15);
        assert!(matches!(k.sigma(-1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn kernel_at_zero_and_one() {
        let model = tiny();
        let k = CovarianceKernel::new(&model).unwrap();
        let z = k.at(0.0).unwrap();
        assert!(max_abs(&(z.real - RMat::identity(2, 2) * 0.5)) < 1e-15);
        assert_eq!(&z.commutator, model.theta());
        let s1 = k.s(1.0).unwrap();
        let expect = half_omega() * Complex64::new((-1.0f64).exp(), 0.0);
        assert!(max_abs(&(s1 - expect)) < 1e-14);
    }

    #[test]
    fn kernel_symmetry_on_example() {
        let model = crate::fixtures::paper_example();
        let k = CovarianceKernel::new(&model).unwrap();
        for tau in [0.1, 0.7, 2.5] {
            let plus = k.s(tau).unwrap();
            let minus = k.s(-tau).unwrap();
            assert!(max_abs(&(minus - plus.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn tiny_density_closed_form() {
        let model = tiny();
        let sd = SpectralDensity::new(&model).unwrap();
        for lambda in [-3.0, 0.0, 0.5, 10.0] {
            let d = sd.density(lambda).unwrap();
            let expect = half_omega() * Complex64::new(2.0 / (1.0 + lambda * lambda), 0.0);
            assert!(max_abs(&(d - expect)) < 1e-14);
        }
    }

    #[test]
    fn density_decays_quadratically() {
        let model = crate::fixtures::paper_example();
        let sd = SpectralDensity::new(&model).unwrap();
        let a = opnorm2(&sd.density(1e3).unwrap()) * 1e6;
        let b = opnorm2(&sd.density(1e4).unwrap()) * 1e8;
        assert!((a / b - 1.0).abs() < 0.05);
    }

    #[test]
    fn flipped_density_is_transpose_at_minus_lambda() {
        let model = crate::fixtures::paper_example();
        let sd = SpectralDensity::new(&model).unwrap();
        let f = sd.flipped(0.8).unwrap();
        let direct = sd.density(-0.8).unwrap().transpose();
        assert!(max_abs(&(f - direct)) < 1e-12);
    }

    #[test]
    fn onepoint_qcf_cases() {
        let model = tiny();
        let p = RMat::identity(2, 2) * 0.5;
        let zero = DVector::zeros(2);
        assert_eq!(qcf_onepoint(&model, &p, 0.0, 1.0, &zero).unwrap().re, 1.0);
        let u = DVector::from_vec(vec![0.7, -1.2]);
        let invariant = (-0.5 * u.dot(&(&p * &u))).exp();
        for t in [0.0, 0.5, 3.0] {
            let phi = qcf_onepoint(&model, &p, 0.0, t, &u).unwrap();
            assert!((phi.re - invariant).abs() < 1e-14);
        }
        let p0 = RMat::identity(2, 2) * 3.0;
        let far = qcf_onepoint(&model, &p0, 1.0, 30.0, &u).unwrap();
        assert!((far.re - invariant).abs() < 1e-12);
        let bad = RMat::identity(2, 2) * 0.1;
        assert!(matches!(
            qcf_onepoint(&model, &bad, 0.0, 1.0, &u),
            Err(Error::InvalidInitialState { .. })
        ));
    }

    #[test]
    fn multipoint_reductions() {
        let model = crate::fixtures::paper_example();
        let v = DVector::from_vec(vec![0.1, -0.2, 0.05, 0.3]);
        let p = gramian_steady(&model).unwrap();
        let one = qcf_multipoint_steady(&model, &[2.0], std::slice::from_ref(&v)).unwrap();
        assert!((one.re - (-0.5 * v.dot(&(p.gramian() * &v))).exp()).abs() < 1e-14);
        let zeros = vec![DVector::zeros(4); 3];
        assert_eq!(qcf_multipoint_steady(&model, &[0.0, 1.0, 2.0], &zeros).unwrap().re, 1.0);
        assert!(matches!(
            qcf_multipoint_steady(&model, &[1.0, 0.0], &[v.clone(), v.clone()]),
            Err(Error::UnsortedTimes)
        ));
        // A repeated time merges the two vectors.
        let twice = qcf_multipoint_steady(&model, &[1.0, 1.0], &[v.clone(), v.clone()]).unwrap();
        let merged = qcf_multipoint_steady(&model, &[1.0], &[&v * 2.0]).unwrap();
        assert!((twice.re - merged.re).abs() < 1e-14);
    }

    #[test]
    fn multipoint_recurrence_agrees() {
        let model = crate::fixtures::paper_example();
        let times = [0.0, 0.4, 0.45, 1.3];
        let vectors: Vec<_> = (0..4)
            .map(|k| DVector::from_fn(4, |i, _| 0.1 * ((i + 2 * k) as f64).sin()))
            .collect();
        let direct = qcf_multipoint_steady(&model, &times, &vectors).unwrap();
        let folded = qcf_multipoint_recursive(&model, &times, &vectors).unwrap();
        assert!((direct - folded).norm() < 1e-12);
    }

    #[test]
    fn unstable_model_is_refused() {
        let ccr = CcrMatrix::canonical(2).unwrap();
        let params = PhysicalParams::new(RMat::identity(2, 2), RMat::zeros(2, 2)).unwrap();
        let model = build_model(ccr, params).unwrap();
        assert!(matches!(gramian_steady(&model), Err(Error::NotHurwitz { .. })));
    }
}
