//! Large-deviation bounds for the quadratic functional: the norm kernel
//! `N(τ) = ‖√Π S(τ) √Π‖`, its Fourier transform `F`, the QEF upper rate, the
//! Cramér bound (numeric and via an exponential envelope).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::SVD;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::gramian_steady;
use crate::matfun::{
    eigenvectors, expm, hermitian_eigenvalues, integrate_realline, inv_sqrt_psd, lyap_solve_shifted,
    opnorm2, sqrt_psd, to_complex, CMat, QuadratureSpec, RMat, TailDecay,
};
use crate::model::OqhoModel;
use crate::quartic::WeightMatrix;

/// Eigenvector matrices with condition number beyond this use the shifted
/// Lyapunov construction.
pub const EIGENVECTOR_COND_LIMIT: f64 = 1e8;
/// Decay-rate fraction kept by the shifted construction.
pub const FALLBACK_SHIFT: f64 = 0.9;
/// Relative size of the neglected tail of `N` beyond the truncation time.
const TAIL_TOL: f64 = 1e-13;
/// Relative change of `Σ w F²` accepted between two frequency tables.
const ENERGY_TOL: f64 = 1e-7;
/// Largest missed share of `∫F` handed to the first-order correction.
const DEFECT_TOL: f64 = 1e-3;
/// Tolerance of the bisection on the risk parameter.
pub const THETA_TOL: f64 = 1e-10;

const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Decay certificate `N(τ) ≤ α e^{−μ|τ|}` built from a pair `(μ, Γ)` with
/// `AΓ + ΓAᵀ ≼ −2μΓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams {
    pub mu: f64,
    pub gamma: RMat,
    pub alpha: f64,
    /// Whether the shifted Lyapunov construction was used.
    pub shifted: bool,
    /// `max eig(AΓ + ΓAᵀ + 2μΓ)`.
    pub ali_residual: f64,
}

fn alpha_for(gamma: &RMat, quantum_cov: &CMat, root_pi: &RMat) -> Result<f64> {
    let root_gamma = sqrt_psd(gamma)?;
    let inv_root_gamma = to_complex(&inv_sqrt_psd(gamma)?);
    let left = opnorm2(&(root_pi * &root_gamma));
    let right = opnorm2(&(inv_root_gamma * quantum_cov * to_complex(root_pi)));
    Ok(left * right)
}

pub fn envelope_params(model: &OqhoModel, pi: &WeightMatrix) -> Result<EnvelopeParams> {
    pi.check_dim(model)?;
    let steady = gramian_steady(model)?;
    let a = model.drift();
    let n = model.n();
    let mu = -model.abscissa();
    let (_, u) = eigenvectors(a)?;
    let sv = u.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let (mu, gamma, shifted) = if cond < EIGENVECTOR_COND_LIMIT {
        let g = &u * u.adjoint();
        let imag = g.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag > 1e-10 * opnorm2(&g) {
            return Err(Error::CertificateViolation {
                what: "real eigenvector Gramian",
                residual: imag,
            });
        }
        let g = g.map(|z| z.re);
        (mu, (&g + g.transpose()) * 0.5, false)
    } else {
        let shift = FALLBACK_SHIFT * mu;
        let g = lyap_solve_shifted(a, shift, &RMat::identity(n, n))
            .map_err(|_| Error::DefectiveAndUnstableShift)?;
        (shift, (&g + g.transpose()) * 0.5, true)
    };
    let ali = a * &gamma + &gamma * a.transpose() + &gamma * (2.0 * mu);
    let ali_residual = hermitian_eigenvalues(&ali)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    if ali_residual > 1e-8 * opnorm2(&gamma) {
        return Err(Error::CertificateViolation {
            what: "Lyapunov inequality",
            residual: ali_residual,
        });
    }
    let root_pi = sqrt_psd(pi.matrix())?;
    let alpha = alpha_for(&gamma, steady.quantum_cov(), &root_pi)?;
    Ok(EnvelopeParams {
        mu,
        gamma,
        alpha,
        shifted,
        ali_residual,
    })
}

/// Bound value with the risk parameter attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CramerPoint {
    pub bound: f64,
    pub theta_star: f64,
}

/// `(nμ/4)(2 − nα/ε − ε/(nα))` with `θ* = (μ/4α)(1 − (nα/ε)²)`.
pub fn cramer_bound_closed(mu: f64, alpha: f64, n: usize, epsilon: f64) -> Result<CramerPoint> {
    let scale = n as f64 * alpha;
    if epsilon < scale || !epsilon.is_finite() {
        return Err(Error::EpsilonTooSmall {
            epsilon,
            threshold: scale,
        });
    }
    if scale == 0.0 {
        return Ok(if epsilon == 0.0 {
            CramerPoint { bound: 0.0, theta_star: 0.0 }
        } else {
            CramerPoint { bound: f64::NEG_INFINITY, theta_star: f64::INFINITY }
        });
    }
    let ratio = scale / epsilon;
    Ok(CramerPoint {
        bound: n as f64 * mu / 4.0 * (2.0 - ratio - 1.0 / ratio),
        theta_star: mu / (4.0 * alpha) * (1.0 - ratio * ratio),
    })
}

/// `−∫ ln(1 − 2θF̂(λ)) dλ` for `F̂(λ) = 2αμ/(λ² + μ²)` by quadrature.
pub fn envelope_log_integral(alpha: f64, mu: f64, theta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let limit = mu / (4.0 * alpha);
    if !(0.0..limit).contains(&theta) {
        return Err(Error::ThetaOutOfRange { theta, limit });
    }
    let peak = 4.0 * theta * alpha / mu;
    let spec = QuadratureSpec {
        tail_decay_hint: Some(TailDecay::Algebraic {
            c: 4.0 * theta * alpha * mu / (1.0 - peak),
            exponent: 2.0,
        }),
        scale: mu,
        ..*spec
    };
    integrate_realline(
        |l| -(1.0 - 4.0 * theta * alpha * mu / (l * l + mu * mu)).ln(),
        &spec,
    )
}

/// Closed form `2π(μ − √(μ² − 4θαμ))` of [`envelope_log_integral`].
pub fn envelope_log_integral_closed(alpha: f64, mu: f64, theta: f64) -> f64 {
    2.0 * PI * (mu - (mu * mu - 4.0 * theta * alpha * mu).sqrt())
}

/// `N` on a uniform grid over `[0, τ*]` as a piecewise Hermite cubic, stored
/// as monomial coefficients per panel.
#[derive(Debug, Clone)]
struct CosineSpectrum {
    step: f64,
    panels: Vec<[f64; 4]>,
}

impl CosineSpectrum {
    /// `∫₀^{τ*} p(τ) cos(λτ) dτ`, exact for the interpolant.
    fn half_transform(&self, lambda: f64) -> f64 {
        let h = self.step;
        let omega = lambda * h;
        // m_k = ∫₀¹ s^k e^{iωs} ds.
        let mut m = [Complex64::new(0.0, 0.0); 4];
        if omega.abs() < 1.0 {
            for (x, w) in GL8_X.iter().zip(GL8_W) {
                let s = 0.5 * (x + 1.0);
                let e = Complex64::cis(omega * s) * (0.5 * w);
                let mut p = 1.0;
                for mk in m.iter_mut() {
                    *mk += e * p;
                    p *= s;
                }
            }
        } else {
            let e = Complex64::cis(omega);
            let inv = Complex64::new(0.0, -1.0 / omega);
            m[0] = (e - 1.0) * inv;
            for k in 1..4 {
                m[k] = (e - m[k - 1] * k as f64) * inv;
            }
        }
        let rot = Complex64::cis(omega);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, c) in self.panels.iter().enumerate() {
            if p % 64 == 0 {
                phase = Complex64::cis(lambda * p as f64 * h);
            }
            let local = m[0] * c[0] + m[1] * c[1] + m[2] * c[2] + m[3] * c[3];
            acc += phase * local;
            phase *= rot;
        }
        h * acc.re
    }
}

/// Fixed nodes and weights for even integrands over the real line, in the
/// variable `λ = s·tan(u)`, graded geometrically towards `λ = 0`.
#[derive(Debug, Clone)]
struct FrequencyTable {
    /// `2πN(0) − Σ w F`, the mass the table misses. It sits where `F` is
    /// small and oscillatory, so integrals of `g(F)` absorb it at first
    /// order through `g'(0)`.
    defect: f64,
    weights: Vec<f64>,
    values: Vec<f64>,
}

impl FrequencyTable {
    fn build(scale: f64, uniform_panels: usize, target: f64, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let u0 = 0.05;
        let mut breaks = vec![0.0];
        breaks.extend((0..=40).rev().map(|j| u0 * 0.5f64.powi(j)));
        let du = (FRAC_PI_2 - u0) / uniform_panels as f64;
        breaks.extend((1..=uniform_panels).map(|k| u0 + k as f64 * du));
        let mut lambdas = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (x, gw) in GL8_X.iter().zip(GL8_W) {
                let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let c = u.cos();
                lambdas.push(scale * u.tan());
                // Factor 2 folds the negative half-line onto the positive one.
                weights.push(2.0 * 0.5 * (b - a) * gw * scale / (c * c));
            }
        }
        let values = crate::par::map_slice(&lambdas, |&l| f(l));
        let mut table = Self { defect: 0.0, weights, values };
        table.defect = target - table.raw(|f| f);
        table
    }

    fn raw(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.values)
            .map(|(w, &v)| w * g(v))
            .sum()
    }

    /// `∫ g(F)` for `g(0) = 0` with `slope = g'(0)`.
    fn integrate(&self, g: impl Fn(f64) -> f64, slope: f64) -> f64 {
        self.raw(g) + slope * self.defect
    }
}

/// Precomputed `N` and `F` for one model and weight.
#[derive(Debug, Clone)]
pub struct DeviationAnalysis {
    n: usize,
    kernel_at_zero: f64,
    f_at_zero: f64,
    envelope: EnvelopeParams,
    spectrum: Option<CosineSpectrum>,
    table: Option<FrequencyTable>,
    root_pi: CMat,
    drift: CMat,
    quantum_cov: CMat,
}

impl DeviationAnalysis {
    pub fn new(model: &OqhoModel, pi: &WeightMatrix) -> Result<Self> {
        pi.check_dim(model)?;
        let steady = gramian_steady(model)?;
        let root = sqrt_psd(pi.matrix())?;
        let envelope = envelope_params(model, pi)?;
        let mut analysis = Self {
            n: model.n(),
            kernel_at_zero: 0.0,
            f_at_zero: 0.0,
            envelope,
            spectrum: None,
            table: None,
            root_pi: to_complex(&root),
            drift: to_complex(model.drift()),
            quantum_cov: steady.quantum_cov().clone(),
        };
        analysis.kernel_at_zero = analysis.n_kernel(0.0)?;
        if analysis.kernel_at_zero == 0.0 {
            return Ok(analysis);
        }
        let spectrum = analysis.tabulate(model)?;
        analysis.f_at_zero = 2.0 * spectrum.half_transform(0.0);
        analysis.spectrum = Some(spectrum);
        analysis.table = Some(analysis.frequency_table(model)?);
        Ok(analysis)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn envelope(&self) -> &EnvelopeParams {
        &self.envelope
    }

    /// `N(τ) = ‖√Π S(τ) √Π‖`.
    pub fn n_kernel(&self, tau: f64) -> Result<f64> {
        let e = expm(&self.drift, tau.abs())?;
        Ok(opnorm2(&(&self.root_pi * e * &self.quantum_cov * &self.root_pi)))
    }

    /// `N(0)`, the per-dimension threshold for the scale parameter.
    pub fn kernel_at_zero(&self) -> f64 {
        self.kernel_at_zero
    }

    /// `n·N(0)`.
    pub fn epsilon_threshold(&self) -> f64 {
        self.n as f64 * self.kernel_at_zero
    }

    /// `F(λ) = 2∫₀^∞ N(τ) cos(λτ) dτ`.
    pub fn f_transform(&self, lambda: f64) -> f64 {
        self.spectrum
            .as_ref()
            .map_or(0.0, |s| 2.0 * s.half_transform(lambda))
    }

    /// `‖F‖_∞`. Since `N ≥ 0`, `|F(λ)| ≤ 2∫₀^∞ N = F(0)`.
    pub fn f_infnorm(&self) -> f64 {
        self.f_at_zero
    }

    /// Upper end `1/(2F(0))` of the admissible risk parameters.
    pub fn theta_limit(&self) -> f64 {
        if self.f_at_zero > 0.0 {
            0.5 / self.f_at_zero
        } else {
            f64::INFINITY
        }
    }

    fn tabulate(&self, model: &OqhoModel) -> Result<CosineSpectrum> {
        let mu = self.envelope.mu;
        let alpha = self.envelope.alpha.max(self.kernel_at_zero);
        let horizon = (alpha / (TAIL_TOL * self.kernel_at_zero)).ln() / mu;
        let radius = crate::matfun::try_eigenvalues(model.drift())?
            .iter()
            .map(|z| z.norm())
            .fold(mu, f64::max);
        let max_panels = 200_000;
        let panels = ((horizon * radius / 0.02).ceil() as usize).clamp(64, max_panels);
        let step = horizon / panels as f64;
        let step_prop = expm(&self.drift, step)?;
        let left = &self.root_pi;
        let right = &self.quantum_cov * &self.root_pi;
        let a_left = left * &self.drift;
        let mut prop = CMat::identity(self.n, self.n);
        let mut nodes = Vec::with_capacity(panels + 1);
        for i in 0..=panels {
            if i % 256 == 0 {
                prop = expm(&self.drift, i as f64 * step)?;
            }
            let k = left * &prop * &right;
            let dk = &a_left * &prop * &right;
            let svd = SVD::new(k, true, true);
            let (u, vt) = (svd.u.ok_or(Error::EigenFailure)?, svd.v_t.ok_or(Error::EigenFailure)?);
            let top = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &s)| if s > best.1 { (j, s) } else { best });
            let uu = u.column(top.0);
            let vv = vt.row(top.0).adjoint();
            let slope = (uu.adjoint() * dk * vv)[(0, 0)].re;
            nodes.push((top.1, slope));
            prop = &prop * &step_prop;
        }
        let panels = nodes
            .windows(2)
            .map(|w| {
                let (n0, d0) = w[0];
                let (n1, d1) = w[1];
                [
                    n0,
                    step * d0,
                    -3.0 * n0 - 2.0 * step * d0 + 3.0 * n1 - step * d1,
                    2.0 * n0 + step * d0 - 2.0 * n1 + step * d1,
                ]
            })
            .collect();
        Ok(CosineSpectrum { step, panels })
    }

    fn frequency_table(&self, model: &OqhoModel) -> Result<FrequencyTable> {
        let scale = crate::cumulants::frequency_scale(model).max(self.envelope.mu);
        let target = 2.0 * PI * self.kernel_at_zero;
        // The corrected integrals err at second order in F, so refinement
        // is judged on the energy Σ w F².
        let energy = |t: &FrequencyTable| t.raw(|f| f * f);
        let mut panels = 256;
        let mut table = FrequencyTable::build(scale, panels, target, |l| self.f_transform(l));
        loop {
            panels *= 2;
            let finer = FrequencyTable::build(scale, panels, target, |l| self.f_transform(l));
            let (coarse, fine) = (energy(&table), energy(&finer));
            let gap = (fine - coarse).abs();
            if gap <= ENERGY_TOL * fine && finer.defect.abs() <= DEFECT_TOL * target {
                return Ok(finer);
            }
            if panels >= 16384 {
                return Err(Error::NoConvergence {
                    estimate: fine,
                    error: gap,
                });
            }
            table = finer;
        }
    }

    fn check_theta(&self, theta: f64) -> Result<()> {
        if theta < 0.0 {
            return Err(Error::NegativeTheta(theta));
        }
        let limit = self.theta_limit();
        if theta >= limit {
            return Err(Error::ThetaOutOfRange { theta, limit });
        }
        Ok(())
    }

    /// `−(n/4π) ∫ ln(1 − 2θF(λ)) dλ`.
    pub fn qef_upper_rate(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        let Some(table) = &self.table else {
            return Ok(0.0);
        };
        let integral = table.integrate(|f| -(-2.0 * theta * f).ln_1p(), 2.0 * theta);
        Ok(self.n as f64 / (4.0 * PI) * integral)
    }

    /// `(n/2π) ∫ F/(1 − 2θF) dλ`, the derivative of the upper rate.
    pub fn rate_slope(&self, theta: f64) -> Result<f64> {
        self.check_theta(theta)?;
        let Some(table) = &self.table else {
            return Ok(0.0);
        };
        let integral = table.integrate(|f| f / (1.0 - 2.0 * theta * f), 1.0);
        Ok(self.n as f64 / (2.0 * PI) * integral)
    }

    /// Minimises `qef_upper_rate(θ) − θε` by bisection on the slope equation.
    pub fn cramer_bound_numeric(&self, epsilon: f64) -> Result<CramerPoint> {
        let threshold = self.epsilon_threshold();
        if epsilon < threshold * (1.0 - 1e-12) || !epsilon.is_finite() {
            return Err(Error::EpsilonTooSmall { epsilon, threshold });
        }
        if self.table.is_none() {
            return Ok(if epsilon == 0.0 {
                CramerPoint { bound: 0.0, theta_star: 0.0 }
            } else {
                CramerPoint { bound: f64::NEG_INFINITY, theta_star: f64::INFINITY }
            });
        }
        if epsilon <= self.rate_slope(0.0)? {
            return Ok(CramerPoint { bound: 0.0, theta_star: 0.0 });
        }
        let mut lo = 0.0;
        let mut hi = self.theta_limit();
        while hi - lo > THETA_TOL {
            let mid = 0.5 * (lo + hi);
            if mid >= hi || mid <= lo {
                break;
            }
            if self.rate_slope(mid)? < epsilon {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta_star = 0.5 * (lo + hi);
        Ok(CramerPoint {
            bound: self.qef_upper_rate(theta_star)? - theta_star * epsilon,
            theta_star,
        })
    }

    pub fn bound_curve(&self, eps_grid: &[f64], method: BoundMethod) -> Result<TailBoundCurve> {
        let env = &self.envelope;
        let points = crate::par::map_slice(eps_grid, |&epsilon| -> Result<CurvePoint> {
            let closed = match method {
                BoundMethod::Numeric => None,
                _ => Some(cramer_bound_closed(env.mu, env.alpha, self.n, epsilon)?),
            };
            let numeric = match method {
                BoundMethod::Closed => None,
                _ => Some(self.cramer_bound_numeric(epsilon)?),
            };
            Ok(CurvePoint {
                epsilon,
                closed,
                numeric,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(TailBoundCurve { method, points })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    Closed,
    Numeric,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub closed: Option<CramerPoint>,
    pub numeric: Option<CramerPoint>,
}

impl CurvePoint {
    /// Optimal risk parameter, from the numeric path when it was run.
    pub fn theta_star(&self) -> Option<f64> {
        self.numeric.or(self.closed).map(|p| p.theta_star)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailBoundCurve {
    pub method: BoundMethod,
    pub points: Vec<CurvePoint>,
}

pub fn n_kernel(model: &OqhoModel, pi: &WeightMatrix, tau: f64) -> Result<f64> {
    pi.check_dim(model)?;
    let steady = gramian_steady(model)?;
    let root = to_complex(&sqrt_psd(pi.matrix())?);
    let e = to_complex(&expm(model.drift(), tau.abs())?);
    Ok(opnorm2(&(&root * e * steady.quantum_cov() * &root)))
}

pub fn f_transform(model: &OqhoModel, pi: &WeightMatrix, lambda: f64) -> Result<f64> {
    Ok(DeviationAnalysis::new(model, pi)?.f_transform(lambda))
}

pub fn f_infnorm(model: &OqhoModel, pi: &WeightMatrix) -> Result<f64> {
    Ok(DeviationAnalysis::new(model, pi)?.f_infnorm())
}

pub fn qef_upper_rate(model: &OqhoModel, pi: &WeightMatrix, theta: f64) -> Result<f64> {
    DeviationAnalysis::new(model, pi)?.qef_upper_rate(theta)
}

pub fn cramer_bound_numeric(model: &OqhoModel, pi: &WeightMatrix, epsilon: f64) -> Result<CramerPoint> {
    DeviationAnalysis::new(model, pi)?.cramer_bound_numeric(epsilon)
}

pub fn bound_curve(
    model: &OqhoModel,
    pi: &WeightMatrix,
    eps_grid: &[f64],
    method: BoundMethod,
) -> Result<TailBoundCurve> {
    DeviationAnalysis::new(model, pi)?.bound_curve(eps_grid, method)
}
