//! Mean and variance of the quadratic functional `∫₀ᵗ XᵀΠX ds`, their growth
//! rates, the risk threshold `θ₀` and the quartic approximation of the QEF
//! growth rate. All rates assume the system starts in its invariant state.

use crate::error::{Error, Result};
use crate::gaussian::gramian_steady;
use crate::matfun::{
    expm, frobenius_inner, hermitian_eigenvalues, integrate_line, lyap_residual, lyap_solve,
    QuadratureSpec, RMat, PSD_CLIP,
};
use crate::model::OqhoModel;

/// Note attached to every report: rates are for the invariant initial state.
pub const INVARIANT_START: &str = "initialised at the invariant Gaussian state";

/// Real symmetric weight `Π` of the quadratic functional.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(RMat);

impl WeightMatrix {
    pub fn new(pi: RMat) -> Result<Self> {
        if pi.nrows() != pi.ncols() {
            return Err(Error::DimensionMismatch("weight matrix must be square".into()));
        }
        if pi.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Pi"));
        }
        if pi != pi.transpose() {
            return Err(Error::NotSymmetric("Pi"));
        }
        Ok(Self(pi))
    }

    /// Accepts only weights that are PSD up to the clipping band.
    pub fn new_psd(pi: RMat) -> Result<Self> {
        let w = Self::new(pi)?;
        let min_eig = w.min_eigenvalue();
        if min_eig < -PSD_CLIP * w.0.norm() {
            return Err(Error::NotPsd { min_eig });
        }
        Ok(w)
    }

    pub fn identity(n: usize) -> Self {
        Self(RMat::identity(n, n))
    }

    pub fn matrix(&self) -> &RMat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self) -> bool {
        self.dim() == 0 || self.min_eigenvalue() >= -PSD_CLIP * self.0.norm()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    pub(crate) fn check_dim(&self, model: &OqhoModel) -> Result<()> {
        if self.dim() != model.n() {
            return Err(Error::DimensionMismatch(format!(
                "weight has order {}, model has order {}",
                self.dim(),
                model.n()
            )));
        }
        Ok(())
    }
}

/// `PΠP + ΘΠΘ`.
fn fourth_moment_source(p: &RMat, theta: &RMat, pi: &RMat) -> RMat {
    p * pi * p + theta * pi * theta
}

/// `⟨Π, P⟩`.
pub fn mean_rate(model: &OqhoModel, pi: &WeightMatrix) -> Result<f64> {
    pi.check_dim(model)?;
    let steady = gramian_steady(model)?;
    Ok(frobenius_inner(pi.matrix(), steady.gramian()))
}

/// Variance rate with the two Lyapunov solutions behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRate {
    pub rate: f64,
    /// Solution of `AT + TAᵀ + PΠP + ΘΠΘ = 0`.
    pub t_matrix: RMat,
    /// Solution of `AᵀQ + QA + Π = 0`.
    pub q_matrix: RMat,
    pub dual_rate: f64,
}

fn certify_ale(what: &'static str, a: &RMat, x: &RMat, q: &RMat) -> Result<()> {
    let residual = lyap_residual(a, x, q);
    let scale = a.norm() * x.norm() + q.norm();
    if residual > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::CertificateViolation { what, residual });
    }
    Ok(())
}

/// `4⟨Π, T⟩`, certified against the dual form `4⟨Q, PΠP + ΘΠΘ⟩`.
pub fn variance_rate(model: &OqhoModel, pi: &WeightMatrix) -> Result<VarianceRate> {
    pi.check_dim(model)?;
    let steady = gramian_steady(model)?;
    let a = model.drift();
    let source = fourth_moment_source(steady.gramian(), model.theta(), pi.matrix());
    let t = lyap_solve(a, &source)?;
    let t = (&t + t.transpose()) * 0.5;
    let at = a.transpose();
    let q = lyap_solve(&at, pi.matrix())?;
    let q = (&q + q.transpose()) * 0.5;
    certify_ale("fourth-moment Lyapunov equation", a, &t, &source)?;
    certify_ale("dual Lyapunov equation", &at, &q, pi.matrix())?;
    let rate = 4.0 * frobenius_inner(pi.matrix(), &t);
    let dual_rate = 4.0 * frobenius_inner(&q, &source);
    let gap = (rate - dual_rate).abs();
    if gap > 1e-9 * (1.0 + rate.abs()) {
        return Err(Error::CertificateViolation {
            what: "variance rate duality",
            residual: gap,
        });
    }
    Ok(VarianceRate {
        rate,
        t_matrix: t,
        q_matrix: q,
        dual_rate,
    })
}

/// `4∫₀ᵗ (t−τ)⟨Π, e^{τA}(PΠP + ΘΠΘ)e^{τAᵀ}⟩ dτ`.
pub fn variance_finite(
    model: &OqhoModel,
    pi: &WeightMatrix,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    pi.check_dim(model)?;
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let steady = gramian_steady(model)?;
    let source = fourth_moment_source(steady.gramian(), model.theta(), pi.matrix());
    let a = model.drift();
    let integrand = |tau: f64| {
        // expm cannot fail for τ in [0, t] once A is Hurwitz and t is finite.
        let e = expm(a, tau).expect("bounded propagator");
        (t - tau) * frobenius_inner(pi.matrix(), &(&e * &source * e.transpose()))
    };
    Ok(4.0 * integrate_line(integrand, 0.0, t, spec)?)
}

fn threshold_from(mean: f64, pi_t: f64, pi: &RMat, p: &RMat) -> f64 {
    let p_norm = p.norm();
    if pi_t <= 1e-12 * pi.norm() * p_norm * p_norm {
        f64::INFINITY
    } else {
        0.5 * mean / pi_t
    }
}

/// `θ₀ = ½⟨Π,P⟩/⟨Π,T⟩`, or `+∞` when `⟨Π,T⟩` vanishes.
pub fn theta_threshold(model: &OqhoModel, pi: &WeightMatrix) -> Result<f64> {
    let steady = gramian_steady(model)?;
    let mean = mean_rate(model, pi)?;
    let var = variance_rate(model, pi)?;
    Ok(threshold_from(mean, var.rate / 4.0, pi.matrix(), steady.gramian()))
}

/// `θ⟨Π, P + 2θT⟩`.
pub fn quartic_rate(model: &OqhoModel, pi: &WeightMatrix, theta: f64) -> Result<f64> {
    if theta < 0.0 {
        return Err(Error::NegativeTheta(theta));
    }
    let mean = mean_rate(model, pi)?;
    let var = variance_rate(model, pi)?;
    Ok(theta * (mean + 2.0 * theta * var.rate / 4.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticReport {
    pub mean_rate: f64,
    pub t_matrix: RMat,
    pub q_matrix: RMat,
    pub variance_rate: f64,
    pub theta0: f64,
    pub theta: f64,
    pub quartic_rate: f64,
    pub assumption: &'static str,
}

pub fn quartic_report(model: &OqhoModel, pi: &WeightMatrix, theta: f64) -> Result<QuarticReport> {
    if theta < 0.0 {
        return Err(Error::NegativeTheta(theta));
    }
    let steady = gramian_steady(model)?;
    let mean = mean_rate(model, pi)?;
    let var = variance_rate(model, pi)?;
    let pi_t = var.rate / 4.0;
    Ok(QuarticReport {
        mean_rate: mean,
        variance_rate: var.rate,
        theta0: threshold_from(mean, pi_t, pi.matrix(), steady.gramian()),
        theta,
        quartic_rate: theta * (mean + 2.0 * theta * pi_t),
        t_matrix: var.t_matrix,
        q_matrix: var.q_matrix,
        assumption: INVARIANT_START,
    })
}
