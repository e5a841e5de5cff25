//! Asymptotic cumulant growth rates from the spectral density.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::descent::delta_table;
use crate::error::{Error, Result};
use crate::gaussian::SpectralDensity;
use crate::matfun::{integrate_realline_with, opnorm2, to_complex, CMat, QuadratureSpec};
use crate::model::OqhoModel;
use crate::quartic::WeightMatrix;

pub const MAX_RATE_ORDER: usize = 10;

/// Evaluates `Σ_γ Δ_{r,γ} Tr(ΠD ∏_j ΠD^{[γ_j]} ΠD^{[1]})` at single
/// frequencies, with `ΠD` and `ΠD^{[1]}` computed once per frequency and
/// pattern prefixes shared by a depth-first walk.
pub struct RateIntegrand<'a> {
    density: SpectralDensity<'a>,
    pi: CMat,
    order: usize,
    counts: Vec<u64>,
}

impl<'a> RateIntegrand<'a> {
    pub fn new(model: &'a OqhoModel, pi: &WeightMatrix, order: usize) -> Result<Self> {
        if !(2..=MAX_RATE_ORDER).contains(&order) {
            return Err(Error::OrderTooLarge {
                order,
                max: MAX_RATE_ORDER,
            });
        }
        pi.check_dim(model)?;
        Ok(Self {
            density: SpectralDensity::new(model)?,
            pi: to_complex(pi.matrix()),
            order,
            counts: delta_table(order)?.counts().to_vec(),
        })
    }

    fn walk(
        &self,
        prefix: &CMat,
        depth: usize,
        pattern: usize,
        factors: [&CMat; 2],
        closing_t: &CMat,
        acc: &mut Complex64,
    ) {
        let bits = self.order - 2;
        if depth == bits {
            let count = self.counts[pattern];
            if count > 0 {
                let tr: Complex64 = prefix.iter().zip(closing_t.iter()).map(|(x, y)| x * y).sum();
                *acc += tr * count as f64;
            }
            return;
        }
        for bit in 0..2 {
            let next = prefix * factors[bit];
            self.walk(&next, depth + 1, pattern << 1 | bit, factors, closing_t, acc);
        }
    }

    pub fn at(&self, lambda: f64) -> Result<Complex64> {
        let value = self.density.at(lambda)?;
        let direct = &self.pi * &value.density;
        let flipped = &self.pi * &value.flipped;
        let closing_t = flipped.transpose();
        let mut acc = Complex64::new(0.0, 0.0);
        self.walk(&direct, 0, 0, [&direct, &flipped], &closing_t, &mut acc);
        Ok(acc)
    }

    /// `2^{r−2}/π`.
    pub fn prefactor(&self) -> f64 {
        2f64.powi(self.order as i32 - 2) / PI
    }
}

/// Frequency scale for the real-line substitution: the spectral radius of
/// the drift, which sets the width of the resonances of `D`.
pub fn frequency_scale(model: &OqhoModel) -> f64 {
    opnorm2(model.drift()).max(1e-3)
}

/// Growth rate `lim K_r(φ(t))/t` from the spectral density.
pub fn cumulant_rate(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let integrand = RateIntegrand::new(model, pi, r)?;
    if pi.matrix().iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let spec = QuadratureSpec {
        scale: frequency_scale(model),
        ..*spec
    };
    // Integrand evaluation only fails on a singular resolvent, excluded by
    // the Hurwitz check in the constructor.
    let total: Complex64 =
        integrate_realline_with(|l| integrand.at(l).expect("regular resolvent"), &spec)?;
    let value = total * integrand.prefactor();
    if value.im.abs() > 1e-8 * value.re.abs().max(spec.abs_tol) {
        return Err(Error::CertificateViolation {
            what: "real cumulant rate",
            residual: value.im.abs(),
        });
    }
    Ok(value.re)
}
