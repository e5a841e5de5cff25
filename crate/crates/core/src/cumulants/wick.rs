//! Brute-force moments of a discretised quadratic functional by Wick pairing.
//!
//! Independent of the descent tables: every pairing of the `2r` operator
//! positions is enumerated and its cycles are traced through the weighted
//! kernel `K = √Π S √Π`.

use num_complex::Complex64;

use super::moments::cumulants_from_moments;
use crate::error::{Error, Result};
use crate::gaussian::CovarianceKernel;
use crate::matfun::{sqrt_psd, to_complex, CMat};
use crate::model::OqhoModel;
use crate::quartic::WeightMatrix;

pub const MAX_ORACLE_ORDER: usize = 3;
pub const MAX_ORACLE_GRID: usize = 20;

/// `K(τ) = √Π S(τ) √Π`.
#[derive(Debug, Clone)]
pub struct WeightedKernel<'a> {
    kernel: CovarianceKernel<'a>,
    root: CMat,
}

impl<'a> WeightedKernel<'a> {
    pub fn new(model: &'a OqhoModel, pi: &WeightMatrix) -> Result<Self> {
        pi.check_dim(model)?;
        Ok(Self {
            kernel: CovarianceKernel::new(model)?,
            root: to_complex(&sqrt_psd(pi.matrix())?),
        })
    }

    pub fn at(&self, tau: f64) -> Result<CMat> {
        Ok(&self.root * self.kernel.s(tau)? * &self.root)
    }
}

/// All perfect matchings of `0..2r`, as partner arrays.
pub fn regular_pairings(r: usize) -> Vec<Vec<usize>> {
    fn rec(partner: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let Some(first) = partner.iter().position(|&p| p == usize::MAX) else {
            out.push(partner.clone());
            return;
        };
        for second in first + 1..partner.len() {
            if partner[second] == usize::MAX {
                partner[first] = second;
                partner[second] = first;
                rec(partner, out);
                partner[first] = usize::MAX;
                partner[second] = usize::MAX;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut vec![usize::MAX; 2 * r], &mut out);
    out
}

/// Sum over pairings of products of cycle traces, for one assignment of
/// operator factors to grid nodes.
fn pairing_sum(pairings: &[Vec<usize>], nodes: &[usize], table: &[Vec<CMat>]) -> Complex64 {
    let dim = table[0][0].nrows();
    let mut total = Complex64::new(0.0, 0.0);
    let mut visited = vec![false; 2 * nodes.len()];
    for partner in pairings {
        visited.iter_mut().for_each(|v| *v = false);
        let mut product = Complex64::new(1.0, 0.0);
        for start in 0..partner.len() {
            if visited[start] {
                continue;
            }
            let mut m = CMat::identity(dim, dim);
            let mut h = start;
            loop {
                let q = partner[h];
                visited[h] = true;
                visited[q] = true;
                let (a, b) = (nodes[h / 2], nodes[q / 2]);
                if h < q {
                    m *= &table[a][b];
                } else {
                    m *= table[b][a].transpose();
                }
                h = q ^ 1;
                if h == start {
                    break;
                }
            }
            product *= m.trace();
        }
        total += product;
    }
    total
}

/// `E(φ̂^r)` for `φ̂ = Σ_i w_i X(t_i)ᵀΠX(t_i)` in the invariant state.
pub fn wick_moment_oracle(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    times: &[f64],
    weights: &[f64],
) -> Result<f64> {
    if r == 0 || r > MAX_ORACLE_ORDER {
        return Err(Error::OrderTooLarge {
            order: r,
            max: MAX_ORACLE_ORDER,
        });
    }
    let g = times.len();
    if g > MAX_ORACLE_GRID {
        return Err(Error::GridTooLarge {
            points: g,
            max: MAX_ORACLE_GRID,
        });
    }
    if weights.len() != g || g == 0 {
        return Err(Error::DimensionMismatch("times and weights".into()));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::UnsortedTimes);
    }
    let kernel = WeightedKernel::new(model, pi)?;
    let mut table = Vec::with_capacity(g);
    for &ta in times {
        let row = times
            .iter()
            .map(|&tb| kernel.at(ta - tb))
            .collect::<Result<Vec<_>>>()?;
        table.push(row);
    }
    let pairings = regular_pairings(r);
    let mut total = Complex64::new(0.0, 0.0);
    let mut nodes = vec![0usize; r];
    for lin in 0..g.pow(r as u32) {
        let mut rem = lin;
        let mut w = 1.0;
        for slot in nodes.iter_mut() {
            *slot = rem % g;
            rem /= g;
            w *= weights[*slot];
        }
        total += pairing_sum(&pairings, &nodes, &table) * w;
    }
    let scale = total.norm().max(1.0);
    if total.im.abs() > 1e-8 * scale {
        return Err(Error::CertificateViolation {
            what: "real moment",
            residual: total.im.abs(),
        });
    }
    Ok(total.re)
}

/// Cumulants `κ₁..κ_r` of the discretised functional from oracle moments.
pub fn wick_cumulants(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    times: &[f64],
    weights: &[f64],
) -> Result<Vec<f64>> {
    let moments = (1..=r)
        .map(|k| wick_moment_oracle(model, pi, k, times, weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(cumulants_from_moments(&moments))
}
