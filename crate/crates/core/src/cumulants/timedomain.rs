//! Finite-horizon cumulants from the time-domain trace formula, evaluated on
//! a tensor grid.

use num_complex::Complex64;

use super::descent::delta_table;
use crate::error::{Error, Result};
use crate::gaussian::CovarianceKernel;
use crate::matfun::{integrate_cube_indexed, to_complex, trapezoid_weights, CMat};
use crate::model::OqhoModel;
use crate::par;
use crate::quartic::WeightMatrix;

pub const MAX_TD_ORDER: usize = 3;
pub const MIN_TD_GRID: usize = 5;

/// `ΠS(t_a − t_b)` and `ΠS(t_a − t_b)ᵀ` for all node pairs. On a uniform
/// grid only the `2g − 1` index differences are stored.
enum KernelTable {
    Uniform { g: usize, plain: Vec<CMat>, transposed: Vec<CMat> },
    General { g: usize, plain: Vec<CMat>, transposed: Vec<CMat> },
}

impl KernelTable {
    fn build(kernel: &CovarianceKernel, pi: &CMat, times: &[f64], uniform: bool) -> Result<Self> {
        let g = times.len();
        let make = |tau: f64| -> Result<(CMat, CMat)> {
            let s = kernel.s(tau)?;
            Ok((pi * &s, pi * s.transpose()))
        };
        if uniform {
            let h = if g > 1 { times[1] - times[0] } else { 0.0 };
            let (plain, transposed) = (0..2 * g - 1)
                .map(|k| make((k as f64 - (g - 1) as f64) * h))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            Ok(Self::Uniform { g, plain, transposed })
        } else {
            let mut pairs = Vec::with_capacity(g * g);
            for &ta in times {
                for &tb in times {
                    pairs.push(make(ta - tb)?);
                }
            }
            let (plain, transposed) = pairs.into_iter().unzip();
            Ok(Self::General { g, plain, transposed })
        }
    }

    fn slot(&self, a: usize, b: usize) -> usize {
        match self {
            Self::Uniform { g, .. } => a + g - 1 - b,
            Self::General { g, .. } => a * g + b,
        }
    }

    /// `ΠS(t_a − t_b)`.
    fn plain(&self, a: usize, b: usize) -> &CMat {
        let k = self.slot(a, b);
        match self {
            Self::Uniform { plain, .. } | Self::General { plain, .. } => &plain[k],
        }
    }

    /// `ΠS(t_a − t_b)ᵀ`.
    fn transposed(&self, a: usize, b: usize) -> &CMat {
        let k = self.slot(a, b);
        match self {
            Self::Uniform { transposed, .. } | Self::General { transposed, .. } => &transposed[k],
        }
    }
}

/// `2^{r−1} Σ_γ Δ_{r,γ} Tr(ΠS(t₁−t₂) Π_j ΠS^{[γ_j]}(t_j−t_{j+1}) ΠS(t₁−t_r)ᵀ)`
/// at one grid point.
fn trace_term(table: &KernelTable, idx: &[usize], deltas: &[u64]) -> Complex64 {
    let r = idx.len();
    let closing = table.transposed(idx[0], idx[r - 1]);
    let mut sum = Complex64::new(0.0, 0.0);
    for (pattern, &count) in deltas.iter().enumerate() {
        let mut m = table.plain(idx[0], idx[1]).clone();
        for j in 1..r - 1 {
            let bit = pattern >> (r - 2 - j) & 1;
            // S^{[1]}(t_j − t_{j+1}) = S(t_{j+1} − t_j)ᵀ.
            let factor = if bit == 0 {
                table.plain(idx[j], idx[j + 1])
            } else {
                table.transposed(idx[j + 1], idx[j])
            };
            m *= factor;
        }
        let tr: Complex64 = m.iter().zip(closing.transpose().iter()).map(|(x, y)| x * y).sum();
        sum += tr * count as f64;
    }
    sum * 2f64.powi(r as i32 - 1)
}

fn check_order(r: usize) -> Result<()> {
    if !(2..=MAX_TD_ORDER).contains(&r) {
        return Err(Error::OrderTooLarge {
            order: r,
            max: MAX_TD_ORDER,
        });
    }
    Ok(())
}

fn finish(value: Complex64) -> Result<f64> {
    if value.im.abs() > 1e-8 * value.norm().max(1.0) {
        return Err(Error::CertificateViolation {
            what: "real time-domain cumulant",
            residual: value.im.abs(),
        });
    }
    Ok(value.re)
}

fn prepare(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    times: &[f64],
    uniform: bool,
) -> Result<(KernelTable, Vec<u64>)> {
    check_order(r)?;
    pi.check_dim(model)?;
    let kernel = CovarianceKernel::new(model)?;
    let table = KernelTable::build(&kernel, &to_complex(pi.matrix()), times, uniform)?;
    Ok((table, delta_table(r)?.counts().to_vec()))
}

/// Sum over the full index cube.
fn evaluate_cube(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    times: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let (table, deltas) = prepare(model, pi, r, times, false)?;
    let value: Complex64 = integrate_cube_indexed(r, weights, |idx: &[usize]| {
        trace_term(&table, idx, &deltas)
    })?;
    finish(value)
}

/// On a uniform grid the trace term depends on consecutive index
/// differences only, so the cube sum is regrouped by difference vector with
/// the multiplicity weight `W(d) = Σ_{i₁} Π_m w_{i_m}`. This is the same
/// finite sum in a different order.
/// Lowest start index and summed weight `Σ_s Π_k w[s − c_k]` of a
/// difference vector, where `c_k` are its partial sums. Valid starts form an
/// interval; with equal interior weights only starts that put a node on an
/// endpoint deviate from `interiorʳ`.
fn multiplicity(weights: &[f64], diffs: &[i64]) -> Option<(i64, f64)> {
    let g = weights.len() as i64;
    let mut offsets = Vec::with_capacity(diffs.len() + 1);
    offsets.push(0i64);
    for &d in diffs {
        offsets.push(offsets[offsets.len() - 1] + d);
    }
    let lo = *offsets.iter().max()?;
    let hi = g - 1 + *offsets.iter().min()?;
    if lo > hi {
        return None;
    }
    let product = |s: i64| offsets.iter().map(|c| weights[(s - c) as usize]).product::<f64>();
    if g < 3 {
        return Some((lo, (lo..=hi).map(product).sum()));
    }
    let mut special: Vec<i64> = offsets
        .iter()
        .flat_map(|c| [*c, g - 1 + c])
        .filter(|s| (lo..=hi).contains(s))
        .collect();
    special.sort_unstable();
    special.dedup();
    let interior = weights[1].powi(offsets.len() as i32);
    let plain = (hi - lo + 1 - special.len() as i64) as f64 * interior;
    Some((lo, plain + special.into_iter().map(product).sum::<f64>()))
}

fn evaluate_uniform(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    times: &[f64],
    weights: &[f64],
) -> Result<f64> {
    let (table, deltas) = prepare(model, pi, r, times, true)?;
    let g = weights.len() as i64;
    let span = (2 * g - 1) as usize;
    let offset = g - 1;
    let inner = span.pow((r - 2) as u32);
    let partial = par::map_range(span, |first| {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut diffs = vec![0i64; r - 1];
        let mut idx = vec![0usize; r];
        diffs[0] = first as i64 - offset;
        for lin in 0..inner {
            let mut rem = lin;
            for d in diffs.iter_mut().skip(1) {
                *d = (rem % span) as i64 - offset;
                rem /= span;
            }
            let Some((start, weight)) = multiplicity(weights, &diffs) else { continue };
            idx[0] = start as usize;
            for m in 1..r {
                idx[m] = (idx[m - 1] as i64 - diffs[m - 1]) as usize;
            }
            acc += trace_term(&table, &idx, &deltas) * weight;
        }
        acc
    });
    finish(partial.into_iter().sum())
}

/// The trace formula summed against arbitrary nodes and weights, i.e. the
/// exact `r`-th cumulant of `Σ_i w_i X(t_i)ᵀΠX(t_i)`.
pub fn cumulant_td_discrete(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    times: &[f64],
    weights: &[f64],
) -> Result<f64> {
    if times.len() != weights.len() || times.is_empty() {
        return Err(Error::DimensionMismatch("times and weights".into()));
    }
    evaluate_cube(model, pi, r, times, weights)
}

/// `r`-th cumulant of `∫₀ᵗ XᵀΠX ds` by the trapezoid rule with `grid` nodes
/// per axis.
pub fn cumulant_finite_td(
    model: &OqhoModel,
    pi: &WeightMatrix,
    r: usize,
    t: f64,
    grid: usize,
) -> Result<f64> {
    check_order(r)?;
    if !(t > 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if grid < MIN_TD_GRID {
        return Err(Error::InvalidArgument(format!(
            "grid must have at least {MIN_TD_GRID} points, got {grid}"
        )));
    }
    let (times, weights) = trapezoid_weights(t, grid);
    evaluate_uniform(model, pi, r, &times, &weights)
}
