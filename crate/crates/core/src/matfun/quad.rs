//! Adaptive Gauss–Kronrod quadrature for scalar, complex and matrix-valued
//! integrands, real-line integration with tail control, and tensor-grid
//! trapezoid cubature.

use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Known decay of an integrand beyond some abscissa: `|f(x)| ≤ c·e^{-rate·|x|}`
/// or `|f(x)| ≤ c·|x|^{-exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailDecay {
    Exponential { c: f64, rate: f64 },
    Algebraic { c: f64, exponent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub tail_decay_hint: Option<TailDecay>,
    /// Frequency scale of the `x = s·tan(u)` map used on the real line.
    pub scale: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
            tail_decay_hint: None,
            scale: 1.0,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_tail(mut self, tail: TailDecay) -> Self {
        self.tail_decay_hint = Some(tail);
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t < 1.0;
        if !ok(self.abs_tol) || !ok(self.rel_tol) || self.max_subdivisions < 16 || !(self.scale > 0.0)
        {
            return Err(Error::InvalidArgument(format!("bad quadrature spec {self:?}")));
        }
        Ok(())
    }
}

/// Values that can be integrated: anything that flattens to a real vector.
pub trait QuadValue: Sized {
    fn flatten(&self, out: &mut Vec<f64>);
    fn unflatten(template: &Self, data: &[f64]) -> Self;
}

impl QuadValue for f64 {
    fn flatten(&self, out: &mut Vec<f64>) {
        out.push(*self);
    }
    fn unflatten(_: &Self, data: &[f64]) -> Self {
        data[0]
    }
}

impl QuadValue for Complex64 {
    fn flatten(&self, out: &mut Vec<f64>) {
        out.push(self.re);
        out.push(self.im);
    }
    fn unflatten(_: &Self, data: &[f64]) -> Self {
        Complex64::new(data[0], data[1])
    }
}

impl QuadValue for Vec<f64> {
    fn flatten(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }
    fn unflatten(_: &Self, data: &[f64]) -> Self {
        data.to_vec()
    }
}

impl QuadValue for DMatrix<f64> {
    fn flatten(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.as_slice());
    }
    fn unflatten(template: &Self, data: &[f64]) -> Self {
        DMatrix::from_column_slice(template.nrows(), template.ncols(), data)
    }
}

impl QuadValue for DMatrix<Complex64> {
    fn flatten(&self, out: &mut Vec<f64>) {
        for z in self.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    fn unflatten(template: &Self, data: &[f64]) -> Self {
        let vals: Vec<Complex64> = data
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        DMatrix::from_column_slice(template.nrows(), template.ncols(), &vals)
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> Vec<f64>>(f: &F, a: f64, b: f64) -> Result<Segment> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let dim = fc.len();
    let mut kron: Vec<f64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<f64> = fc.iter().map(|v| v * WG[3]).collect();
    for k in 0..7 {
        let dx = h * XGK[k];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        if f1.len() != dim || f2.len() != dim {
            return Err(Error::InvalidArgument("integrand changed shape".into()));
        }
        for i in 0..dim {
            let s = f1[i] + f2[i];
            kron[i] += WGK[k] * s;
            if k % 2 == 1 {
                gauss[i] += WG[k / 2] * s;
            }
        }
    }
    let mut error = 0.0f64;
    for i in 0..dim {
        kron[i] *= h;
        gauss[i] *= h;
        error = error.max((kron[i] - gauss[i]).abs());
    }
    if kron.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence {
            estimate: f64::NAN,
            error: f64::INFINITY,
        });
    }
    Ok(Segment {
        a,
        b,
        value: kron,
        error,
    })
}

fn adaptive_flat<F: Fn(f64) -> Vec<f64>>(
    f: &F,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(gk15(f, w[0], w[1])?);
        }
    }
    let Some(first) = heap.peek() else {
        return Ok(Vec::new());
    };
    let dim = first.value.len();
    let span = breakpoints.last().unwrap() - breakpoints[0];
    let mut count = heap.len();
    loop {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        for s in heap.iter() {
            for i in 0..dim {
                total[i] += s.value[i];
            }
            err += s.error;
        }
        let mag = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if err <= spec.abs_tol.max(spec.rel_tol * mag) {
            return Ok(total);
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if (worst.b - worst.a) <= 1e-14 * span.abs().max(1e-300) || count >= spec.max_subdivisions {
            heap.push(worst);
            let mut total = vec![0.0; dim];
            for s in heap.iter() {
                for i in 0..dim {
                    total[i] += s.value[i];
                }
            }
            return Err(Error::NoConvergence {
                estimate: total.first().copied().unwrap_or(0.0),
                error: err,
            });
        }
        heap.push(gk15(f, worst.a, mid)?);
        heap.push(gk15(f, mid, worst.b)?);
        count += 1;
    }
}

fn flat_fn<V: QuadValue, F: Fn(f64) -> V>(f: F) -> impl Fn(f64) -> Vec<f64> {
    move |x| {
        let mut out = Vec::new();
        f(x).flatten(&mut out);
        out
    }
}

/// Adaptive integral of `f` over `[a, b]` with optional interior breakpoints.
pub fn integrate_line_with<V, F>(
    f: F,
    a: f64,
    b: f64,
    interior: &[f64],
    spec: &QuadratureSpec,
) -> Result<V>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidArgument("integration limits must be finite".into()));
    }
    let template = f(0.5 * (a + b));
    if a == b {
        let mut z = Vec::new();
        template.flatten(&mut z);
        z.iter_mut().for_each(|v| *v = 0.0);
        return Ok(V::unflatten(&template, &z));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    pts.extend(interior.iter().copied().filter(|&x| x > lo && x < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    let flat = adaptive_flat(&flat_fn(f), &pts, spec)?;
    let flat: Vec<f64> = flat.iter().map(|v| v * sign).collect();
    Ok(V::unflatten(&template, &flat))
}

/// Adaptive scalar integral over `[a, b]`.
pub fn integrate_line<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_line_with(f, a, b, &[], spec)
}

/// Chooses the symmetric truncation point so that the hinted tail mass beyond
/// it (both sides) is below `abs_tol / 10`.
fn truncation<V: QuadValue, F: Fn(f64) -> V>(f: &F, spec: &QuadratureSpec) -> Result<f64> {
    let budget = spec.abs_tol / 20.0;
    let lam = match spec.tail_decay_hint {
        Some(TailDecay::Exponential { c, rate }) => {
            if c <= 0.0 {
                0.0
            } else {
                ((c / (rate * budget)).ln() / rate).max(0.0)
            }
        }
        Some(TailDecay::Algebraic { c, exponent }) => {
            if exponent <= 1.0 {
                return Err(Error::MissingTailBound { exponent });
            }
            if c <= 0.0 {
                0.0
            } else {
                (c / ((exponent - 1.0) * budget)).powf(1.0 / (exponent - 1.0))
            }
        }
        None => {
            let probe = |x: f64| {
                let mut a = Vec::new();
                let mut b = Vec::new();
                f(x).flatten(&mut a);
                f(-x).flatten(&mut b);
                a.iter().chain(b.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
            };
            let l1 = 1e3 * spec.scale;
            let (v1, v2) = (probe(l1), probe(2.0 * l1));
            if v1 == 0.0 && v2 == 0.0 {
                l1
            } else {
                let exponent = (v1 / v2).log2();
                if !(exponent >= 1.9) {
                    return Err(Error::MissingTailBound { exponent });
                }
                let c = v1 * l1.powf(exponent);
                (c / ((exponent - 1.0) * budget))
                    .powf(1.0 / (exponent - 1.0))
                    .max(l1)
            }
        }
    };
    Ok(lam)
}

fn mapped_integral<V, F>(f: F, u_lo: f64, u_hi: f64, spec: &QuadratureSpec) -> Result<V>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    let s = spec.scale;
    let template = f(0.0);
    let g = |u: f64| {
        let (sn, cs) = u.sin_cos();
        let jac = s / (cs * cs);
        let mut out = Vec::new();
        f(s * sn / cs).flatten(&mut out);
        out.iter_mut().for_each(|v| *v *= jac);
        out
    };
    let pieces = 16;
    let pts: Vec<f64> = (0..=pieces)
        .map(|k| u_lo + (u_hi - u_lo) * k as f64 / pieces as f64)
        .collect();
    let flat = adaptive_flat(&g, &pts, spec)?;
    Ok(V::unflatten(&template, &flat))
}

/// Integral over the whole real line. The range is truncated to `[-Λ, Λ]`
/// with `Λ` taken from the tail hint (or a probed algebraic tail), and the
/// truncated range is integrated after the substitution `x = s·tan(u)`.
pub fn integrate_realline_with<V, F>(f: F, spec: &QuadratureSpec) -> Result<V>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    spec.validate()?;
    let lam = truncation(&f, spec)?;
    let u = (lam / spec.scale).atan().min(FRAC_PI_2);
    if u == 0.0 {
        let template = f(0.0);
        let mut z = Vec::new();
        template.flatten(&mut z);
        z.iter_mut().for_each(|v| *v = 0.0);
        return Ok(V::unflatten(&template, &z));
    }
    mapped_integral(f, -u, u, spec)
}

pub fn integrate_realline<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    integrate_realline_with(f, spec)
}

/// Integral over `[0, ∞)` with the same truncation policy as the real line.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let lam = truncation(&f, spec)?;
    let u = (lam / spec.scale).atan().min(FRAC_PI_2);
    if u == 0.0 {
        return Ok(0.0);
    }
    mapped_integral(f, 0.0, u, spec)
}

/// Composite trapezoid weights for `grid` equispaced nodes on `[0, t]`.
pub fn trapezoid_weights(t: f64, grid: usize) -> (Vec<f64>, Vec<f64>) {
    let h = t / (grid - 1) as f64;
    let nodes = (0..grid).map(|i| i as f64 * h).collect();
    let weights = (0..grid)
        .map(|i| if i == 0 || i == grid - 1 { 0.5 * h } else { h })
        .collect();
    (nodes, weights)
}

/// `Σ w_{i1}⋯w_{ir} f(i1, …, ir)` over the full index cube, parallel over the
/// leading index. Partial sums are combined in index order.
pub fn integrate_cube_indexed<V, F>(r: usize, weights: &[f64], f: F) -> Result<V>
where
    V: QuadValue + Send,
    F: Fn(&[usize]) -> V + Sync + Send,
{
    if r == 0 || r > 4 {
        return Err(Error::DimensionTooLarge(r));
    }
    let g = weights.len();
    let template = {
        let idx = vec![0usize; r];
        f(&idx)
    };
    let partial = par::map_range(g, |i0| {
        let mut acc: Vec<f64> = Vec::new();
        let mut idx = vec![0usize; r];
        idx[0] = i0;
        let inner = g.pow((r - 1) as u32);
        let mut buf = Vec::new();
        for lin in 0..inner {
            let mut rem = lin;
            let mut w = weights[i0];
            for d in 1..r {
                idx[d] = rem % g;
                rem /= g;
                w *= weights[idx[d]];
            }
            buf.clear();
            f(&idx).flatten(&mut buf);
            if acc.is_empty() {
                acc = vec![0.0; buf.len()];
            }
            for (a, v) in acc.iter_mut().zip(buf.iter()) {
                *a += w * v;
            }
        }
        acc
    });
    let mut total: Vec<f64> = Vec::new();
    for p in partial {
        if total.is_empty() {
            total = p;
        } else {
            for (a, v) in total.iter_mut().zip(p.iter()) {
                *a += v;
            }
        }
    }
    Ok(V::unflatten(&template, &total))
}

/// Tensor-grid trapezoid estimate of `∫_{[0,t]^r} f`.
pub fn integrate_cube<V, F>(f: F, t: f64, r: usize, grid: usize) -> Result<V>
where
    V: QuadValue + Send,
    F: Fn(&[f64]) -> V + Sync + Send,
{
    if r > 4 {
        return Err(Error::DimensionTooLarge(r));
    }
    if grid < 3 {
        return Err(Error::InvalidArgument(format!("grid must be at least 3, got {grid}")));
    }
    let (nodes, weights) = trapezoid_weights(t, grid);
    integrate_cube_indexed(r, &weights, |idx: &[usize]| {
        let pts: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
        f(&pts)
    })
}
