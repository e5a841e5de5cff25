use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn norm1<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, s: f64) -> DMatrix<T> {
    a.map(|x| x * T::from_real(s))
}

/// Matrix exponential `e^{tA}` by scaling and squaring with diagonal Padé
/// approximants (orders 3 to 13, selected by the 1-norm).
pub fn expm<T>(a: &DMatrix<T>, t: f64) -> Result<DMatrix<T>>
where
    T: ComplexField<RealField = f64>,
{
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let at = scaled(a, t);
    let norm = norm1(&at);
    if !norm.is_finite() {
        return Err(Error::Overflow { norm });
    }
    let ident = DMatrix::<T>::identity(n, n);
    if norm == 0.0 {
        return Ok(ident);
    }

    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(&at, coeffs);
        }
    }

    let s = (norm / THETA_13).log2().ceil().max(0.0);
    if s > 1000.0 {
        return Err(Error::Overflow { norm });
    }
    let s = s as i32;
    let a1 = scaled(&at, 0.5f64.powi(s));
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| T::from_real(B13[k]);

    let inner_u = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = &a1 * (inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1));
    let inner_v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.clone().modulus().is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}

fn pade_low<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &[f64]) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let ident = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u_even = DMatrix::<T>::zeros(n, n);
    let mut v = DMatrix::<T>::zeros(n, n);
    let m = b.len() - 1;
    for k in (0..=m).step_by(2) {
        if k > 0 {
            power = &power * &a2;
        }
        v += &power * T::from_real(b[k]);
        if k < m {
            u_even += &power * T::from_real(b[k + 1]);
        }
    }
    let u = a * u_even;
    pade_solve(&u, &v)
}

fn pade_solve<T: ComplexField<RealField = f64>>(
    u: &DMatrix<T>,
    v: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::LinearSolveFailure("singular Padé denominator".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use num_complex::Complex64;

    #[test]
    fn zero_time_is_identity() {
        let a = dmatrix![1.0, 2.0; -3.0, 4.0];
        assert_eq!(expm(&a, 0.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn diagonal_decay() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let e = expm(&a, 1.0).unwrap();
        let expect = (-1.0f64).exp();
        assert!((e[(0, 0)] - expect).abs() < 1e-15);
        assert!(e[(0, 1)].abs() < 1e-16);
    }

    #[test]
    fn rotation_generator() {
        let j = dmatrix![0.0, 1.0; -1.0, 0.0];
        for &tau in &[std::f64::consts::FRAC_PI_2, 0.3, 7.0, 40.0] {
            let e = expm(&j, tau).unwrap();
            let expect = dmatrix![tau.cos(), tau.sin(); -tau.sin(), tau.cos()];
            assert!((e - expect).abs().max() < 1e-12 * (1.0 + tau), "tau={tau}");
        }
    }

    #[test]
    fn complex_scalar_matches_exp() {
        let z = Complex64::new(-0.3, 2.0);
        let a = DMatrix::from_element(1, 1, z);
        let e = expm(&a, 1.7).unwrap();
        assert!((e[(0, 0)] - (z * 1.7).exp()).norm() < 1e-14);
    }

    #[test]
    fn huge_norm_overflows() {
        let a = DMatrix::from_element(2, 2, 1e300);
        assert!(matches!(expm(&a, 1e10), Err(Error::Overflow { .. })));
    }
}
