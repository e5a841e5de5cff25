//! State-space model of an open quantum harmonic oscillator built from its
//! CCR, energy and coupling matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matfun::{spectral_abscissa, to_complex, CMat, RMat, HURWITZ_MARGIN};

/// Relative threshold on the smallest singular value of the CCR matrix.
pub const SINGULAR_CCR_TOL: f64 = 1e-12;

fn check_finite(name: &'static str, a: &RMat) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}

/// `𝐉 ⊗ I_{k}` with `𝐉 = [[0, 1], [-1, 0]]`.
pub fn block_symplectic(dim: usize) -> RMat {
    let half = dim / 2;
    let mut j = RMat::zeros(dim, dim);
    for i in 0..half {
        j[(i, half + i)] = 1.0;
        j[(half + i, i)] = -1.0;
    }
    j
}

/// Nonsingular real antisymmetric CCR matrix of even order.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrMatrix {
    theta: RMat,
}

impl CcrMatrix {
    pub fn new(theta: RMat) -> Result<Self> {
        let n = theta.nrows();
        if theta.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "theta is {}x{}",
                theta.nrows(),
                theta.ncols()
            )));
        }
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::OddDimension(n));
        }
        check_finite("theta", &theta)?;
        if theta != -theta.transpose() {
            return Err(Error::NotAntisymmetric("theta"));
        }
        let sv = theta.singular_values();
        let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let largest = sv.iter().copied().fold(0.0, f64::max);
        if smallest <= SINGULAR_CCR_TOL * largest {
            return Err(Error::SingularCcr { smallest });
        }
        Ok(Self { theta })
    }

    /// Position-momentum CCR matrix `½ 𝐉 ⊗ I_{n/2}`.
    pub fn canonical(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::OddDimension(n));
        }
        Self::new(block_symplectic(n) * 0.5)
    }

    pub fn matrix(&self) -> &RMat {
        &self.theta
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }
}

/// Energy matrix `R` (symmetric, n×n) and coupling matrix `M` (m×n).
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    energy: RMat,
    coupling: RMat,
}

impl PhysicalParams {
    pub fn new(energy: RMat, coupling: RMat) -> Result<Self> {
        if energy.nrows() != energy.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "energy matrix is {}x{}",
                energy.nrows(),
                energy.ncols()
            )));
        }
        let m = coupling.nrows();
        if m == 0 || !m.is_multiple_of(2) {
            return Err(Error::OddDimension(m));
        }
        if coupling.ncols() != energy.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix has {} columns, energy matrix has order {}",
                coupling.ncols(),
                energy.nrows()
            )));
        }
        check_finite("R", &energy)?;
        check_finite("M", &coupling)?;
        if energy != energy.transpose() {
            return Err(Error::NotSymmetric("R"));
        }
        Ok(Self { energy, coupling })
    }

    pub fn energy(&self) -> &RMat {
        &self.energy
    }

    pub fn coupling(&self) -> &RMat {
        &self.coupling
    }

    pub fn channels(&self) -> usize {
        self.coupling.nrows()
    }
}

/// Physical parameters together with the derived drift `A`, dispersion `B`,
/// field CCR matrix `J` and Ito matrix `Ω = I + iJ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OqhoModel {
    ccr: CcrMatrix,
    params: PhysicalParams,
    drift: RMat,
    dispersion: RMat,
    field_j: RMat,
    ito: CMat,
    abscissa: f64,
}

/// `‖AΘ + ΘAᵀ + BJBᵀ‖_F` for arbitrary matrices.
pub fn pr_defect(a: &RMat, b: &RMat, theta: &RMat, j: &RMat) -> f64 {
    (a * theta + theta * a.transpose() + b * j * b.transpose()).norm()
}

pub fn build_model(ccr: CcrMatrix, params: PhysicalParams) -> Result<OqhoModel> {
    let n = ccr.dim();
    if params.energy.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "theta has order {n}, energy matrix has order {}",
            params.energy.nrows()
        )));
    }
    let m = params.channels();
    let field_j = block_symplectic(m);
    let theta = ccr.matrix();
    let mt = params.coupling.transpose();
    let drift = theta * (&params.energy + &mt * &field_j * &params.coupling) * 2.0;
    let dispersion = theta * &mt * 2.0;
    let ito = CMat::identity(m, m) + to_complex(&field_j) * Complex64::i();
    let abscissa = spectral_abscissa(&drift)?;
    let model = OqhoModel {
        ccr,
        params,
        drift,
        dispersion,
        field_j,
        ito,
        abscissa,
    };
    let residual = model.pr_residual();
    let bound = 1e-12 * (1.0 + model.drift.norm() * model.theta().norm());
    if residual > bound {
        return Err(Error::CertificateViolation {
            what: "physical realizability",
            residual,
        });
    }
    Ok(model)
}

impl OqhoModel {
    pub fn n(&self) -> usize {
        self.drift.nrows()
    }

    pub fn m(&self) -> usize {
        self.dispersion.ncols()
    }

    pub fn ccr(&self) -> &CcrMatrix {
        &self.ccr
    }

    pub fn theta(&self) -> &RMat {
        self.ccr.matrix()
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn drift(&self) -> &RMat {
        &self.drift
    }

    pub fn dispersion(&self) -> &RMat {
        &self.dispersion
    }

    pub fn field_j(&self) -> &RMat {
        &self.field_j
    }

    pub fn ito(&self) -> &CMat {
        &self.ito
    }

    pub fn abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn pr_residual(&self) -> f64 {
        pr_defect(&self.drift, &self.dispersion, self.theta(), &self.field_j)
    }

    /// `(is_hurwitz, abscissa)` with the Hurwitz margin applied.
    pub fn stability_margin(&self) -> (bool, f64) {
        (self.abscissa < HURWITZ_MARGIN, self.abscissa)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.stability_margin().0
    }

    pub fn require_hurwitz(&self) -> Result<()> {
        if self.is_hurwitz() {
            Ok(())
        } else {
            Err(Error::NotHurwitz {
                abscissa: self.abscissa,
            })
        }
    }
}

pub fn pr_residual(model: &OqhoModel) -> f64 {
    model.pr_residual()
}

pub fn stability_margin(model: &OqhoModel) -> (bool, f64) {
    model.stability_margin()
}

/// JSON form of a model: row-major matrices plus an optional weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub n: usize,
    pub m: usize,
    pub theta: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub energy: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub coupling: Vec<Vec<f64>>,
    #[serde(rename = "Pi", alias = "pi", default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Vec<Vec<f64>>>,
}

/// Converts row-major nested vectors into a matrix of the expected shape.
pub fn matrix_from_rows(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<RMat> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!(
            "{name} must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(a: &RMat) -> Vec<Vec<f64>> {
    a.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl ModelDocument {
    pub fn from_parts(model: &OqhoModel, weight: Option<&RMat>) -> Self {
        Self {
            n: model.n(),
            m: model.m(),
            theta: matrix_to_rows(model.theta()),
            energy: matrix_to_rows(model.params().energy()),
            coupling: matrix_to_rows(model.params().coupling()),
            weight: weight.map(matrix_to_rows),
        }
    }

    pub fn build(&self) -> Result<OqhoModel> {
        let theta = matrix_from_rows("theta", &self.theta, self.n, self.n)?;
        let energy = matrix_from_rows("R", &self.energy, self.n, self.n)?;
        let coupling = matrix_from_rows("M", &self.coupling, self.m, self.n)?;
        build_model(CcrMatrix::new(theta)?, PhysicalParams::new(energy, coupling)?)
    }

    pub fn weight_matrix(&self) -> Result<Option<RMat>> {
        self.weight
            .as_ref()
            .map(|w| matrix_from_rows("Pi", w, self.n, self.n))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn tiny() -> OqhoModel {
        let ccr = CcrMatrix::canonical(2).unwrap();
        let params = PhysicalParams::new(RMat::zeros(2, 2), RMat::identity(2, 2)).unwrap();
        build_model(ccr, params).unwrap()
    }

    #[test]
    fn tiny_drift_and_dispersion() {
        let model = tiny();
        assert_eq!(model.drift(), &(-RMat::identity(2, 2)));
        assert_eq!(model.dispersion(), &dmatrix![0.0, 1.0; -1.0, 0.0]);
        assert!(model.pr_residual() < 1e-14);
        assert_eq!(model.stability_margin(), (true, -1.0));
    }

    #[test]
    fn decoupled_model() {
        let ccr = CcrMatrix::canonical(2).unwrap();
        let r = dmatrix![1.0, 0.5; 0.5, 2.0];
        let params = PhysicalParams::new(r.clone(), RMat::zeros(2, 2)).unwrap();
        let model = build_model(ccr.clone(), params).unwrap();
        assert_eq!(model.dispersion(), &RMat::zeros(2, 2));
        assert_eq!(model.drift(), &(ccr.matrix() * &r * 2.0));
        let zero = PhysicalParams::new(RMat::zeros(2, 2), RMat::zeros(2, 2)).unwrap();
        let (hurwitz, abscissa) = build_model(ccr, zero).unwrap().stability_margin();
        assert!(!hurwitz && abscissa.abs() < 1e-15);
    }

    #[test]
    fn tampering_breaks_realizability() {
        let model = tiny();
        let a = model.drift() + RMat::identity(2, 2);
        let defect = pr_defect(&a, model.dispersion(), model.theta(), model.field_j());
        assert!(defect > 0.1);
    }

    #[test]
    fn ito_matrix_spectrum() {
        for m in [2, 4, 6] {
            let j = block_symplectic(m);
            assert_eq!(&j * &j, -RMat::identity(m, m));
            let omega = CMat::identity(m, m) + to_complex(&j) * Complex64::i();
            for v in crate::matfun::hermitian_eigenvalues(&omega) {
                assert!(v.abs() < 1e-12 || (v - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(
            CcrMatrix::new(dmatrix![0.0, 1.0; 1.0, 0.0]),
            Err(Error::NotAntisymmetric(_))
        ));
        assert!(matches!(
            CcrMatrix::new(RMat::zeros(2, 2)),
            Err(Error::SingularCcr { .. })
        ));
        assert!(matches!(CcrMatrix::new(RMat::zeros(3, 3)), Err(Error::OddDimension(3))));
        assert!(matches!(
            PhysicalParams::new(dmatrix![0.0, 1.0; 0.0, 0.0], RMat::zeros(2, 2)),
            Err(Error::NotSymmetric(_))
        ));
        let ccr = CcrMatrix::canonical(4).unwrap();
        let params = PhysicalParams::new(RMat::zeros(2, 2), RMat::zeros(2, 2)).unwrap();
        assert!(matches!(build_model(ccr, params), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn document_round_trip() {
        let model = tiny();
        let doc = ModelDocument::from_parts(&model, Some(&RMat::identity(2, 2)));
        let rebuilt = doc.build().unwrap();
        assert_eq!(rebuilt.drift(), model.drift());
        assert_eq!(doc.weight_matrix().unwrap().unwrap(), RMat::identity(2, 2));
    }
}
