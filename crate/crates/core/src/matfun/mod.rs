//! Dense matrix functions, Lyapunov solves and quadrature shared by every
//! analysis module.

mod expm;
mod linalg;
mod lyap;
mod quad;

pub use expm::expm;
pub use linalg::{
    eigenvectors, frobenius_inner, hermitian_eigenvalues, hermitian_part, inv_sqrt_psd,
    max_abs, opnorm2, psd_cholesky, spectral_abscissa, sqrt_psd, to_complex, try_eigenvalues,
};
pub use lyap::{lyap_residual, lyap_solve, lyap_solve_shifted, HURWITZ_MARGIN};
pub use quad::{
    integrate_cube, integrate_cube_indexed, integrate_halfline, integrate_line,
    integrate_line_with, integrate_realline, integrate_realline_with, trapezoid_weights,
    QuadValue, QuadratureSpec, TailDecay,
};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Real dense matrix.
pub type RMat = DMatrix<f64>;
/// Complex dense matrix.
pub type CMat = DMatrix<Complex64>;

/// PSD clipping band, relative to the matrix norm.
pub const PSD_CLIP: f64 = 1e-10;
