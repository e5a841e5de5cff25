//! Built-in models: the two-mode example with its published reference values,
//! and the one-mode unit model with closed-form answers.

use nalgebra::DMatrix;

use crate::matfun::RMat;
use crate::model::{build_model, CcrMatrix, OqhoModel, PhysicalParams};

pub const PAPER_EXAMPLE: &str = "paper-example";
pub const TINY: &str = "tiny";

fn rows4(data: [[f64; 4]; 4]) -> RMat {
    DMatrix::from_fn(4, 4, |i, j| data[i][j])
}

pub fn example_energy() -> RMat {
    rows4([
        [-0.1027, 1.3449, -0.2403, -1.3994],
        [1.3449, 1.5008, -0.1856, 0.9212],
        [-0.2403, -0.1856, -0.5704, -0.4146],
        [-1.3994, 0.9212, -0.4146, -0.3233],
    ])
}

pub fn example_coupling() -> RMat {
    rows4([
        [0.8726, 0.1632, 2.1844, -1.9270],
        [0.1179, -0.8147, -0.0938, 0.5214],
        [-1.5031, 0.4037, -0.2942, -2.0544],
        [0.9218, 0.7562, -0.5048, -0.2698],
    ])
}

pub fn example_weight() -> RMat {
    rows4([
        [3.5050, -0.5447, 0.0672, -2.3918],
        [-0.5447, 4.0758, -1.1876, 0.0215],
        [0.0672, -1.1876, 5.1422, -1.4628],
        [-2.3918, 0.0215, -1.4628, 4.5416],
    ])
}

/// Printed reference values for the two-mode example (four decimals).
pub mod reference {
    use super::{rows4, RMat};

    pub const DRIFT_EIGENVALUES: [(f64, f64); 4] =
        [(-0.5532, 2.5929), (-0.5532, -2.5929), (-1.3302, 0.0), (-4.2068, 0.0)];
    pub const MEAN_RATE: f64 = 74.9147;
    pub const VARIANCE_RATE: f64 = 8.9399e3;
    pub const THETA0: f64 = 0.0168;
    pub const MU: f64 = 0.5532;
    pub const ALPHA: f64 = 69.6784;

    pub fn gramian() -> RMat {
        rows4([
            [3.7981, -2.5143, -3.8716, -1.6214],
            [-2.5143, 4.9443, 0.5356, 0.4305],
            [-3.8716, 0.5356, 6.7086, 2.8509],
            [-1.6214, 0.4305, 2.8509, 1.4473],
        ])
    }

    pub fn t_matrix() -> RMat {
        rows4([
            [131.5431, -108.9564, -138.4442, -58.4033],
            [-108.9564, 138.7545, 60.4808, 21.2105],
            [-138.4442, 60.4808, 204.6153, 91.4998],
            [-58.4033, 21.2105, 91.4998, 41.2158],
        ])
    }

    pub fn gamma() -> RMat {
        rows4([
            [1.4750, -0.4852, -1.4090, -0.2636],
            [-0.4852, 0.6271, 0.2354, 0.1475],
            [-1.4090, 0.2354, 1.6303, 0.3569],
            [-0.2636, 0.1475, 0.3569, 0.2676],
        ])
    }
}

/// Two-mode, four-channel example with `Θ = ½𝐉⊗I₂`.
pub fn paper_example() -> OqhoModel {
    let ccr = CcrMatrix::canonical(4).expect("canonical CCR");
    let params = PhysicalParams::new(example_energy(), example_coupling()).expect("valid params");
    build_model(ccr, params).expect("example model builds")
}

/// One mode, two channels: `Θ = ½J₂`, `R = 0`, `M = I₂`, so `A = -I`, `B = J₂`.
pub fn tiny() -> OqhoModel {
    let ccr = CcrMatrix::canonical(2).expect("canonical CCR");
    let params = PhysicalParams::new(RMat::zeros(2, 2), RMat::identity(2, 2)).expect("valid params");
    build_model(ccr, params).expect("tiny model builds")
}

/// Looks up a named fixture with its default weight matrix.
pub fn by_name(name: &str) -> Option<(OqhoModel, RMat)> {
    match name {
        PAPER_EXAMPLE => Some((paper_example(), example_weight())),
        TINY => Some((tiny(), RMat::identity(2, 2))),
        _ => None,
    }
}
