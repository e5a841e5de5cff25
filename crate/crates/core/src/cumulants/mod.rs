//! Higher-order cumulants of the quadratic functional.

mod descent;
mod moments;
mod rates;
mod timedomain;
mod wick;

pub use descent::{delta_table, factorial, DescentTable, MAX_DELTA_ORDER};
pub use moments::cumulants_from_moments;
pub use rates::{cumulant_rate, frequency_scale, RateIntegrand, MAX_RATE_ORDER};
pub use timedomain::{cumulant_finite_td, cumulant_td_discrete, MAX_TD_ORDER, MIN_TD_GRID};
pub use wick::{
    regular_pairings, wick_cumulants, wick_moment_oracle, WeightedKernel, MAX_ORACLE_GRID,
    MAX_ORACLE_ORDER,
};
