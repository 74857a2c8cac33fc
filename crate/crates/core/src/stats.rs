//! Proportion hypothesis tests and the normal distribution functions they
//! rest on.

mod normal;
mod proportion;

pub use normal::{erfc, normal_cdf, normal_sf};
pub use proportion::{
    exact_binomial, one_sample_proportion_z, one_sample_proportion_z_with, two_proportion_z,
    two_proportion_z_with, TestInputs, TestMethod, TestResult, ZTestOptions, EXACT_BINOMIAL_MAX_N,
};
