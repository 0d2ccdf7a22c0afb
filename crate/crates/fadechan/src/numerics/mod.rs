//! Numerical foundations: special functions, deterministic counter-based
//! random streams, low-discrepancy sampling, and quadrature.

pub mod marcum;
pub mod qmc;
pub mod quad;
pub mod rng;
pub mod sample;
pub mod sobol;
pub mod special;

pub use marcum::marcum_q;
pub use qmc::{gauss_weighted_qmc, qmc_multi, MultiEstimate, QmcResult, DEFAULT_REPLICATES};
pub use quad::{adaptive_quad, gl32_unit, QuadResult, DEFAULT_QUAD_BUDGET};
pub use rng::RngStream;
pub use sample::{
    cholesky_psd, sample_gaussian_vec, sample_normal, sample_rayleigh, sample_rice,
    sample_wrapped_angle, AngleMode,
};
pub use special::{
    bessel_i0, bessel_i0e, bessel_i1, bessel_i1e, erfc, lambert_w0, lambert_w_exp, ln_gamma,
    norm_cdf, norm_inv_cdf,
};
