//! Likelihood-free Bayesian inference by optimisation-based importance
//! sampling, with accept-reject, MCMC and SMC approximate Bayesian computation
//! as reference methods.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod jacobian;
pub mod models;
pub mod numlin;
pub mod optimize;
pub mod posterior;
pub mod priors;
pub mod samplers;
pub mod streams;

pub use error::{Error, Result};
pub use jacobian::{fd_jacobian, jacobian_volume_inverse, JacobianSpec};
pub use models::{
    build_model, make_shockpack, simulate_observed, AuxStats, Dataset, Interval, Model, ShockPack,
};
pub use numlin::{determinant, ols_fit, volume, Matrix};
pub use optimize::{golden_section, multistart, nelder_mead, OptimOptions, OptimResult};
pub use posterior::{
    ess, histogram, mc_standard_error, reference_cdf, summarize, table1_oracle, weighted_ks,
    weighted_mean, weighted_quantile, weighted_variance, ReferencePosterior, Summary, Table1,
};
pub use priors::Prior;
pub use samplers::{
    abc_ar, abc_ar_tolerance, abc_mcmc, abc_smc, acceptance_counts, j_objective, rs_draw,
    rs_sample, smd_estimate, DeltaScale, McmcConfig, Method, PosteriorSample, Proposal, RsOptions,
    SmcConfig, SmdConfig, WeightedDraw,
};
