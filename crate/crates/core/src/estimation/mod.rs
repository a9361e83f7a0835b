//! Estimation: likelihood and Whittle fits, standard errors, posterior
//! sampling, likelihood ratio tests and simulation studies.

mod fit;
mod lr;
mod mcmc;
pub mod optim;
mod study;

pub use fit::{
    backward_delete, fit, fit_from, gls_with_covariance, inverse_diag_sqrt, neg_log_lik, standard_errors, FitOptions,
    FitResult, IterationRecord, Method, StandardErrors,
};
pub use lr::{lr_test, LrTest};
pub use mcmc::{mcmc_fit, McmcConfig, McmcOutput};
pub use optim::{BfgsOptions, BfgsResult};
pub use study::{run_study, simulate_from, simulate_sample, summarize, ParamSummary, StudySpec, StudySummary};
