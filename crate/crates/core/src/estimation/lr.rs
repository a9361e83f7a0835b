//! Likelihood ratio tests between nested cepstral fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::fit::{FitResult, Method};
use crate::error::{CepstralError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// `2(log L_full - log L_nested)` against a chi-square with the difference in
/// free parameters as degrees of freedom.
pub fn lr_test(full: &FitResult, nested: &FitResult) -> Result<LrTest> {
    if full.method != Method::Mle || nested.method != Method::Mle {
        return Err(CepstralError::NotNested("both fits must be maximum likelihood".into()));
    }
    if full.n_obs != nested.n_obs {
        return Err(CepstralError::NotNested("fits use different data".into()));
    }
    if nested.order > full.order {
        return Err(CepstralError::NotNested("nested model has higher order".into()));
    }
    for (j, k) in nested.mask.free_positions() {
        if full.mask.is_fixed(j, k) {
            return Err(CepstralError::NotNested(format!("coefficient ({j}, {k}) is free only in the nested model")));
        }
    }
    if nested.beta_hat.len() > full.beta_hat.len() {
        return Err(CepstralError::NotNested("nested model has more regressors".into()));
    }
    let dof = full.n_params() - nested.n_params();
    let statistic = (2.0 * (nested.neg_log_lik - full.neg_log_lik)).max(0.0);
    let p_value = if dof == 0 {
        1.0
    } else {
        let chi = ChiSquared::new(dof as f64).map_err(|e| CepstralError::InvalidArgument(e.to_string()))?;
        chi.sf(statistic)
    };
    Ok(LrTest { statistic, dof, p_value })
}
