//! Random-walk Metropolis sampling of the posterior of `(θ, β)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::fit::{fit_from, neg_log_lik, FitOptions, FitResult, Method};
use crate::cepstral::{CepstralGrid, CoefficientMask, FreeParamVector};
use crate::covariance::Cholesky;
use crate::error::{CepstralError, Result};
use crate::lattice::LatticeSample;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    /// Multiplies the default random-walk scale `2.38 / sqrt(d)`.
    pub proposal_scale: f64,
    /// Standard deviation of the independent zero-mean normal priors.
    pub prior_sd: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { n_iter: 5000, burn_in: 1000, proposal_scale: 1.0, prior_sd: 10.0, seed: 0 }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(CepstralError::InvalidArgument("burn_in must be below n_iter".into()));
        }
        if !(self.proposal_scale > 0.0) || !(self.prior_sd > 0.0) {
            return Err(CepstralError::InvalidArgument("proposal_scale and prior_sd must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcOutput {
    pub labels: Vec<String>,
    /// Post-burn-in draws, θ then β.
    pub draws: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub posterior_mean: Vec<f64>,
    pub posterior_sd: Vec<f64>,
}

fn mean_sd(draws: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = draws.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| draws.iter().map(|x| x[i]).sum::<f64>() / n).collect();
    let sd = (0..d)
        .map(|i| (draws.iter().map(|x| (x[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt())
        .collect();
    (mean, sd)
}

/// Posterior means under independent `N(0, prior_sd²)` priors.
///
/// The chain starts at the maximum likelihood estimate and proposes
/// `x + s L ε` with `L L'` the inverse observed Hessian there and
/// `s = proposal_scale · 2.38 / sqrt(d)`.
pub fn mcmc_fit(
    sample: &LatticeSample,
    order: usize,
    mask: &CoefficientMask,
    config: &McmcConfig,
    opts: &FitOptions,
) -> Result<(FitResult, McmcOutput)> {
    config.validate()?;
    let mle_opts = FitOptions { standard_errors: true, ..*opts };
    let mle = fit_from(sample, order, mask, Method::Mle, &mle_opts, None)?;
    let hess = mle.hessian.as_ref().ok_or(CepstralError::IndefiniteHessian)?;
    let d = mle.n_params();
    let k = mle.theta_hat.len();
    let h = DMatrix::from_fn(d, d, |i, j| hess[i][j]);
    let cov = h.try_inverse().ok_or(CepstralError::IndefiniteHessian)?;
    let chol = Cholesky::factor(&cov).map_err(|_| CepstralError::IndefiniteHessian)?;
    let scale = config.proposal_scale * 2.38 / (d as f64).sqrt();

    let log_post = |x: &[f64]| -> f64 {
        let prior: f64 = x.iter().map(|v| v * v).sum::<f64>() / (2.0 * config.prior_sd * config.prior_sd);
        let ll = CepstralGrid::from_free_slice(order, mask, &x[..k])
            .and_then(|g| neg_log_lik(sample, &g, &DVector::from_column_slice(&x[k..]), opts.acf));
        match ll {
            Ok(v) if v.is_finite() => -v - prior,
            _ => f64::NEG_INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x: Vec<f64> = mle.theta_hat.values.iter().chain(&mle.beta_hat).copied().collect();
    let mut lp = log_post(&x);
    let mut accepted = 0usize;
    let mut draws = Vec::with_capacity(config.n_iter - config.burn_in);
    for it in 0..config.n_iter {
        let eps: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let step = chol.mul_lower(&eps)?;
        let prop: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + scale * b).collect();
        let lq = log_post(&prop);
        let u: f64 = rng.random();
        if lq.is_finite() && u.ln() < lq - lp {
            x = prop;
            lp = lq;
            accepted += 1;
        }
        if it >= config.burn_in {
            draws.push(x.clone());
        }
    }
    let acceptance_rate = accepted as f64 / config.n_iter as f64;
    if !(0.05..=0.6).contains(&acceptance_rate) {
        log::warn!("acceptance rate {acceptance_rate:.3} outside [0.05, 0.6]; adjust proposal_scale");
    }
    let (mean, sd) = mean_sd(&draws, d);
    let grid = CepstralGrid::from_free_slice(order, mask, &mean[..k])?;
    let beta = DVector::from_column_slice(&mean[k..]);
    let nll = neg_log_lik(sample, &grid, &beta, opts.acf)?;
    let labels = mle.labels();
    let result = FitResult {
        theta_hat: FreeParamVector::new(mean[..k].to_vec()),
        beta_hat: mean[k..].to_vec(),
        objective: nll,
        neg_log_lik: nll,
        method: Method::Bayes,
        se_theta: Some(sd[..k].to_vec()),
        se_beta: Some(sd[k..].to_vec()),
        ..mle
    };
    Ok((result, McmcOutput { labels, draws, acceptance_rate, posterior_mean: mean, posterior_sd: sd }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DesignSpec;

    #[test]
    fn config_validation() {
        assert!(McmcConfig { burn_in: 10, n_iter: 10, ..Default::default() }.validate().is_err());
        assert!(McmcConfig { proposal_scale: 0.0, ..Default::default() }.validate().is_err());
        assert!(McmcConfig::default().validate().is_ok());
    }

    #[test]
    fn seeded_chain_is_reproducible() {
        let y: Vec<f64> = (0..36).map(|i| ((i * 17 % 7) as f64 - 3.0) * 0.5).collect();
        let s = LatticeSample::with_design(6, 6, y, DesignSpec::Constant).unwrap();
        let cfg = McmcConfig { n_iter: 200, burn_in: 50, seed: 3, ..Default::default() };
        let opts = FitOptions::default();
        let a = mcmc_fit(&s, 0, &CoefficientMask::none(0), &cfg, &opts).unwrap().1;
        let b = mcmc_fit(&s, 0, &CoefficientMask::none(0), &cfg, &opts).unwrap().1;
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.draws.len(), 150);
        assert!(a.acceptance_rate > 0.0);
    }
}
