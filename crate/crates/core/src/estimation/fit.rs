//! Alternating θ/β estimation for cepstral lattice models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::optim::{minimize, numerical_hessian, BfgsOptions};
use crate::cepstral::{AcfMethod, CepstralGrid, CoefficientMask, FreeParamVector, FrequencyGrid};
use crate::covariance::Cholesky;
use crate::error::{CepstralError, Result};
use crate::lattice::{periodogram_ft, sample_acf, LatticeSample, SampleAcf};
use crate::objectives::{
    gls_beta_with, gls_from_cholesky, loglik_from_cholesky, model_covariance, whittle_approx_from,
    whittle_exact_with, GlsMode,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mle,
    QmleExact,
    QmleApprox,
    Bayes,
}

impl Method {
    pub fn gls_mode(self) -> GlsMode {
        match self {
            Method::Mle | Method::Bayes => GlsMode::Mle,
            Method::QmleExact | Method::QmleApprox => GlsMode::Qmle,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::QmleExact => "qmle_exact",
            Method::QmleApprox => "qmle_approx",
            Method::Bayes => "bayes",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = CepstralError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mle" => Ok(Method::Mle),
            "qmle" | "qmle_exact" | "whittle" => Ok(Method::QmleExact),
            "qmle_approx" | "whittle_approx" => Ok(Method::QmleApprox),
            "bayes" | "mcmc" => Ok(Method::Bayes),
            other => Err(CepstralError::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub acf: AcfMethod,
    /// Mesh order of the approximate Whittle criterion.
    pub mesh_order: usize,
    /// Use the divisor-corrected sample acf in the Whittle criterion.
    pub unbiased: bool,
    pub bfgs: BfgsOptions,
    /// Outer loop stops when the joint parameter change or the objective
    /// change drops below this.
    pub outer_tol: f64,
    pub max_outer: usize,
    pub standard_errors: bool,
    /// Relative step of the numerical Hessian.
    pub hessian_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            acf: AcfMethod::default(),
            mesh_order: 200,
            unbiased: true,
            bfgs: BfgsOptions::default(),
            outer_tol: 1e-7,
            max_outer: 20,
            standard_errors: true,
            hessian_step: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer: usize,
    pub inner_iterations: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub order: usize,
    pub mask: CoefficientMask,
    /// Positions of the free coefficients, in the order of `theta_hat`.
    pub positions: Vec<(isize, isize)>,
    pub theta_hat: FreeParamVector,
    pub beta_hat: Vec<f64>,
    pub beta_names: Vec<String>,
    /// Final value of the minimised criterion.
    pub objective: f64,
    /// `-log L` (no `2π` constant) at the estimate.
    pub neg_log_lik: f64,
    pub method: Method,
    pub se_theta: Option<Vec<f64>>,
    pub se_beta: Option<Vec<f64>>,
    /// Observed Hessian of the minimised criterion, θ then β (on the
    /// log-likelihood scale for the Whittle methods).
    pub hessian: Option<Vec<Vec<f64>>>,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    pub grad_norm: f64,
    pub n_obs: usize,
}

impl FitResult {
    pub fn grid(&self) -> Result<CepstralGrid> {
        CepstralGrid::from_free(self.order, &self.mask, &self.theta_hat)
    }

    pub fn beta(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta_hat)
    }

    /// Free cepstral coefficients plus regression coefficients.
    pub fn n_params(&self) -> usize {
        self.theta_hat.len() + self.beta_hat.len()
    }

    pub fn theta_labels(&self) -> Vec<String> {
        self.positions.iter().map(|(j, k)| format!("theta({j},{k})")).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        let mut l = self.theta_labels();
        l.extend(self.beta_names.iter().cloned());
        l
    }
}

/// The θ-criterion at a fixed β, with the β-dependent pieces precomputed.
pub(crate) enum ThetaObjective {
    Mle { resid: DVector<f64> },
    Whittle { acf: SampleAcf },
    Approx { pgram: FrequencyGrid },
}

impl ThetaObjective {
    pub(crate) fn prepare(sample: &LatticeSample, beta: &DVector<f64>, method: Method, opts: &FitOptions) -> Result<Self> {
        Ok(match method {
            Method::Mle | Method::Bayes => ThetaObjective::Mle { resid: sample.residual(beta)? },
            Method::QmleExact => ThetaObjective::Whittle { acf: sample_acf(sample, beta)? },
            Method::QmleApprox => {
                ThetaObjective::Approx { pgram: periodogram_ft(&sample_acf(sample, beta)?, opts.mesh_order)? }
            }
        })
    }

    pub(crate) fn value(&self, sample: &LatticeSample, grid: &CepstralGrid, opts: &FitOptions) -> Result<f64> {
        match self {
            ThetaObjective::Mle { resid } => {
                let cov = model_covariance(grid, sample.n_rows(), sample.n_cols(), opts.acf)?;
                Ok(-loglik_from_cholesky(cov.cholesky()?, resid.as_slice())?)
            }
            ThetaObjective::Whittle { acf } => whittle_exact_with(acf, grid, opts.unbiased, opts.acf),
            ThetaObjective::Approx { pgram } => whittle_approx_from(pgram, grid),
        }
    }
}

/// `-log L(θ, β)`.
pub fn neg_log_lik(sample: &LatticeSample, grid: &CepstralGrid, beta: &DVector<f64>, acf: AcfMethod) -> Result<f64> {
    let cov = model_covariance(grid, sample.n_rows(), sample.n_cols(), acf)?;
    Ok(-loglik_from_cholesky(cov.cholesky()?, sample.residual(beta)?.as_slice())?)
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Fits a cepstral model of the given order and mask.
///
/// θ starts at zero (white noise) and β at ordinary least squares. Each outer
/// iteration minimises the criterion over θ at fixed β by BFGS, then updates β
/// in closed form; the inverse-Hessian approximation carries over between
/// outer iterations. [`Method::Bayes`] runs [`mcmc_fit`](super::mcmc_fit)
/// with default settings.
pub fn fit(sample: &LatticeSample, order: usize, mask: &CoefficientMask, method: Method, opts: &FitOptions) -> Result<FitResult> {
    if method == Method::Bayes {
        return Ok(super::mcmc_fit(sample, order, mask, &super::McmcConfig::default(), opts)?.0);
    }
    fit_from(sample, order, mask, method, opts, None)
}

/// [`fit`] from a given starting θ (free-parameter order).
pub fn fit_from(
    sample: &LatticeSample,
    order: usize,
    mask: &CoefficientMask,
    method: Method,
    opts: &FitOptions,
    theta0: Option<&[f64]>,
) -> Result<FitResult> {
    if mask.order() != order {
        return Err(CepstralError::InvalidArgument("mask order differs from model order".into()));
    }
    let positions = mask.free_positions();
    let mut theta = match theta0 {
        Some(t) if t.len() == positions.len() => t.to_vec(),
        Some(t) => return Err(CepstralError::Dimension { expected: positions.len(), got: t.len() }),
        None => vec![0.0; positions.len()],
    };
    let mut beta = sample.ols()?;
    let mut hinv = None;
    let mut records = Vec::new();
    let mut prev = f64::INFINITY;
    let mut outer_converged = false;
    let mut inner_converged = false;
    let mut grad_norm = f64::NAN;
    let mut objective = f64::NAN;

    for outer in 1..=opts.max_outer {
        let target = ThetaObjective::prepare(sample, &beta, method, opts)?;
        let res = minimize(
            |x: &[f64]| target.value(sample, &CepstralGrid::from_free_slice(order, mask, x)?, opts),
            &theta,
            hinv.take(),
            &opts.bfgs,
        )?;
        inner_converged = res.converged;
        grad_norm = res.grad_norm();
        let grid = CepstralGrid::from_free_slice(order, mask, &res.x)?;
        let new_beta = if sample.n_regressors() > 0 {
            gls_beta_with(sample, &grid, method.gls_mode(), opts.acf)?
        } else {
            beta.clone()
        };
        let change = max_change(&res.x, &theta).max(max_change(new_beta.as_slice(), beta.as_slice()));
        theta = res.x;
        hinv = Some(res.inv_hessian);
        objective = if sample.n_regressors() > 0 {
            ThetaObjective::prepare(sample, &new_beta, method, opts)?.value(sample, &grid, opts)?
        } else {
            res.f
        };
        beta = new_beta;
        records.push(IterationRecord { outer, inner_iterations: res.iterations, objective, grad_norm });
        if sample.n_regressors() == 0 || change < opts.outer_tol || (prev - objective).abs() < opts.outer_tol {
            outer_converged = true;
            break;
        }
        prev = objective;
    }

    let grid = CepstralGrid::from_free_slice(order, mask, &theta)?;
    let nll = if matches!(method, Method::Mle) { objective } else { neg_log_lik(sample, &grid, &beta, opts.acf)? };
    let mut result = FitResult {
        order,
        mask: mask.clone(),
        positions,
        theta_hat: FreeParamVector::new(theta),
        beta_hat: beta.as_slice().to_vec(),
        beta_names: sample.names().to_vec(),
        objective,
        neg_log_lik: nll,
        method,
        se_theta: None,
        se_beta: None,
        hessian: None,
        iterations: records,
        converged: outer_converged && inner_converged,
        grad_norm,
        n_obs: sample.len(),
    };
    if !result.converged {
        log::warn!("{} fit did not converge (gradient {grad_norm:.2e})", method.label());
    }
    if opts.standard_errors {
        match standard_errors(&result, sample, opts) {
            Ok(se) => {
                result.se_theta = Some(se.theta);
                result.se_beta = Some(se.beta);
                result.hessian = Some(rows(&se.hessian));
            }
            Err(e) => log::warn!("standard errors unavailable: {e}"),
        }
    }
    Ok(result)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StandardErrors {
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// Square roots of the diagonal of the inverse of a positive definite matrix.
pub fn inverse_diag_sqrt(h: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::factor(h).map_err(|_| CepstralError::IndefiniteHessian)?;
    let n = h.nrows();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        out.push(chol.solve(&e)?[i].sqrt());
    }
    Ok(out)
}

/// Standard errors from the observed Hessian.
///
/// For likelihood fits this is the Hessian of `-log L` over `(θ, β)`. For the
/// Whittle fits the θ block is `(n/2)` times the Hessian of the criterion,
/// which puts it on the log-likelihood scale, and β uses the generalised
/// least squares covariance `(X̃'Σ^{-1}X̃)^{-1}` at `θ̂`.
pub fn standard_errors(fit: &FitResult, sample: &LatticeSample, opts: &FitOptions) -> Result<StandardErrors> {
    let k = fit.theta_hat.len();
    let l = fit.beta_hat.len();
    let (order, mask) = (fit.order, &fit.mask);
    match fit.method {
        Method::Mle | Method::Bayes => {
            let mut x = fit.theta_hat.values.clone();
            x.extend_from_slice(&fit.beta_hat);
            let mut f = |v: &[f64]| {
                let grid = CepstralGrid::from_free_slice(order, mask, &v[..k])?;
                neg_log_lik(sample, &grid, &DVector::from_column_slice(&v[k..]), opts.acf)
            };
            let h = numerical_hessian(&mut f, &x, opts.hessian_step)?;
            let se = inverse_diag_sqrt(&h)?;
            Ok(StandardErrors { theta: se[..k].to_vec(), beta: se[k..].to_vec(), hessian: h })
        }
        Method::QmleExact | Method::QmleApprox => {
            let target = ThetaObjective::prepare(sample, &fit.beta(), fit.method, opts)?;
            let mut f = |v: &[f64]| target.value(sample, &CepstralGrid::from_free_slice(order, mask, v)?, opts);
            let h = numerical_hessian(&mut f, &fit.theta_hat.values, opts.hessian_step)? * (sample.len() as f64 / 2.0);
            let se_theta = inverse_diag_sqrt(&h)?;
            let grid = fit.grid()?;
            let cov = model_covariance(&grid, sample.n_rows(), sample.n_cols(), opts.acf)?;
            let zx = cov.cholesky()?.solve_lower_matrix(sample.design())?;
            let info = zx.tr_mul(&zx);
            let se_beta = if l > 0 { inverse_diag_sqrt(&info).map_err(|_| CepstralError::SingularDesign)? } else { vec![] };
            let mut full = DMatrix::zeros(k + l, k + l);
            full.view_mut((0, 0), (k, k)).copy_from(&h);
            full.view_mut((k, k), (l, l)).copy_from(&info);
            Ok(StandardErrors { theta: se_theta, beta: se_beta, hessian: full })
        }
    }
}

/// GLS coefficients at `θ` together with their covariance `(X̃'Σ^{-1}X̃)^{-1}`.
pub fn gls_with_covariance(sample: &LatticeSample, grid: &CepstralGrid, acf: AcfMethod) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let cov = model_covariance(grid, sample.n_rows(), sample.n_cols(), acf)?;
    let chol = cov.cholesky()?;
    let beta = gls_from_cholesky(sample, chol)?;
    let zx = chol.solve_lower_matrix(sample.design())?;
    let inv = zx.tr_mul(&zx).try_inverse().ok_or(CepstralError::SingularDesign)?;
    Ok((beta, inv))
}

/// Masks every non-origin coefficient with `|θ̂| < 2 se` and refits. Returns
/// the refit and the positions removed (empty when nothing was removed, in
/// which case the input fit is returned unchanged).
pub fn backward_delete(sample: &LatticeSample, fit: &FitResult, opts: &FitOptions) -> Result<(FitResult, Vec<(isize, isize)>)> {
    let se = fit
        .se_theta
        .as_ref()
        .ok_or_else(|| CepstralError::InvalidArgument("fit has no standard errors".into()))?;
    let mut mask = fit.mask.clone();
    let mut removed = Vec::new();
    for ((&(j, k), &t), &s) in fit.positions.iter().zip(&fit.theta_hat.values).zip(se) {
        if (j, k) != (0, 0) && t.abs() < 2.0 * s {
            mask.fix(j, k);
            removed.push((j, k));
        }
    }
    if removed.is_empty() {
        return Ok((fit.clone(), removed));
    }
    let start: Vec<f64> = fit
        .positions
        .iter()
        .zip(&fit.theta_hat.values)
        .filter(|(p, _)| !removed.contains(p))
        .map(|(_, &v)| v)
        .collect();
    let refit = fit_from(sample, fit.order, &mask, fit.method, opts, Some(&start))?;
    Ok((refit, removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::BlockToeplitzCov;
    use crate::lattice::DesignSpec;
    use crate::objectives::lattice_lag;

    fn simulate(grid: &CepstralGrid, nr: usize, nc: usize, mean: f64, seed: u64, spec: DesignSpec) -> LatticeSample {
        let acf = AcfMethod::default().compute(grid, lattice_lag(nr, nc)).unwrap();
        let cov = BlockToeplitzCov::factored(&acf, nr, nc).unwrap();
        let y = cov.simulate(&DVector::from_element(nr * nc, mean), seed).unwrap();
        LatticeSample::with_design(nr, nc, y.as_slice().to_vec(), spec).unwrap()
    }

    #[test]
    fn scalar_whittle_closed_form() {
        let s = simulate(&CepstralGrid::white(0, 0.3), 8, 9, 1.0, 2, DesignSpec::Constant);
        let opts = FitOptions { standard_errors: false, ..Default::default() };
        let fit = fit(&s, 0, &CoefficientMask::none(0), Method::QmleExact, &opts).unwrap();
        let acf = sample_acf(&s, &fit.beta()).unwrap();
        assert!((fit.theta_hat.values[0] - acf.unbiased.variance().ln()).abs() < 1e-6);
    }

    #[test]
    fn white_noise_mle_is_log_residual_variance() {
        let s = simulate(&CepstralGrid::white(0, -0.5), 6, 7, 3.0, 9, DesignSpec::Constant);
        let opts = FitOptions { standard_errors: false, ..Default::default() };
        let fit = fit(&s, 0, &CoefficientMask::none(0), Method::Mle, &opts).unwrap();
        let mean = s.y().mean();
        let var = s.y().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / s.len() as f64;
        assert!((fit.theta_hat.values[0] - var.ln()).abs() < 1e-6);
        assert!((fit.beta_hat[0] - mean).abs() < 1e-9);
        assert!(fit.converged);
    }

    #[test]
    fn mle_objective_never_increases() {
        let mut g = CepstralGrid::zeros(1);
        g.set(1, 0, 0.3).unwrap();
        g.set(0, 1, -0.2).unwrap();
        let s = simulate(&g, 8, 8, 2.0, 4, DesignSpec::ConstantRowCol);
        let opts = FitOptions { standard_errors: false, ..Default::default() };
        let fit = fit(&s, 1, &CoefficientMask::none(1), Method::Mle, &opts).unwrap();
        let start = {
            let b = s.ols().unwrap();
            neg_log_lik(&s, &CepstralGrid::zeros(1), &b, opts.acf).unwrap()
        };
        let mut prev = start;
        for r in &fit.iterations {
            assert!(r.objective <= prev + 1e-9, "{:?}", fit.iterations);
            prev = r.objective;
        }
        if fit.converged {
            assert!(fit.grad_norm < opts.bfgs.grad_tol);
        }
    }

    #[test]
    fn quadratic_toy_has_unit_standard_errors() {
        let a = [0.2, -1.0];
        let mut f = |x: &[f64]| -> Result<f64> { Ok(0.5 * x.iter().zip(&a).map(|(x, a)| (x - a).powi(2)).sum::<f64>()) };
        let h = numerical_hessian(&mut f, &a, 1e-4).unwrap();
        for se in inverse_diag_sqrt(&h).unwrap() {
            assert!((se - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn indefinite_hessian_is_reported() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(inverse_diag_sqrt(&h), Err(CepstralError::IndefiniteHessian)));
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("qmle_exact".parse::<Method>().unwrap(), Method::QmleExact);
        assert_eq!("MLE".parse::<Method>().unwrap(), Method::Mle);
        assert!("ols".parse::<Method>().is_err());
    }
}
