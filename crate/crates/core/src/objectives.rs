//! Fit criteria: exact Gaussian log-likelihood, the lag-domain ("exact")
//! Whittle criterion, its frequency-mesh approximation, the KL discrepancy
//! between two cepstral spectra, and the generalised least squares updates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cepstral::{log_spectrum, AcfMethod, AcfTable, CepstralGrid, FreeParamVector, FrequencyGrid};
use crate::covariance::{BlockToeplitzCov, Cholesky};
use crate::error::{CepstralError, Result};
use crate::grid::CenteredGrid;
use crate::lattice::{LatticeSample, SampleAcf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    GaussianLoglik,
    WhittleExact,
    WhittleApprox,
}

/// A criterion value together with the parameters it was evaluated at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub value: f64,
    pub kind: ObjectiveKind,
    pub theta: FreeParamVector,
    pub beta: Vec<f64>,
}

/// Weighting used in the regression step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlsMode {
    /// Weights `Σ(F_θ)^{-1}`.
    Mle,
    /// Weights `Σ(F_{-θ})`, the covariance of the reciprocal spectrum.
    Qmle,
}

/// Largest lag needed to fill the covariance of an `n_rows x n_cols` lattice.
pub fn lattice_lag(n_rows: usize, n_cols: usize) -> usize {
    n_rows.max(n_cols).saturating_sub(1)
}

/// Factored `Σ(F_θ)` for the lattice.
pub fn model_covariance(grid: &CepstralGrid, n_rows: usize, n_cols: usize, method: AcfMethod) -> Result<BlockToeplitzCov> {
    let acf = method.compute(grid, lattice_lag(n_rows, n_cols))?;
    BlockToeplitzCov::factored(&acf, n_rows, n_cols)
}

/// `-½ log det Σ - ½ w'Σ^{-1}w` for a factored covariance.
pub fn loglik_from_cholesky(chol: &Cholesky, resid: &[f64]) -> Result<f64> {
    Ok(-0.5 * chol.logdet() - 0.5 * chol.quad_form(resid)?)
}

/// Gaussian log-likelihood of `Y ~ N(X̃β, Σ(F_θ))` without the `2π` constant.
pub fn gaussian_loglik(sample: &LatticeSample, grid: &CepstralGrid, beta: &DVector<f64>) -> Result<f64> {
    gaussian_loglik_with(sample, grid, beta, AcfMethod::default())
}

pub fn gaussian_loglik_with(
    sample: &LatticeSample,
    grid: &CepstralGrid,
    beta: &DVector<f64>,
    method: AcfMethod,
) -> Result<f64> {
    let resid = sample.residual(beta)?;
    let cov = model_covariance(grid, sample.n_rows(), sample.n_cols(), method)?;
    loglik_from_cholesky(cov.cholesky()?, resid.as_slice())
}

/// `Θ_{0,0} + Σ_{|h|<N1, |k|<N2} γ̂_{h,k} γ_{h,k}(F_{-θ})`.
pub fn whittle_exact(acf: &SampleAcf, grid: &CepstralGrid) -> Result<f64> {
    whittle_exact_with(acf, grid, true, AcfMethod::default())
}

/// [`whittle_exact`] with a choice of sample acf (`unbiased = false` uses the
/// biased `γ(I)`) and of model acf algorithm.
pub fn whittle_exact_with(acf: &SampleAcf, grid: &CepstralGrid, unbiased: bool, method: AcfMethod) -> Result<f64> {
    let inv = method.compute(&grid.negate(), lattice_lag(acf.n_rows, acf.n_cols))?;
    Ok(grid.log_variance() + lag_product(acf.table(unbiased), &inv))
}

/// `Σ a_{h,k} b_{h,k}` over the lag window of `a`.
pub fn lag_product(a: &AcfTable, b: &AcfTable) -> f64 {
    a.grid()
        .iter()
        .map(|(h, k, v)| if b.grid().contains(h, k) { v * b.get(h, k) } else { 0.0 })
        .sum()
}

/// Mean over the `(2M+1)^2` mesh of `log F_θ + Î/F_θ`, with `Î` the Fourier
/// transform of the unbiased sample acf. Normalised by the point count, so
/// it tends to the exact criterion as the mesh is refined.
pub fn whittle_approx(acf: &SampleAcf, grid: &CepstralGrid, m: usize) -> Result<f64> {
    let pgram = crate::lattice::periodogram_ft(acf, m)?;
    whittle_approx_from(&pgram, grid)
}

/// [`whittle_approx`] with a precomputed periodogram transform.
pub fn whittle_approx_from(pgram: &FrequencyGrid, grid: &CepstralGrid) -> Result<f64> {
    let logf = log_spectrum(grid, pgram.order())?;
    let vals = logf.as_slice().iter().zip(pgram.values().as_slice()).map(|(&lf, &i)| lf + i * (-lf).exp());
    Ok(vals.sum::<f64>() / logf.as_slice().len() as f64)
}

/// `<log F_A + F_B / F_A>` by the trapezoid rule on the mesh of order `m`.
pub fn kl_divergence(a: &CepstralGrid, b: &CepstralGrid, m: usize) -> Result<f64> {
    let la = log_spectrum(a, m)?;
    let lb = log_spectrum(b, m)?;
    let vals = CenteredGrid::from_fn(m, m, |u, v| {
        let x = la.get(u, v);
        x + (lb.get(u, v) - x).exp()
    });
    Ok(FrequencyGrid::new(vals)?.integral())
}

fn solve_normal(xtx: DMatrix<f64>, xty: DVector<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::factor(&xtx).map_err(|_| CepstralError::SingularDesign)?;
    Ok(DVector::from_vec(chol.solve(xty.as_slice())?))
}

/// Regression coefficients for fixed `θ`: GLS under `Σ(F_θ)` for
/// [`GlsMode::Mle`], or `(X̃'Σ(F_{-θ})X̃)^{-1} X̃'Σ(F_{-θ})Y` for
/// [`GlsMode::Qmle`].
pub fn gls_beta(sample: &LatticeSample, grid: &CepstralGrid, mode: GlsMode) -> Result<DVector<f64>> {
    gls_beta_with(sample, grid, mode, AcfMethod::default())
}

pub fn gls_beta_with(sample: &LatticeSample, grid: &CepstralGrid, mode: GlsMode, method: AcfMethod) -> Result<DVector<f64>> {
    if sample.n_regressors() == 0 {
        return Ok(DVector::zeros(0));
    }
    let (nr, nc) = (sample.n_rows(), sample.n_cols());
    match mode {
        GlsMode::Mle => {
            let cov = model_covariance(grid, nr, nc, method)?;
            gls_from_cholesky(sample, cov.cholesky()?)
        }
        GlsMode::Qmle => {
            let acf = method.compute(&grid.negate(), lattice_lag(nr, nc))?;
            let w = BlockToeplitzCov::assemble(&acf, nr, nc)?;
            qmle_from_weight(sample, w.sigma())
        }
    }
}

/// GLS coefficients given the Cholesky factor of the covariance.
pub fn gls_from_cholesky(sample: &LatticeSample, chol: &Cholesky) -> Result<DVector<f64>> {
    let zx = chol.solve_lower_matrix(sample.design())?;
    let zy = DVector::from_vec(chol.solve_lower(sample.y().as_slice())?);
    solve_normal(zx.tr_mul(&zx), zx.tr_mul(&zy))
}

/// Weighted least squares `(X'WX)^{-1} X'WY`.
pub fn qmle_from_weight(sample: &LatticeSample, w: &DMatrix<f64>) -> Result<DVector<f64>> {
    let wx = w * sample.design();
    solve_normal(sample.design().tr_mul(&wx), wx.tr_mul(sample.y()))
}
