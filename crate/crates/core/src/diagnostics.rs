//! Information criteria, Moran's I on lattices, whitened residuals and
//! plain-text fit reports.

use std::fmt::Write as _;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cepstral::AcfMethod;
use crate::error::{CepstralError, Result};
use crate::estimation::FitResult;
use crate::lattice::LatticeSample;
use crate::objectives::model_covariance;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfoCriteria {
    pub k: usize,
    pub n: usize,
    pub neg_log_lik: f64,
    pub aic: f64,
    pub bic: f64,
    pub hq: f64,
}

impl InfoCriteria {
    pub fn new(k: usize, n: usize, neg_log_lik: f64) -> Self {
        let (kf, nf) = (k as f64, n as f64);
        Self {
            k,
            n,
            neg_log_lik,
            aic: 2.0 * kf + 2.0 * neg_log_lik,
            bic: kf * nf.ln() + 2.0 * neg_log_lik,
            hq: 2.0 * kf * nf.ln().ln() + 2.0 * neg_log_lik,
        }
    }

    /// `k` counts free cepstral coefficients and regression coefficients.
    pub fn from_fit(fit: &FitResult) -> Self {
        Self::new(fit.n_params(), fit.n_obs, fit.neg_log_lik)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub i_stat: f64,
    pub expected: f64,
    pub variance: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Rook neighbour pairs `(i, j)`, each unordered pair once.
fn rook_edges(n_rows: usize, n_cols: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for r in 0..n_rows {
        for c in 0..n_cols {
            let i = r * n_cols + c;
            if c + 1 < n_cols {
                e.push((i, i + 1));
            }
            if r + 1 < n_rows {
                e.push((i, i + n_cols));
            }
        }
    }
    e
}

fn moran_stat(z: &[f64], edges: &[(usize, usize)], s0: f64) -> f64 {
    let n = z.len() as f64;
    let cross: f64 = edges.iter().map(|&(i, j)| 2.0 * z[i] * z[j]).sum();
    let zz: f64 = z.iter().map(|v| v * v).sum();
    n / s0 * cross / zz
}

fn centered(values: &[f64]) -> Result<Vec<f64>> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if z.iter().all(|v| v.abs() <= 1e-14 * scale) {
        return Err(CepstralError::ConstantInput);
    }
    Ok(z)
}

/// Moran's I with binary rook adjacency on an `n_rows x n_cols` lattice
/// (values row-major), with the variance under the normality null and a
/// two-sided normal p-value.
pub fn morans_i(values: &[f64], n_rows: usize, n_cols: usize) -> Result<MoranResult> {
    let n = n_rows * n_cols;
    if values.len() != n {
        return Err(CepstralError::Dimension { expected: n, got: values.len() });
    }
    if n < 3 {
        return Err(CepstralError::InvalidArgument("Moran's I needs at least 3 cells".into()));
    }
    let z = centered(values)?;
    let edges = rook_edges(n_rows, n_cols);
    if edges.is_empty() {
        return Err(CepstralError::InvalidArgument("lattice has no neighbour pairs".into()));
    }
    let s0 = 2.0 * edges.len() as f64;
    let i_stat = moran_stat(&z, &edges, s0);

    let mut degree = vec![0.0_f64; n];
    for &(i, j) in &edges {
        degree[i] += 1.0;
        degree[j] += 1.0;
    }
    let s1 = 2.0 * s0;
    let s2: f64 = degree.iter().map(|d| 4.0 * d * d).sum();
    let nf = n as f64;
    let expected = -1.0 / (nf - 1.0);
    let variance = (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0) / ((nf * nf - 1.0) * s0 * s0) - expected * expected;
    let z_score = (i_stat - expected) / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * normal.sf(z_score.abs())).min(1.0);
    Ok(MoranResult { i_stat, expected, variance, z: z_score, p_value })
}

/// Two-sided permutation p-value for Moran's I: the share of `n_perm`
/// random relabellings (plus the observed one) at least as far from the
/// null expectation as the observed statistic.
pub fn morans_i_permutation(values: &[f64], n_rows: usize, n_cols: usize, n_perm: usize, seed: u64) -> Result<f64> {
    let obs = morans_i(values, n_rows, n_cols)?;
    let mut z = centered(values)?;
    let edges = rook_edges(n_rows, n_cols);
    let s0 = 2.0 * edges.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dev = (obs.i_stat - obs.expected).abs();
    let mut extreme = 1usize;
    for _ in 0..n_perm {
        z.shuffle(&mut rng);
        if (moran_stat(&z, &edges, s0) - obs.expected).abs() >= dev - 1e-15 {
            extreme += 1;
        }
    }
    Ok(extreme as f64 / (n_perm + 1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub n_rows: usize,
    pub n_cols: usize,
    /// `L^{-1}(Y - X̃β̂)`, row-major.
    pub whitened: Vec<f64>,
    pub moran: MoranResult,
}

/// Whitened residuals of a fit under `Σ(F_θ̂)` and their Moran's I.
pub fn residuals(fit: &FitResult, sample: &LatticeSample, acf: AcfMethod) -> Result<Residuals> {
    let grid = fit.grid()?;
    let cov = model_covariance(&grid, sample.n_rows(), sample.n_cols(), acf)?;
    let w = cov.whiten(&sample.residual(&fit.beta())?)?;
    let moran = morans_i(w.as_slice(), sample.n_rows(), sample.n_cols())?;
    Ok(Residuals { n_rows: sample.n_rows(), n_cols: sample.n_cols(), whitened: w.as_slice().to_vec(), moran })
}

/// Re-correlates whitened residuals: `L z + X̃β̂`.
pub fn recorrelate(fit: &FitResult, sample: &LatticeSample, z: &[f64], acf: AcfMethod) -> Result<DVector<f64>> {
    let cov = model_covariance(&fit.grid()?, sample.n_rows(), sample.n_cols(), acf)?;
    let lz = DVector::from_vec(cov.cholesky()?.mul_lower(z)?);
    Ok(lz + sample.mean(&fit.beta())?)
}

/// Estimates and standard errors, one row per parameter.
pub fn estimates_table(fit: &FitResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>10} {:>10}", "parameter", "estimate", "se");
    let se: Vec<Option<f64>> = match (&fit.se_theta, &fit.se_beta) {
        (Some(a), Some(b)) => a.iter().chain(b).map(|v| Some(*v)).collect(),
        _ => vec![None; fit.n_params()],
    };
    let values = fit.theta_hat.values.iter().chain(&fit.beta_hat);
    for ((label, v), e) in fit.labels().iter().zip(values).zip(se) {
        match e {
            Some(e) => {
                let _ = writeln!(s, "{label:<16} {v:>10.3} {e:>10.3}");
            }
            None => {
                let _ = writeln!(s, "{label:<16} {v:>10.3} {:>10}", "-");
            }
        }
    }
    s
}

/// Criteria for several fitted models side by side, one column per model.
pub fn criteria_table(columns: &[(String, InfoCriteria)]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<10}", "");
    for (name, _) in columns {
        let _ = write!(s, " {name:>12}");
    }
    s.push('\n');
    let rows: [(&str, fn(&InfoCriteria) -> f64); 4] = [
        ("-logL", |c| c.neg_log_lik),
        ("AIC", |c| c.aic),
        ("BIC", |c| c.bic),
        ("HQ", |c| c.hq),
    ];
    for (label, get) in rows {
        let _ = write!(s, "{label:<10}");
        for (_, c) in columns {
            let _ = write!(s, " {:>12.3}", get(c));
        }
        s.push('\n');
    }
    let _ = write!(s, "{:<10}", "k");
    for (_, c) in columns {
        let _ = write!(s, " {:>12}", c.k);
    }
    s.push('\n');
    s
}

/// Full text report for one fit.
pub fn fit_report(fit: &FitResult, criteria: &InfoCriteria, moran: Option<&MoranResult>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method      {}", fit.method.label());
    let _ = writeln!(s, "order       {}", fit.order);
    let _ = writeln!(s, "n           {}", fit.n_obs);
    let _ = writeln!(s, "converged   {}", fit.converged);
    let _ = writeln!(s, "objective   {:.6}", fit.objective);
    let _ = writeln!(s, "-logL       {:.3}", criteria.neg_log_lik);
    let _ = writeln!(s, "k           {}", criteria.k);
    let _ = writeln!(s, "AIC         {:.3}", criteria.aic);
    let _ = writeln!(s, "BIC         {:.3}", criteria.bic);
    let _ = writeln!(s, "HQ          {:.3}", criteria.hq);
    if let Some(m) = moran {
        let _ = writeln!(s, "moran_I     {:.4}", m.i_stat);
        let _ = writeln!(s, "moran_p     {:.4e}", m.p_value);
    }
    s.push('\n');
    s.push_str(&estimates_table(fit));
    s
}
