//! Replicated simulate-and-fit studies.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit, FitOptions, FitResult, Method};
use crate::cepstral::{CepstralGrid, CoefficientMask};
use crate::covariance::BlockToeplitzCov;
use crate::error::Result;
use crate::lattice::{DesignSpec, LatticeSample};
use crate::objectives::lattice_lag;

#[derive(Clone, Debug)]
pub struct StudySpec {
    pub truth: CepstralGrid,
    pub beta: Vec<f64>,
    pub design: DesignSpec,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Model order and mask used for fitting.
    pub order: usize,
    pub mask: CoefficientMask,
    pub method: Method,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub label: String,
    pub truth: f64,
    pub mean: f64,
    pub sd: f64,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub params: Vec<ParamSummary>,
    pub replicates: usize,
    pub failures: Vec<(u64, String)>,
    pub estimates: Vec<(u64, Vec<f64>)>,
}

/// Draws one lattice from the model `N(X̃β, Σ(F_θ))`.
pub fn simulate_sample(
    truth: &CepstralGrid,
    beta: &[f64],
    design: DesignSpec,
    n_rows: usize,
    n_cols: usize,
    seed: u64,
    acf: crate::cepstral::AcfMethod,
) -> Result<LatticeSample> {
    let table = acf.compute(truth, lattice_lag(n_rows, n_cols))?;
    let cov = BlockToeplitzCov::factored(&table, n_rows, n_cols)?;
    simulate_from(&cov, beta, design, seed)
}

pub fn simulate_from(cov: &BlockToeplitzCov, beta: &[f64], design: DesignSpec, seed: u64) -> Result<LatticeSample> {
    let (nr, nc) = (cov.n_rows(), cov.n_cols());
    let x = design.matrix(nr, nc);
    if beta.len() != x.ncols() {
        return Err(crate::error::CepstralError::Dimension { expected: x.ncols(), got: beta.len() });
    }
    let mean = if beta.is_empty() { DVector::zeros(nr * nc) } else { &x * DVector::from_column_slice(beta) };
    let y = cov.simulate(&mean, seed)?;
    LatticeSample::with_design(nr, nc, y.as_slice().to_vec(), design)
}

/// Per-parameter mean, standard deviation and mean squared error. The
/// variance uses the replicate count as divisor so `mse = bias² + sd²`.
pub fn summarize(labels: &[String], truth: &[f64], estimates: &[Vec<f64>]) -> Vec<ParamSummary> {
    let r = estimates.len() as f64;
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let mean = estimates.iter().map(|e| e[i]).sum::<f64>() / r;
            let var = estimates.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / r;
            let mse = estimates.iter().map(|e| (e[i] - truth[i]).powi(2)).sum::<f64>() / r;
            ParamSummary { label: label.clone(), truth: truth[i], mean, sd: var.sqrt(), mse }
        })
        .collect()
}

/// Simulates one lattice per seed and fits it, in parallel across seeds.
/// Failed replicates are recorded and left out of the summary.
pub fn run_study(spec: &StudySpec, opts: &FitOptions) -> Result<StudySummary> {
    let table = opts.acf.compute(&spec.truth, lattice_lag(spec.n_rows, spec.n_cols))?;
    let cov = BlockToeplitzCov::factored(&table, spec.n_rows, spec.n_cols)?;
    let truth_wide = spec.truth.widened(spec.order.max(spec.truth.order()));
    let positions = spec.mask.free_positions();
    let mut truth: Vec<f64> = positions.iter().map(|&(j, k)| truth_wide.get(j, k)).collect();
    truth.extend_from_slice(&spec.beta);

    let outcomes: Vec<(u64, Result<FitResult>)> = spec
        .seeds
        .par_iter()
        .map(|&seed| {
            let res = simulate_from(&cov, &spec.beta, spec.design, seed)
                .and_then(|s| fit(&s, spec.order, &spec.mask, spec.method, opts));
            (seed, res)
        })
        .collect();

    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    let mut labels = None;
    for (seed, res) in outcomes {
        match res {
            Ok(f) => {
                labels.get_or_insert_with(|| f.labels());
                let mut v = f.theta_hat.values.clone();
                v.extend_from_slice(&f.beta_hat);
                estimates.push((seed, v));
            }
            Err(e) => failures.push((seed, e.to_string())),
        }
    }
    let labels = labels.unwrap_or_default();
    let rows: Vec<Vec<f64>> = estimates.iter().map(|(_, v)| v.clone()).collect();
    let params = if rows.is_empty() { vec![] } else { summarize(&labels, &truth, &rows) };
    Ok(StudySummary { params, replicates: rows.len(), failures, estimates })
}
