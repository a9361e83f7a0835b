//! Likelihood with missing cells, and extraction of a latent signal observed
//! with additive noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cepstral::{AcfMethod, CepstralGrid};
use crate::covariance::{BlockToeplitzCov, Cholesky};
use crate::error::{CepstralError, Result};
use crate::lattice::LatticeSample;
use crate::objectives::{lattice_lag, loglik_from_cholesky};

/// Lattices up to this size per side get a dense conditional covariance.
pub const DENSE_COVARIANCE_MAX_SIDE: usize = 32;

/// Which cells of the lattice are observed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionMap {
    n_rows: usize,
    n_cols: usize,
    observed: Vec<bool>,
    index: Vec<usize>,
}

impl SelectionMap {
    pub fn all(n_rows: usize, n_cols: usize) -> Self {
        Self::from_observed(n_rows, n_cols, vec![true; n_rows * n_cols]).expect("sizes agree")
    }

    /// `observed` is row-major.
    pub fn from_observed(n_rows: usize, n_cols: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != n_rows * n_cols {
            return Err(CepstralError::Dimension { expected: n_rows * n_cols, got: observed.len() });
        }
        let index = observed.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i).collect();
        Ok(Self { n_rows, n_cols, observed, index })
    }

    /// Marks the listed 1-based `(r, s)` cells as missing.
    pub fn with_missing(n_rows: usize, n_cols: usize, missing: &[(usize, usize)]) -> Result<Self> {
        let mut obs = vec![true; n_rows * n_cols];
        for &(r, s) in missing {
            if r == 0 || s == 0 || r > n_rows || s > n_cols {
                return Err(CepstralError::InvalidArgument(format!("cell ({r}, {s}) outside the lattice")));
            }
            obs[(r - 1) * n_cols + s - 1] = false;
        }
        Self::from_observed(n_rows, n_cols, obs)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    /// Positions of observed cells in the lexicographic vector, increasing.
    pub fn indices(&self) -> &[usize] {
        &self.index
    }

    pub fn count(&self) -> usize {
        self.index.len()
    }

    pub fn is_complete(&self) -> bool {
        self.count() == self.observed.len()
    }

    fn check(&self, sample: &LatticeSample) -> Result<()> {
        if (self.n_rows, self.n_cols) != (sample.n_rows(), sample.n_cols()) {
            return Err(CepstralError::Dimension { expected: sample.len(), got: self.observed.len() });
        }
        if self.index.is_empty() {
            return Err(CepstralError::AllMissing);
        }
        Ok(())
    }

    /// `J v`.
    pub fn select(&self, v: &[f64]) -> Vec<f64> {
        self.index.iter().map(|&i| v[i]).collect()
    }

    /// `J A J'` as a row-major buffer.
    fn contract(&self, a: &DMatrix<f64>) -> Vec<f64> {
        let m = self.index.len();
        let mut out = Vec::with_capacity(m * m);
        for &i in &self.index {
            for &j in &self.index {
                out.push(a[(j, i)]);
            }
        }
        out
    }
}

fn lattice_sigma(grid: &CepstralGrid, n_rows: usize, n_cols: usize, acf: AcfMethod) -> Result<BlockToeplitzCov> {
    BlockToeplitzCov::assemble(&acf.compute(grid, lattice_lag(n_rows, n_cols))?, n_rows, n_cols)
}

/// Gaussian log-likelihood of the observed cells `Z = JY` under
/// `N(Jμ, JΣJ')`, without the `2π` constant.
pub fn missing_loglik(
    sample: &LatticeSample,
    selection: &SelectionMap,
    grid: &CepstralGrid,
    beta: &DVector<f64>,
    acf: AcfMethod,
) -> Result<f64> {
    selection.check(sample)?;
    let sigma = lattice_sigma(grid, sample.n_rows(), sample.n_cols(), acf)?;
    let chol = Cholesky::factor_row_major(selection.count(), &selection.contract(sigma.sigma()))?;
    let resid = selection.select(sample.residual(beta)?.as_slice());
    loglik_from_cholesky(&chol, &resid)
}

/// Signal-plus-noise decomposition `Y = S + N` with independent cepstral
/// fields and the regression mean split between the two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalNoiseSpec {
    pub signal: CepstralGrid,
    pub noise: CepstralGrid,
    pub beta: Vec<f64>,
    /// Design columns whose effects belong to the signal.
    pub mean_assignment: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalExtraction {
    pub n_rows: usize,
    pub n_cols: usize,
    /// `E[S | Z]`, row-major over the whole lattice.
    pub mean: Vec<f64>,
    /// Diagonal of `Var[S | Z]`.
    pub variance: Vec<f64>,
    /// Full `Var[S | Z]`, only for lattices within
    /// [`DENSE_COVARIANCE_MAX_SIDE`].
    pub covariance: Option<DMatrix<f64>>,
}

impl SignalExtraction {
    pub fn std_errors(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// Conditional mean and covariance of the signal given the observed cells:
/// `E[S] + Σ_S J'(J(Σ_S+Σ_N)J')^{-1}(Z - Jμ)` and
/// `Σ_S - Σ_S J'(J(Σ_S+Σ_N)J')^{-1} J Σ_S`.
pub fn extract_signal(
    sample: &LatticeSample,
    spec: &SignalNoiseSpec,
    selection: &SelectionMap,
    acf: AcfMethod,
) -> Result<SignalExtraction> {
    selection.check(sample)?;
    let l = sample.n_regressors();
    if spec.beta.len() != l {
        return Err(CepstralError::Dimension { expected: l, got: spec.beta.len() });
    }
    if let Some(&c) = spec.mean_assignment.iter().find(|&&c| c >= l) {
        return Err(CepstralError::InvalidArgument(format!("mean assignment column {c} outside design")));
    }
    let (nr, nc) = (sample.n_rows(), sample.n_cols());
    let n = nr * nc;
    let sig_s = lattice_sigma(&spec.signal, nr, nc, acf)?;
    let sig_n = lattice_sigma(&spec.noise, nr, nc, acf)?;
    let total = sig_s.sigma() + sig_n.sigma();
    let chol = Cholesky::factor_row_major(selection.count(), &selection.contract(&total))?;

    let beta = DVector::from_column_slice(&spec.beta);
    let mu = sample.mean(&beta)?;
    let mut beta_s = DVector::zeros(l);
    for &c in &spec.mean_assignment {
        beta_s[c] = spec.beta[c];
    }
    let es = sample.mean(&beta_s)?;

    let resid = selection.select((sample.y() - &mu).as_slice());
    let alpha = chol.solve(&resid)?;
    let ss = sig_s.sigma();
    let idx = selection.indices();
    let mean: Vec<f64> = (0..n).map(|i| es[i] + idx.iter().zip(&alpha).map(|(&j, a)| ss[(i, j)] * a).sum::<f64>()).collect();

    // V = L^{-1} J Σ_S, so Var[S | Z] = Σ_S - V'V
    let m = idx.len();
    let mut v = DMatrix::zeros(m, n);
    for i in 0..n {
        let col: Vec<f64> = idx.iter().map(|&j| ss[(j, i)]).collect();
        v.set_column(i, &DVector::from_vec(chol.solve_lower(&col)?));
    }
    let variance: Vec<f64> = (0..n).map(|i| ss[(i, i)] - v.column(i).norm_squared()).collect();
    let covariance = if nr <= DENSE_COVARIANCE_MAX_SIDE && nc <= DENSE_COVARIANCE_MAX_SIDE {
        let mut c = ss - v.tr_mul(&v);
        // exact symmetry
        c = (&c + c.transpose()) * 0.5;
        Some(c)
    } else {
        None
    };
    Ok(SignalExtraction { n_rows: nr, n_cols: nc, mean, variance, covariance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DesignSpec;
    use crate::objectives::gaussian_loglik;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(p: usize, rng: &mut ChaCha8Rng) -> CepstralGrid {
        let mut g = CepstralGrid::zeros(p);
        for (j, k) in g.free_positions() {
            g.set(j, k, rng.random_range(-0.4..0.4)).unwrap();
        }
        g
    }

    fn sample(nr: usize, nc: usize, rng: &mut ChaCha8Rng, spec: DesignSpec) -> LatticeSample {
        let y = (0..nr * nc).map(|_| rng.random_range(-2.0..2.0)).collect();
        LatticeSample::with_design(nr, nc, y, spec).unwrap()
    }

    #[test]
    fn complete_selection_matches_full_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_grid(2, &mut rng);
        let s = sample(4, 5, &mut rng, DesignSpec::Constant);
        let b = DVector::from_element(1, 0.3);
        let full = gaussian_loglik(&s, &g, &b).unwrap();
        let sel = SelectionMap::all(4, 5);
        assert_eq!(missing_loglik(&s, &sel, &g, &b, AcfMethod::default()).unwrap(), full);
    }

    #[test]
    fn single_observed_cell_is_scalar_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_grid(1, &mut rng);
        let s = sample(3, 3, &mut rng, DesignSpec::None);
        let mut obs = vec![false; 9];
        obs[4] = true;
        let sel = SelectionMap::from_observed(3, 3, obs).unwrap();
        let v = AcfMethod::default().compute(&g, 2).unwrap().variance();
        let y = s.y()[4];
        let want = -0.5 * v.ln() - 0.5 * y * y / v;
        let got = missing_loglik(&s, &sel, &g, &DVector::zeros(0), AcfMethod::default()).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn all_missing_rejected() {
        let s = LatticeSample::with_design(2, 2, vec![1.0; 4], DesignSpec::None).unwrap();
        let sel = SelectionMap::from_observed(2, 2, vec![false; 4]).unwrap();
        assert!(matches!(
            missing_loglik(&s, &sel, &CepstralGrid::zeros(0), &DVector::zeros(0), AcfMethod::default()),
            Err(CepstralError::AllMissing)
        ));
    }

    #[test]
    fn white_signal_and_noise_shrink() {
        let (cs, cn) = (0.4_f64, -0.2_f64);
        let (vs, vn) = (cs.exp(), cn.exp());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample(3, 4, &mut rng, DesignSpec::None);
        let spec = SignalNoiseSpec {
            signal: CepstralGrid::white(0, cs),
            noise: CepstralGrid::white(0, cn),
            beta: vec![],
            mean_assignment: vec![],
        };
        let out = extract_signal(&s, &spec, &SelectionMap::all(3, 4), AcfMethod::default()).unwrap();
        for (m, y) in out.mean.iter().zip(s.y().iter()) {
            assert!((m - vs / (vs + vn) * y).abs() < 1e-12);
        }
        for v in &out.variance {
            assert!((v - vs * vn / (vs + vn)).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_noise_returns_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample(4, 4, &mut rng, DesignSpec::Constant);
        let spec = SignalNoiseSpec {
            signal: random_grid(1, &mut rng),
            noise: CepstralGrid::white(0, -10.0),
            beta: vec![0.5],
            mean_assignment: vec![0],
        };
        let out = extract_signal(&s, &spec, &SelectionMap::all(4, 4), AcfMethod::default()).unwrap();
        for (m, y) in out.mean.iter().zip(s.y().iter()) {
            assert!((m - y).abs() < 1e-3);
        }
    }

    #[test]
    fn conditional_covariance_is_psd_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample(3, 3, &mut rng, DesignSpec::Constant);
        let spec = SignalNoiseSpec {
            signal: random_grid(1, &mut rng),
            noise: random_grid(1, &mut rng),
            beta: vec![0.1],
            mean_assignment: vec![],
        };
        let sel = SelectionMap::with_missing(3, 3, &[(2, 2)]).unwrap();
        let out = extract_signal(&s, &spec, &sel, AcfMethod::default()).unwrap();
        let c = out.covariance.unwrap();
        assert_eq!(c, c.transpose());
        assert!(c.symmetric_eigenvalues().min() > -1e-12);
        let prior = AcfMethod::default().compute(&spec.signal, 2).unwrap().variance();
        assert!(out.variance.iter().all(|&v| v <= prior + 1e-12));
    }
}
