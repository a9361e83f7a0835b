//! Dense lattice covariance matrices built from autocovariance tables, with a
//! Cholesky factorisation that reports the failing leading minor.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cepstral::AcfTable;
use crate::error::{CepstralError, Result};

/// Lower Cholesky factor stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorise.
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for t in 0..4 {
            acc[t] += x[t] * y[t];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl Cholesky {
    /// Factors a symmetric matrix given row-major; only the lower triangle
    /// is read.
    pub fn factor_row_major(n: usize, a: &[f64]) -> Result<Self> {
        if a.len() != n * n {
            return Err(CepstralError::Dimension { expected: n * n, got: a.len() });
        }
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (i * n, j * n);
                let dot = dot(&l[ri..ri + j], &l[rj..rj + j]);
                let v = a[ri + j] - dot;
                if i == j {
                    if v <= 0.0 || !v.is_finite() {
                        return Err(CepstralError::NotPositiveDefinite { minor: i + 1, size: n });
                    }
                    l[ri + i] = v.sqrt();
                } else {
                    l[ri + j] = v / l[rj + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(CepstralError::Dimension { expected: a.nrows(), got: a.ncols() });
        }
        let n = a.nrows();
        let rm: Vec<f64> = (0..n * n).map(|k| a[(k / n, k % n)]).collect();
        Self::factor_row_major(n, &rm)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.l)
    }

    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(CepstralError::Dimension { expected: self.n, got: len });
        }
        Ok(())
    }

    /// `L^{-1} v`.
    pub fn solve_lower(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v.len())?;
        let n = self.n;
        let mut z = v.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let dot: f64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
            z[i] = (z[i] - dot) / self.l[i * n + i];
        }
        Ok(z)
    }

    /// `L'^{-1} z`.
    pub fn solve_upper(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z.len())?;
        let n = self.n;
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.l[i * n + i];
            let xi = x[i];
            for (xk, lik) in x[..i].iter_mut().zip(&self.l[i * n..i * n + i]) {
                *xk -= lik * xi;
            }
        }
        Ok(x)
    }

    /// `A^{-1} v`.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.solve_upper(&self.solve_lower(v)?)
    }

    /// `v' A^{-1} v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        Ok(self.solve_lower(v)?.iter().map(|z| z * z).sum())
    }

    /// `L e`.
    pub fn mul_lower(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.check(e.len())?;
        let n = self.n;
        Ok((0..n).map(|i| self.l[i * n..=i * n + i].iter().zip(e).map(|(a, b)| a * b).sum()).collect())
    }

    /// `L^{-1} X` column by column.
    pub fn solve_lower_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x.nrows())?;
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let col: Vec<f64> = x.column(c).iter().copied().collect();
            out.set_column(c, &DVector::from_vec(self.solve_lower(&col)?));
        }
        Ok(out)
    }
}

/// Covariance of the vectorised lattice: sites `(r, s)` and `(a, b)` covary
/// by `γ_{a-r, b-s}`.
#[derive(Clone, Debug)]
pub struct BlockToeplitzCov {
    n_rows: usize,
    n_cols: usize,
    sigma: DMatrix<f64>,
    chol: Option<Cholesky>,
}

impl BlockToeplitzCov {
    pub fn assemble(acf: &AcfTable, n_rows: usize, n_cols: usize) -> Result<Self> {
        let need = n_rows.max(n_cols).saturating_sub(1);
        if acf.max_h() + 1 < n_rows || acf.max_k() + 1 < n_cols {
            return Err(CepstralError::LagWindow { available: acf.max_h().min(acf.max_k()), required: need });
        }
        let n = n_rows * n_cols;
        let mut sigma = DMatrix::zeros(n, n);
        for i in 0..n {
            let (r, s) = ((i / n_cols) as isize, (i % n_cols) as isize);
            for j in 0..n {
                let (a, b) = ((j / n_cols) as isize, (j % n_cols) as isize);
                sigma[(i, j)] = acf.get(a - r, b - s);
            }
        }
        Ok(Self { n_rows, n_cols, sigma, chol: None })
    }

    /// Assembles and factors in one step.
    pub fn factored(acf: &AcfTable, n_rows: usize, n_cols: usize) -> Result<Self> {
        let mut c = Self::assemble(acf, n_rows, n_cols)?;
        c.factor()?;
        Ok(c)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Factors on first call; returns the log-determinant.
    pub fn factor(&mut self) -> Result<f64> {
        if self.chol.is_none() {
            // Σ is symmetric, so its column-major storage is also row-major.
            self.chol = Some(Cholesky::factor_row_major(self.sigma.nrows(), self.sigma.as_slice())?);
        }
        Ok(self.cholesky()?.logdet())
    }

    pub fn cholesky(&self) -> Result<&Cholesky> {
        self.chol.as_ref().ok_or_else(|| CepstralError::InvalidArgument("covariance not factored".into()))
    }

    pub fn logdet(&self) -> Result<f64> {
        Ok(self.cholesky()?.logdet())
    }

    pub fn quad_form(&self, v: &DVector<f64>) -> Result<f64> {
        self.cholesky()?.quad_form(v.as_slice())
    }

    /// `L^{-1} v`, uncorrelated with unit variance when `v` has covariance Σ.
    pub fn whiten(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.cholesky()?.solve_lower(v.as_slice())?))
    }

    pub fn solve(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.cholesky()?.solve(v.as_slice())?))
    }

    /// `mean + L ε` with ε standard normal from ChaCha8 seeded by `seed`.
    pub fn simulate(&self, mean: &DVector<f64>, seed: u64) -> Result<DVector<f64>> {
        self.simulate_with(mean, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn simulate_with<R: Rng + ?Sized>(&self, mean: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        let chol = self.cholesky()?;
        if mean.len() != chol.size() {
            return Err(CepstralError::Dimension { expected: chol.size(), got: mean.len() });
        }
        let eps: Vec<f64> = (0..chol.size()).map(|_| rng.sample(StandardNormal)).collect();
        let draw = chol.mul_lower(&eps)?;
        Ok(DVector::from_iterator(mean.len(), mean.iter().zip(draw).map(|(m, d)| m + d)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cepstral::{acf_exact, acf_mesh, CepstralGrid};
    use crate::grid::CenteredGrid;

    fn random_grid(p: usize, seed: u64) -> CepstralGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CepstralGrid::zeros(p);
        for (j, k) in g.free_positions() {
            g.set(j, k, rng.random_range(-0.4..0.4)).unwrap();
        }
        g
    }

    #[test]
    fn white_noise_is_identity() {
        let c = BlockToeplitzCov::factored(&AcfTable::white(3, 3), 3, 4).unwrap();
        assert_eq!(c.sigma(), &DMatrix::identity(12, 12));
        assert_eq!(c.logdet().unwrap(), 0.0);
        let v = DVector::from_fn(12, |i, _| i as f64 - 3.0);
        assert!((c.quad_form(&v).unwrap() - v.norm_squared()).abs() < 1e-12);
        assert_eq!(c.whiten(&v).unwrap(), v);
        assert_eq!(c.cholesky().unwrap().lower(), DMatrix::identity(12, 12));
    }

    #[test]
    fn column_process_on_two_by_one() {
        let mut g = CenteredGrid::zeros(1, 1);
        g.set(0, 0, 2.0);
        g.set(1, 0, 1.0);
        g.set(-1, 0, 1.0);
        let c = BlockToeplitzCov::assemble(&AcfTable::new(g), 2, 1).unwrap();
        assert_eq!(c.sigma(), &DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn hand_determinant() {
        let ch = Cholesky::factor(&DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0])).unwrap();
        assert!((ch.logdet() - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn not_positive_definite_names_minor() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        match Cholesky::factor(&a) {
            Err(CepstralError::NotPositiveDefinite { minor: 3, size: 3 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn assembly_matches_pair_loop() {
        let g = random_grid(1, 1);
        let acf = acf_exact(&g, 2, 25).unwrap();
        let c = BlockToeplitzCov::assemble(&acf, 3, 3).unwrap();
        for r in 1..=3isize {
            for s in 1..=3isize {
                for a in 1..=3isize {
                    for b in 1..=3isize {
                        let i = ((r - 1) * 3 + s - 1) as usize;
                        let j = ((a - 1) * 3 + b - 1) as usize;
                        assert_eq!(c.sigma()[(i, j)], acf.get(a - r, b - s));
                    }
                }
            }
        }
        assert_eq!(c.sigma(), &c.sigma().transpose());
    }

    #[test]
    fn lag_window_checked() {
        assert!(matches!(
            BlockToeplitzCov::assemble(&AcfTable::white(2, 2), 4, 2),
            Err(CepstralError::LagWindow { .. })
        ));
    }

    #[test]
    fn logdet_and_quad_form_match_dense_oracles() {
        let g = random_grid(2, 8);
        let acf = acf_exact(&g, 5, 25).unwrap();
        let c = BlockToeplitzCov::factored(&acf, 5, 5).unwrap();
        let eig: f64 = c.sigma().clone().symmetric_eigenvalues().iter().map(|e| e.ln()).sum();
        assert!((c.logdet().unwrap() - eig).abs() < 1e-8);
        let v = DVector::from_fn(25, |i, _| (i as f64 * 0.37).sin());
        let dense = c.sigma().clone().lu().solve(&v).unwrap();
        assert!((c.quad_form(&v).unwrap() - v.dot(&dense)).abs() < 1e-8);
        assert!((c.solve(&v).unwrap() - dense).amax() < 1e-8);
    }

    #[test]
    fn exact_and_mesh_covariances_agree() {
        let g = random_grid(1, 12);
        let a = BlockToeplitzCov::assemble(&acf_exact(&g, 4, 25).unwrap(), 5, 5).unwrap();
        let b = BlockToeplitzCov::assemble(&acf_mesh(&g, 200, 4).unwrap(), 5, 5).unwrap();
        assert!((a.sigma() - b.sigma()).amax() < 1e-5);
    }

    #[test]
    fn simulate_white_noise_variance() {
        let c = BlockToeplitzCov::factored(&AcfTable::white(3, 3), 4, 4).unwrap();
        let mean = DVector::zeros(16);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 10_000;
        let mut ss = DVector::<f64>::zeros(16);
        for _ in 0..draws {
            let d = c.simulate_with(&mean, &mut rng).unwrap();
            ss += d.component_mul(&d);
        }
        for v in ss.iter() {
            assert!((v / draws as f64 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn whitened_simulations_are_uncorrelated() {
        let g = random_grid(1, 2);
        let c = BlockToeplitzCov::factored(&acf_exact(&g, 3, 25).unwrap(), 4, 4).unwrap();
        let mean = DVector::from_element(16, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let z = c.whiten(&(c.simulate_with(&mean, &mut rng).unwrap() - &mean)).unwrap();
            // lag-(0,1) neighbour pair at sites (1,1),(1,2)
            acc += z[0] * z[1];
        }
        let corr = acc / draws as f64;
        assert!(corr.abs() < 3.0 / (draws as f64).sqrt());
    }

    #[test]
    fn simulation_is_seed_reproducible() {
        let c = BlockToeplitzCov::factored(&AcfTable::white(1, 1), 2, 2).unwrap();
        let m = DVector::zeros(4);
        assert_eq!(c.simulate(&m, 7).unwrap(), c.simulate(&m, 7).unwrap());
        assert_ne!(c.simulate(&m, 7).unwrap(), c.simulate(&m, 8).unwrap());
    }
}
