//! Autocovariances of the cepstral field, by quadrature of the spectrum and
//! by the exact moving-average factorisation.

use serde::{Deserialize, Serialize};

use super::recursion::{cepstral_to_ma, ma_acf, DEFAULT_TRUNCATION};
use super::spectrum::{log_spectrum, trig_tables, MeshRule};
use super::CepstralGrid;
use crate::error::{CepstralError, Result};
use crate::grid::{convolve, convolve_cropped, CenteredGrid};

/// Coefficients below this magnitude (relative to the unit leading
/// coefficient) are dropped before the component acfs are convolved.
const NEGLIGIBLE: f64 = 1e-18;

/// Autocovariances `γ_{h,k}` for `|h| <= max_h`, `|k| <= max_k`, where `h` is
/// the row lag and `k` the column lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcfTable {
    gamma: CenteredGrid,
    /// Moving-average tail magnitude when computed by the exact route.
    pub truncation_tail: Option<f64>,
}

impl AcfTable {
    pub fn new(gamma: CenteredGrid) -> Self {
        Self { gamma, truncation_tail: None }
    }

    /// Unit variance white noise.
    pub fn white(max_h: usize, max_k: usize) -> Self {
        let mut g = CenteredGrid::zeros(max_h, max_k);
        g.set(0, 0, 1.0);
        Self::new(g)
    }

    pub fn max_h(&self) -> usize {
        self.gamma.half_rows()
    }

    pub fn max_k(&self) -> usize {
        self.gamma.half_cols()
    }

    pub fn get(&self, h: isize, k: isize) -> f64 {
        self.gamma.get(h, k)
    }

    pub fn grid(&self) -> &CenteredGrid {
        &self.gamma
    }

    pub fn variance(&self) -> f64 {
        self.gamma.get(0, 0)
    }

    pub fn cropped(&self, max_h: usize, max_k: usize) -> Self {
        Self { gamma: self.gamma.cropped(max_h, max_k), truncation_tail: self.truncation_tail }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { gamma: self.gamma.map(|v| c * v), truncation_tail: self.truncation_tail }
    }
}

/// How model autocovariances are computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AcfMethod {
    /// Moving-average recursions truncated at the given index.
    Exact { truncation: usize },
    /// Quadrature of the spectrum on a mesh of the given order.
    Mesh { order: usize, rule: MeshRule },
}

impl Default for AcfMethod {
    fn default() -> Self {
        AcfMethod::Exact { truncation: DEFAULT_TRUNCATION }
    }
}

impl AcfMethod {
    pub fn compute(&self, grid: &CepstralGrid, max_lag: usize) -> Result<AcfTable> {
        match *self {
            AcfMethod::Exact { truncation } => acf_exact(grid, max_lag, truncation),
            AcfMethod::Mesh { order, rule } => acf_mesh_with(grid, order, max_lag, rule),
        }
    }
}

/// Autocovariances by quadrature of `F Z1^{-h} Z2^{-k}` on the frequency mesh
/// of order `m`, using the trapezoid weighting of the `±π` endpoints.
pub fn acf_mesh(grid: &CepstralGrid, m: usize, max_lag: usize) -> Result<AcfTable> {
    acf_mesh_with(grid, m, max_lag, MeshRule::Trapezoid)
}

/// [`acf_mesh`] with an explicit endpoint rule. `MeshRule::Uniform` is the
/// plain `(2M+1)^{-2} G exp{Ē′[Θ]E} Ḡ′` sum.
pub fn acf_mesh_with(grid: &CepstralGrid, m: usize, max_lag: usize, rule: MeshRule) -> Result<AcfTable> {
    if max_lag > m {
        return Err(CepstralError::MeshTooCoarse { mesh: m, required: max_lag, what: "lag" });
    }
    let logf = log_spectrum(grid, m)?;
    let mm = m as isize;
    let h = max_lag as isize;
    let mut fw = logf.map(f64::exp);
    for u in -mm..=mm {
        for v in -mm..=mm {
            let w = rule.weight(u, mm) * rule.weight(v, mm);
            if w != 1.0 {
                fw.set(u, v, w * fw.get(u, v));
            }
        }
    }
    let (c, s) = trig_tables(max_lag, m);
    // p[h][v] = Σ_u cos(h λ_u) F(u, v), q[h][v] = Σ_u sin(h λ_u) F(u, v)
    let mut p = CenteredGrid::zeros(max_lag, m);
    let mut q = CenteredGrid::zeros(max_lag, m);
    let w = fw.row_len();
    for hh in -h..=h {
        for u in -mm..=mm {
            let (ch, sh) = (c.get(hh, u), s.get(hh, u));
            let row = (u + mm) as usize * w;
            let frow = &fw.as_slice()[row..row + w];
            let prow = (hh + h) as usize * w;
            {
                let pr = &mut p.as_mut_slice()[prow..prow + w];
                for (o, &f) in pr.iter_mut().zip(frow) {
                    *o += ch * f;
                }
            }
            let qr = &mut q.as_mut_slice()[prow..prow + w];
            for (o, &f) in qr.iter_mut().zip(frow) {
                *o += sh * f;
            }
        }
    }
    let norm = rule.divisor(m).powi(2);
    let mut gamma = CenteredGrid::square(max_lag);
    for hh in -h..=h {
        for k in -h..=h {
            let mut acc = 0.0;
            for v in -mm..=mm {
                acc += p.get(hh, v) * c.get(k, v) - q.get(hh, v) * s.get(k, v);
            }
            gamma.set(hh, k, acc / norm);
        }
    }
    gamma.symmetrize();
    Ok(AcfTable::new(gamma))
}

/// Exact autocovariances from the moving-average factorisation
/// `F = e^{Θ00} |Ψ|^2 |Φ|^2 |Ξ|^2 |Ω|^2`:
///
/// `γ_{j,k} = e^{Θ00} Σ_{a,b} γ_{a,b}(Φ) Σ_{m,n} γ_{j+a-m, k-b-n}(Ψ) γ_m(Ξ) γ_n(Ω)`.
pub fn acf_exact(grid: &CepstralGrid, max_lag: usize, truncation: usize) -> Result<AcfTable> {
    let ma = cepstral_to_ma(grid, truncation)?;
    let comps = ma_acf(&ma);

    let psi = comps.psi.trimmed(NEGLIGIBLE);
    // Φ enters with its first lag reflected.
    let phi = comps.phi.trimmed(NEGLIGIBLE);
    let phi_reflected = CenteredGrid::from_fn(phi.half_rows(), phi.half_cols(), |x, y| phi.get(-x, y));
    let xi = comps.xi.trimmed(NEGLIGIBLE);
    let xi_col = CenteredGrid::from_fn(xi.half_cols(), 0, |x, _| xi.get(0, x));
    let omega = comps.omega.trimmed(NEGLIGIBLE);

    let h = max_lag;
    // Axis kernels first: they are one-dimensional and cheap.
    let t1 = convolve(&psi, &xi_col);
    let t2 = convolve(&t1, &omega);
    let mut gamma = convolve_cropped(&t2, &phi_reflected, h, h);

    let scale = grid.log_variance().exp();
    for v in gamma.as_mut_slice() {
        *v *= scale;
    }
    gamma.symmetrize();
    let mut table = AcfTable::new(gamma);
    table.truncation_tail = Some(ma.tail());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(p: usize, seed: u64, bound: f64) -> CepstralGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CepstralGrid::zeros(p);
        for (j, k) in g.free_positions() {
            g.set(j, k, rng.random_range(-bound..bound)).unwrap();
        }
        g
    }

    #[test]
    fn white_noise_acf() {
        let g = CepstralGrid::zeros(2);
        for acf in [acf_mesh(&g, 20, 5).unwrap(), acf_exact(&g, 5, 10).unwrap()] {
            for (h, k, v) in acf.grid().iter() {
                let want = if h == 0 && k == 0 { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scale_only_acf() {
        let c = 0.8;
        let g = CepstralGrid::white(1, c);
        for acf in [acf_mesh(&g, 10, 3).unwrap(), acf_exact(&g, 3, 5).unwrap()] {
            assert!((acf.variance() - c.exp()).abs() < 1e-12);
            for (h, k, v) in acf.grid().iter() {
                if (h, k) != (0, 0) {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn uniform_rule_double_counts_endpoints() {
        // The (2M+1)-point sum leaks (-1)^h / (2M+1) into axis lags.
        let g = CepstralGrid::zeros(0);
        let m = 4;
        let acf = acf_mesh_with(&g, m, 2, MeshRule::Uniform).unwrap();
        assert!((acf.variance() - 1.0).abs() < 1e-14);
        assert!((acf.get(1, 0) + 1.0 / 9.0).abs() < 1e-14);
        assert!((acf.get(2, 0) - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn exact_and_mesh_agree() {
        let g = random_grid(1, 3, 0.5);
        let exact = acf_exact(&g, 6, 25).unwrap();
        let mesh = acf_mesh(&g, 400, 6).unwrap();
        let scale = exact.variance();
        assert!(exact.grid().max_abs_diff(mesh.grid()) / scale < 1e-6);
    }

    #[test]
    fn exact_and_mesh_agree_order_two() {
        for seed in 0..4 {
            let g = random_grid(2, 30 + seed, 0.4);
            let exact = acf_exact(&g, 6, 25).unwrap();
            let mesh = acf_mesh(&g, 200, 6).unwrap();
            assert!(exact.grid().max_abs_diff(mesh.grid()) / exact.variance() < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn transposed_grid_transposes_acf() {
        let g = random_grid(2, 40, 0.4);
        let a = acf_exact(&g, 5, 25).unwrap();
        let b = acf_exact(&g.transposed(), 5, 25).unwrap();
        for (h, k, v) in a.grid().iter() {
            assert!((v - b.get(k, h)).abs() < 1e-12, "({h},{k})");
        }
    }

    #[test]
    fn rejects_lag_beyond_mesh() {
        assert!(acf_mesh(&CepstralGrid::zeros(1), 4, 5).is_err());
    }

    #[test]
    fn single_causal_coefficient_acf() {
        // Θ_{1,1} = Θ_{-1,-1} = b: F = |exp(b Z1 Z2)|^2
        // so γ_{n,n} = Σ_m ψ_{m+n} ψ_m with ψ_m = b^m/m!.
        let b = 0.4;
        let mut g = CepstralGrid::zeros(1);
        g.set(1, 1, b).unwrap();
        let acf = acf_exact(&g, 3, 30).unwrap();
        let coef = |m: i32| b.powi(m) / (1..=m).map(f64::from).product::<f64>();
        for n in 0..=3 {
            let want: f64 = (0..30).map(|m| coef(m + n) * coef(m)).sum();
            assert!((acf.get(n as isize, n as isize) - want).abs() < 1e-14);
        }
        assert!(acf.get(1, 0).abs() < 1e-15);
        assert!(acf.get(1, -1).abs() < 1e-15);
    }

    #[test]
    fn acf_is_bounded_by_variance() {
        let g = random_grid(2, 21, 0.5);
        let acf = acf_exact(&g, 6, 25).unwrap();
        for (h, k, v) in acf.grid().iter() {
            assert!((v - acf.get(-h, -k)).abs() == 0.0);
            assert!(v.abs() <= acf.variance());
        }
        assert!(acf.variance() > 0.0);
    }
}
