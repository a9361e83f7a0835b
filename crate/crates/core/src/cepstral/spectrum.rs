//! Evaluation of the cepstral spectrum on the frequency mesh
//! `{(π u / M, π v / M) : -M <= u, v <= M}`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use super::CepstralGrid;
use crate::error::{CepstralError, Result};
use crate::grid::CenteredGrid;

/// Below this order the mesh is built with the complex matrix product
/// `Ē′[Θ]E`; above it the real cosine/sine factorisation is used.
pub const MATRIX_FORM_MAX_ORDER: usize = 64;

/// Values on the frequency mesh of order `M`; entry `(u, v)` sits at
/// `(λ1, λ2) = (π u / M, π v / M)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    order: usize,
    values: CenteredGrid,
}

impl FrequencyGrid {
    pub fn new(values: CenteredGrid) -> Result<Self> {
        if values.half_rows() != values.half_cols() {
            return Err(CepstralError::InvalidArgument("frequency mesh must be square".into()));
        }
        Ok(Self { order: values.half_rows(), values })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &CenteredGrid {
        &self.values
    }

    pub fn get(&self, u: isize, v: isize) -> f64 {
        self.values.get(u, v)
    }

    pub fn frequency(&self, u: isize) -> f64 {
        PI * u as f64 / self.order as f64
    }

    /// Plain average over all `(2M+1)^2` mesh points.
    pub fn mean(&self) -> f64 {
        let s: f64 = self.values.as_slice().iter().sum();
        s / self.values.as_slice().len() as f64
    }

    /// `<f>`, the normalised double integral over `[-π, π]^2`, by the
    /// trapezoid rule: the duplicated `±π` rows and columns get half weight,
    /// which makes this the exact periodic rule on `2M` points per axis.
    pub fn integral(&self) -> f64 {
        let m = self.order as isize;
        let mut s = 0.0;
        for (u, v, x) in self.values.iter() {
            s += MeshRule::Trapezoid.weight(u, m) * MeshRule::Trapezoid.weight(v, m) * x;
        }
        s / (4 * m * m) as f64
    }
}

/// A strictly positive spectral density on the mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMesh(FrequencyGrid);

impl SpectralMesh {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    pub fn get(&self, u: isize, v: isize) -> f64 {
        self.0.get(u, v)
    }

    pub fn into_inner(self) -> FrequencyGrid {
        self.0
    }
}

/// Quadrature rule over the `(2M+1)` mesh points of each axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum MeshRule {
    /// Half weight on `±π`, divisor `(2M)^2`.
    #[default]
    Trapezoid,
    /// Unit weights, divisor `(2M+1)^2` (counts `±π` twice).
    Uniform,
}

impl MeshRule {
    pub fn weight(self, u: isize, m: isize) -> f64 {
        match self {
            MeshRule::Trapezoid if u.abs() == m => 0.5,
            _ => 1.0,
        }
    }

    pub fn divisor(self, m: usize) -> f64 {
        match self {
            MeshRule::Trapezoid => (2 * m) as f64,
            MeshRule::Uniform => (2 * m + 1) as f64,
        }
    }
}

/// `cos(π n / M)` and `sin(π n / M)` with the angle reduced modulo `2M`
/// before scaling.
pub(crate) fn trig(n: isize, m: usize) -> (f64, f64) {
    let period = 2 * m as isize;
    let r = n.rem_euclid(period);
    let a = PI * r as f64 / m as f64;
    (a.cos(), a.sin())
}

/// Tables `c[i][u] = cos(π i u / M)`, `s[i][u] = sin(π i u / M)` for
/// `-half <= i <= half`, `-M <= u <= M`.
pub(crate) fn trig_tables(half: usize, m: usize) -> (CenteredGrid, CenteredGrid) {
    let mut c = CenteredGrid::zeros(half, m);
    let mut s = CenteredGrid::zeros(half, m);
    let (h, mm) = (half as isize, m as isize);
    for i in -h..=h {
        for u in -mm..=mm {
            let (cv, sv) = trig(i * u, m);
            c.set(i, u, cv);
            s.set(i, u, sv);
        }
    }
    (c, s)
}

/// `log F` on the mesh via the real factorisation
/// `cos(jλ1 + kλ2) = cos jλ1 cos kλ2 - sin jλ1 sin kλ2`.
pub fn log_spectrum_separable(grid: &CepstralGrid, m: usize) -> CenteredGrid {
    trig_poly_on_mesh(grid.coefficients(), m)
}

/// `Σ c_{j,k} cos(j λ1 + k λ2)` on the mesh of order `m`; for point-symmetric
/// coefficients this is the full (real) Fourier sum `Σ c_{j,k} e^{-i(jλ1 + kλ2)}`.
pub(crate) fn trig_poly_on_mesh(coef: &CenteredGrid, m: usize) -> CenteredGrid {
    let pr = coef.half_rows() as isize;
    let pc = coef.half_cols() as isize;
    let mm = m as isize;
    let (c, s) = trig_tables(coef.half_rows().max(coef.half_cols()), m);
    // tc[j][v] = Σ_k c_jk cos(k λ_v), ts[j][v] = Σ_k c_jk sin(k λ_v)
    let mut tc = CenteredGrid::zeros(coef.half_rows(), m);
    let mut ts = CenteredGrid::zeros(coef.half_rows(), m);
    for j in -pr..=pr {
        for k in -pc..=pc {
            let t = coef.get(j, k);
            if t == 0.0 {
                continue;
            }
            for v in -mm..=mm {
                tc.add(j, v, t * c.get(k, v));
                ts.add(j, v, t * s.get(k, v));
            }
        }
    }
    let mut out = CenteredGrid::square(m);
    for u in -mm..=mm {
        for j in -pr..=pr {
            let (cj, sj) = (c.get(j, u), s.get(j, u));
            for v in -mm..=mm {
                out.add(u, v, cj * tc.get(j, v) - sj * ts.get(j, v));
            }
        }
    }
    out
}

/// The complex matrix `Ē′[Θ]E` with `E_{jk} = exp{π i (p+1-j)(M-k+1)/M}`;
/// entry `(r, s)` (1-based) holds `log F(π(M+1-s)/M, π(M+1-r)/M)`.
pub fn log_spectrum_matrix_form(grid: &CepstralGrid, m: usize) -> DMatrix<Complex<f64>> {
    let p = grid.order();
    let n = 2 * p + 1;
    let e = DMatrix::from_fn(n, 2 * m + 1, |j, k| {
        // 0-based j, k
        let (c, s) = trig((p as isize - j as isize) * (m as isize - k as isize), m);
        Complex::new(c, s)
    });
    let theta = grid.matrix_form().map(|x| Complex::new(x, 0.0));
    e.adjoint() * theta * e
}

/// Evaluates `F = exp{Σ Θ_{j,k} e^{-i(jλ1 + kλ2)}}` on the `(2M+1)^2` mesh.
pub fn spectrum_on_mesh(grid: &CepstralGrid, m: usize) -> Result<SpectralMesh> {
    let logf = log_spectrum(grid, m)?;
    Ok(SpectralMesh(FrequencyGrid::new(logf.map(f64::exp))?))
}

/// `log F` on the mesh, dispatching between the two evaluation routes.
pub fn log_spectrum(grid: &CepstralGrid, m: usize) -> Result<CenteredGrid> {
    if m < grid.order() || m == 0 {
        return Err(CepstralError::MeshTooCoarse { mesh: m, required: grid.order().max(1), what: "order" });
    }
    if m > MATRIX_FORM_MAX_ORDER {
        return Ok(log_spectrum_separable(grid, m));
    }
    let z = log_spectrum_matrix_form(grid, m);
    let mm = m as isize;
    let mut out = CenteredGrid::square(m);
    let mut max_imag = 0.0_f64;
    for r in 0..(2 * m + 1) {
        for s in 0..(2 * m + 1) {
            let v = z[(r, s)];
            max_imag = max_imag.max(v.im.abs());
            // 1-based r', s': u = M+1-s', v = M+1-r'
            out.set(mm - s as isize, mm - r as isize, v.re);
        }
    }
    debug_assert!(max_imag <= 1e-10 * (1.0 + grid.coefficients().max_abs()), "imaginary residue {max_imag}");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(p: usize, seed: u64) -> CepstralGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CepstralGrid::zeros(p);
        for (j, k) in g.free_positions() {
            g.set(j, k, rng.random_range(-0.5..0.5)).unwrap();
        }
        g
    }

    /// Direct double sum of the trigonometric polynomial.
    fn naive_log_f(g: &CepstralGrid, l1: f64, l2: f64) -> f64 {
        let p = g.order() as isize;
        let mut re = 0.0;
        let mut im = 0.0;
        for j in -p..=p {
            for k in -p..=p {
                let a = -(j as f64 * l1 + k as f64 * l2);
                re += g.get(j, k) * a.cos();
                im += g.get(j, k) * a.sin();
            }
        }
        assert!(im.abs() < 1e-12);
        re
    }

    #[test]
    fn white_noise_is_flat() {
        let f = spectrum_on_mesh(&CepstralGrid::zeros(0), 4).unwrap();
        assert_eq!(f.grid().values().as_slice().len(), 81);
        assert!(f.grid().values().as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn single_axis_pair_gives_cosine() {
        let a = 0.3;
        let mut g = CepstralGrid::zeros(1);
        g.set(0, 1, a).unwrap();
        let f = spectrum_on_mesh(&g, 6).unwrap();
        for u in -6..=6 {
            for v in -6..=6 {
                let l2 = f.grid().frequency(v);
                assert!((f.get(u, v) - (2.0 * a * l2.cos()).exp()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn mesh_matches_naive_sum() {
        let g = random_grid(2, 11);
        let m = 50;
        let f = spectrum_on_mesh(&g, m).unwrap();
        for &(u, v) in &[(0, 0), (3, -7), (-50, 50), (17, 22), (-33, 1)] {
            let l1 = PI * u as f64 / m as f64;
            let l2 = PI * v as f64 / m as f64;
            let want = naive_log_f(&g, l1, l2).exp();
            assert!((f.get(u, v) - want).abs() < 1e-12, "({u},{v})");
        }
    }

    #[test]
    fn matrix_form_and_separable_routes_agree() {
        for (p, m, seed) in [(1, 5, 1), (2, 16, 2), (3, 40, 3)] {
            let g = random_grid(p, seed);
            let z = log_spectrum_matrix_form(&g, m);
            let sep = log_spectrum_separable(&g, m);
            let mm = m as isize;
            for r in 0..(2 * m + 1) {
                for s in 0..(2 * m + 1) {
                    assert!(z[(r, s)].im.abs() < 1e-10);
                    let want = sep.get(mm - s as isize, mm - r as isize);
                    assert!((z[(r, s)].re - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejects_coarse_mesh() {
        assert!(matches!(
            spectrum_on_mesh(&CepstralGrid::zeros(3), 2),
            Err(CepstralError::MeshTooCoarse { .. })
        ));
    }

    #[test]
    fn mirror_symmetry_of_mesh() {
        let f = spectrum_on_mesh(&random_grid(2, 5), 20).unwrap();
        for u in -20..=20 {
            for v in -20..=20 {
                assert!((f.get(u, v) - f.get(-u, -v)).abs() < 1e-12);
                assert!(f.get(u, v) > 0.0);
            }
        }
    }

    #[test]
    fn trapezoid_integral_is_exact_for_trig_polynomials() {
        let g = random_grid(2, 9);
        let f = FrequencyGrid::new(log_spectrum(&g, 8).unwrap()).unwrap();
        assert!((f.integral() - g.log_variance()).abs() < 1e-13);
    }
}
