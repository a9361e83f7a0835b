//! The cepstral coefficient grid and its free-parameter form.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CepstralError, Result};
use crate::grid::CenteredGrid;

/// Coefficients structurally fixed at zero.
///
/// A mask is always mirror symmetric: masking `(j, k)` masks `(-j, -k)` too.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientMask {
    order: usize,
    fixed: Vec<bool>,
}

impl CoefficientMask {
    /// No coefficient is fixed.
    pub fn none(order: usize) -> Self {
        let n = 2 * order + 1;
        Self { order, fixed: vec![false; n * n] }
    }

    /// Keeps `Θ_{j,k}` with `j, k >= 0` (and their mirror images) and fixes
    /// the second/fourth quadrant interiors.
    pub fn positive_quadrant(order: usize) -> Self {
        let mut m = Self::none(order);
        let p = order as isize;
        for j in 1..=p {
            for k in 1..=p {
                m.fix(-j, k);
            }
        }
        m
    }

    /// Keeps only the axes of the grid (a separable field).
    pub fn separable(order: usize) -> Self {
        let mut m = Self::none(order);
        let p = order as isize;
        for j in -p..=p {
            for k in -p..=p {
                if j != 0 && k != 0 {
                    m.fix(j, k);
                }
            }
        }
        m
    }

    /// Fixes the listed positions (mirror images are added automatically).
    pub fn from_positions(order: usize, positions: &[(isize, isize)]) -> Result<Self> {
        let mut m = Self::none(order);
        for &(j, k) in positions {
            if j.unsigned_abs() > order || k.unsigned_abs() > order {
                return Err(CepstralError::InvalidArgument(format!(
                    "position ({j}, {k}) outside order {order}"
                )));
            }
            m.fix(j, k);
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn idx(&self, j: isize, k: isize) -> usize {
        let n = 2 * self.order + 1;
        let p = self.order as isize;
        (j + p) as usize * n + (k + p) as usize
    }

    pub fn fix(&mut self, j: isize, k: isize) {
        let a = self.idx(j, k);
        let b = self.idx(-j, -k);
        self.fixed[a] = true;
        self.fixed[b] = true;
    }

    pub fn is_fixed(&self, j: isize, k: isize) -> bool {
        if j.unsigned_abs() > self.order || k.unsigned_abs() > self.order {
            return true;
        }
        self.fixed[self.idx(j, k)]
    }

    /// Free positions in canonical order.
    pub fn free_positions(&self) -> Vec<(isize, isize)> {
        canonical_positions(self.order)
            .into_iter()
            .filter(|&(j, k)| !self.is_fixed(j, k))
            .collect()
    }

    pub fn free_count(&self) -> usize {
        self.free_positions().len()
    }

    /// Same mask viewed at a larger order; new positions are free.
    pub fn widened(&self, order: usize) -> Self {
        assert!(order >= self.order);
        let mut m = Self::none(order);
        let p = self.order as isize;
        for j in -p..=p {
            for k in -p..=p {
                if self.is_fixed(j, k) {
                    m.fix(j, k);
                }
            }
        }
        m
    }
}

/// Canonical ordering of the non-redundant coefficients: `Θ_{0,0}` first,
/// then the half plane `{(j,k): k > 0} ∪ {(j,0): j >= 1}` sorted
/// lexicographically by `(j, k)`.
pub fn canonical_positions(order: usize) -> Vec<(isize, isize)> {
    let p = order as isize;
    let mut out = vec![(0, 0)];
    for j in -p..=p {
        for k in 0..=p {
            if k > 0 || j >= 1 {
                out.push((j, k));
            }
        }
    }
    out
}

/// Ordered values of the free coefficients (see [`canonical_positions`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeParamVector {
    pub values: Vec<f64>,
}

impl FreeParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Cepstral coefficients `Θ_{j,k}`, `-p <= j, k <= p`, of the log spectrum
/// `log F(λ1, λ2) = Σ Θ_{j,k} e^{-i(j λ1 + k λ2)}`.
///
/// The first index pairs with the row direction of the lattice. Mirror
/// symmetry `Θ_{j,k} = Θ_{-j,-k}` holds at all times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CepstralGrid {
    order: usize,
    theta: CenteredGrid,
    mask: CoefficientMask,
}

impl CepstralGrid {
    /// White noise with unit variance.
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            theta: CenteredGrid::square(order),
            mask: CoefficientMask::none(order),
        }
    }

    pub fn with_mask(order: usize, mask: CoefficientMask) -> Result<Self> {
        if mask.order() != order {
            return Err(CepstralError::InvalidArgument(format!(
                "mask order {} differs from grid order {order}",
                mask.order()
            )));
        }
        Ok(Self { order, theta: CenteredGrid::square(order), mask })
    }

    /// Builds a grid from a full coefficient array; it must already be
    /// mirror symmetric to within `1e-12`.
    pub fn from_centered(theta: CenteredGrid) -> Result<Self> {
        if theta.half_rows() != theta.half_cols() {
            return Err(CepstralError::InvalidArgument("coefficient grid must be square".into()));
        }
        let order = theta.half_rows();
        for (j, k, v) in theta.iter() {
            let w = theta.get(-j, -k);
            if (v - w).abs() > 1e-12 * (1.0 + v.abs()) {
                return Err(CepstralError::Asymmetric { j, k });
            }
        }
        let mut theta = theta;
        theta.symmetrize();
        Ok(Self { order, theta, mask: CoefficientMask::none(order) })
    }

    /// Grid with only the scale coefficient set.
    pub fn white(order: usize, log_variance: f64) -> Self {
        let mut g = Self::zeros(order);
        g.theta.set(0, 0, log_variance);
        g
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn mask(&self) -> &CoefficientMask {
        &self.mask
    }

    pub fn coefficients(&self) -> &CenteredGrid {
        &self.theta
    }

    /// `Θ_{j,k}`; zero outside the order.
    pub fn get(&self, j: isize, k: isize) -> f64 {
        self.theta.get_or_zero(j, k)
    }

    /// Sets `Θ_{j,k}` and `Θ_{-j,-k}` together.
    pub fn set(&mut self, j: isize, k: isize, value: f64) -> Result<()> {
        if j.unsigned_abs() > self.order || k.unsigned_abs() > self.order {
            return Err(CepstralError::InvalidArgument(format!(
                "({j}, {k}) outside order {}",
                self.order
            )));
        }
        if self.mask.is_fixed(j, k) && value != 0.0 {
            return Err(CepstralError::MaskedCoefficient { j, k });
        }
        self.theta.set(j, k, value);
        self.theta.set(-j, -k, value);
        Ok(())
    }

    pub fn log_variance(&self) -> f64 {
        self.theta.get(0, 0)
    }

    /// Entrywise negation: the coefficients of the reciprocal spectrum.
    pub fn negate(&self) -> Self {
        Self {
            order: self.order,
            theta: self.theta.map(|v| -v),
            mask: self.mask.clone(),
        }
    }

    /// Grid with `Θ_{0,0}` shifted by `c` (spectrum scaled by `e^c`).
    pub fn shifted_scale(&self, c: f64) -> Self {
        let mut g = self.clone();
        let v = g.theta.get(0, 0) + c;
        g.theta.set(0, 0, v);
        g
    }

    /// Coefficients with the two lattice directions exchanged,
    /// `Θ'_{j,k} = Θ_{k,j}`.
    pub fn transposed(&self) -> Self {
        let theta = CenteredGrid::from_fn(self.order, self.order, |j, k| self.theta.get(k, j));
        let p = self.order as isize;
        let mut mask = CoefficientMask::none(self.order);
        for j in -p..=p {
            for k in -p..=p {
                if self.mask.is_fixed(k, j) {
                    mask.fix(j, k);
                }
            }
        }
        Self { order: self.order, theta, mask }
    }

    /// Embeds the grid at a larger order, new coefficients zero.
    pub fn widened(&self, order: usize) -> Self {
        assert!(order >= self.order);
        Self {
            order,
            theta: self.theta.cropped(order, order),
            mask: self.mask.widened(order),
        }
    }

    pub fn free_positions(&self) -> Vec<(isize, isize)> {
        self.mask.free_positions()
    }

    pub fn free_count(&self) -> usize {
        self.mask.free_count()
    }

    pub fn to_free(&self) -> FreeParamVector {
        FreeParamVector::new(self.free_positions().iter().map(|&(j, k)| self.get(j, k)).collect())
    }

    pub fn from_free(order: usize, mask: &CoefficientMask, params: &FreeParamVector) -> Result<Self> {
        Self::from_free_slice(order, mask, &params.values)
    }

    pub fn from_free_slice(order: usize, mask: &CoefficientMask, params: &[f64]) -> Result<Self> {
        let mut g = Self::with_mask(order, mask.clone())?;
        let pos = mask.free_positions();
        if pos.len() != params.len() {
            return Err(CepstralError::Dimension { expected: pos.len(), got: params.len() });
        }
        for (&(j, k), &v) in pos.iter().zip(params) {
            g.theta.set(j, k, v);
            g.theta.set(-j, -k, v);
        }
        Ok(g)
    }

    /// Matrix form `[Θ]` with `[Θ]_{r,c} = Θ_{c-p-1, p+1-r}` (1-based):
    /// columns run along the first index, rows run down the second index.
    pub fn matrix_form(&self) -> DMatrix<f64> {
        let n = 2 * self.order + 1;
        let p = self.order as isize;
        DMatrix::from_fn(n, n, |r, c| self.get(c as isize - p, p - r as isize))
    }

    pub fn from_matrix_form(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() || n.is_multiple_of(2) {
            return Err(CepstralError::InvalidArgument(format!(
                "matrix form must be square with odd size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let p = (n / 2) as isize;
        let theta = CenteredGrid::from_fn(p as usize, p as usize, |j, k| m[((p - k) as usize, (j + p) as usize)]);
        Self::from_centered(theta)
    }

    /// Builds a grid from the leading `2p(p+1) + 1` entries of the
    /// column-major vectorisation of [`matrix_form`](Self::matrix_form); the
    /// last of those entries is `Θ_{0,0}` and the rest fill in by symmetry.
    pub fn from_matrix_vec_prefix(order: usize, values: &[f64]) -> Result<Self> {
        let n = 2 * order + 1;
        let need = (n * n).div_ceil(2);
        if values.len() != need {
            return Err(CepstralError::Dimension { expected: need, got: values.len() });
        }
        let p = order as isize;
        let mut theta = CenteredGrid::square(order);
        for (idx, &v) in values.iter().enumerate() {
            let (r, c) = (idx % n, idx / n);
            let (j, k) = (c as isize - p, p - r as isize);
            theta.set(j, k, v);
            theta.set(-j, -k, v);
        }
        Self::from_centered(theta)
    }

    /// Inverse of [`from_matrix_vec_prefix`](Self::from_matrix_vec_prefix).
    pub fn matrix_vec_prefix(&self) -> Vec<f64> {
        let n = 2 * self.order + 1;
        let m = self.matrix_form();
        m.as_slice()[..(n * n).div_ceil(2)].to_vec()
    }

    /// Plain-text form: `p=<order>` then the rows of the matrix form.
    pub fn to_text(&self) -> String {
        let m = self.matrix_form();
        let mut s = format!("p={}\n", self.order);
        for r in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:.17e}", m[(r, c)])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| CepstralError::InvalidArgument("empty grid file".into()))?;
        let order: usize = header
            .strip_prefix("p=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| CepstralError::InvalidArgument(format!("bad header line {header:?}")))?;
        let n = 2 * order + 1;
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            let line = lines.next().ok_or_else(|| CepstralError::Load {
                row: r + 2,
                col: 0,
                msg: "missing matrix row".into(),
            })?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != n {
                return Err(CepstralError::Load {
                    row: r + 2,
                    col: vals.len(),
                    msg: format!("expected {n} values"),
                });
            }
            for (c, v) in vals.iter().enumerate() {
                m[(r, c)] = v.parse().map_err(|_| CepstralError::Load {
                    row: r + 2,
                    col: c + 1,
                    msg: format!("not a number: {v:?}"),
                })?;
            }
        }
        Self::from_matrix_form(&m)
    }
}
