//! Dense storage for two-dimensional arrays addressed by signed offsets.

use serde::{Deserialize, Serialize};

/// A real array indexed by `(i, j)` with `-half_rows <= i <= half_rows` and
/// `-half_cols <= j <= half_cols`.
///
/// Used for cepstral coefficients, autocovariances and frequency meshes, all of
/// which are naturally centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteredGrid {
    half_rows: usize,
    half_cols: usize,
    data: Vec<f64>,
}

impl CenteredGrid {
    pub fn zeros(half_rows: usize, half_cols: usize) -> Self {
        Self {
            half_rows,
            half_cols,
            data: vec![0.0; (2 * half_rows + 1) * (2 * half_cols + 1)],
        }
    }

    pub fn square(half: usize) -> Self {
        Self::zeros(half, half)
    }

    pub fn from_fn(half_rows: usize, half_cols: usize, mut f: impl FnMut(isize, isize) -> f64) -> Self {
        let mut g = Self::zeros(half_rows, half_cols);
        let (hr, hc) = (half_rows as isize, half_cols as isize);
        for i in -hr..=hr {
            for j in -hc..=hc {
                g.set(i, j, f(i, j));
            }
        }
        g
    }

    pub fn half_rows(&self) -> usize {
        self.half_rows
    }

    pub fn half_cols(&self) -> usize {
        self.half_cols
    }

    pub fn row_len(&self) -> usize {
        2 * self.half_cols + 1
    }

    pub fn contains(&self, i: isize, j: isize) -> bool {
        i.unsigned_abs() <= self.half_rows && j.unsigned_abs() <= self.half_cols
    }

    #[inline]
    fn offset(&self, i: isize, j: isize) -> usize {
        debug_assert!(self.contains(i, j), "({i}, {j}) outside grid");
        let r = (i + self.half_rows as isize) as usize;
        let c = (j + self.half_cols as isize) as usize;
        r * self.row_len() + c
    }

    #[inline]
    pub fn get(&self, i: isize, j: isize) -> f64 {
        self.data[self.offset(i, j)]
    }

    /// Value at `(i, j)`, or zero outside the stored window.
    #[inline]
    pub fn get_or_zero(&self, i: isize, j: isize) -> f64 {
        if self.contains(i, j) {
            self.get(i, j)
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: isize, j: isize, v: f64) {
        let o = self.offset(i, j);
        self.data[o] = v;
    }

    #[inline]
    pub fn add(&mut self, i: isize, j: isize, v: f64) {
        let o = self.offset(i, j);
        self.data[o] += v;
    }

    /// Row-major values, first row is `i = -half_rows`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let hr = self.half_rows as isize;
        let hc = self.half_cols as isize;
        let w = self.row_len();
        self.data
            .iter()
            .enumerate()
            .map(move |(o, &v)| ((o / w) as isize - hr, (o % w) as isize - hc, v))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            half_rows: self.half_rows,
            half_cols: self.half_cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy of the sub-window `|i| <= half_rows`, `|j| <= half_cols`.
    pub fn cropped(&self, half_rows: usize, half_cols: usize) -> Self {
        Self::from_fn(half_rows, half_cols, |i, j| self.get_or_zero(i, j))
    }

    /// Average each entry with its point reflection through the origin.
    pub fn symmetrize(&mut self) {
        let hr = self.half_rows as isize;
        let hc = self.half_cols as isize;
        for i in -hr..=hr {
            for j in -hc..=hc {
                if (i, j) < (-i, -j) {
                    let m = 0.5 * (self.get(i, j) + self.get(-i, -j));
                    self.set(i, j, m);
                    self.set(-i, -j, m);
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute difference over the union of both windows.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let hr = self.half_rows.max(other.half_rows) as isize;
        let hc = self.half_cols.max(other.half_cols) as isize;
        let mut m = 0.0_f64;
        for i in -hr..=hr {
            for j in -hc..=hc {
                m = m.max((self.get_or_zero(i, j) - other.get_or_zero(i, j)).abs());
            }
        }
        m
    }

    /// Smallest centred window that keeps every entry with `|v| > tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let mut hr = 0usize;
        let mut hc = 0usize;
        for (i, j, v) in self.iter() {
            if v.abs() > tol {
                hr = hr.max(i.unsigned_abs());
                hc = hc.max(j.unsigned_abs());
            }
        }
        self.cropped(hr, hc)
    }
}

/// Full two-dimensional linear convolution `(a * b)(x, y) = sum a(u, v) b(x - u, y - v)`.
pub fn convolve(a: &CenteredGrid, b: &CenteredGrid) -> CenteredGrid {
    let hr = a.half_rows + b.half_rows;
    let hc = a.half_cols + b.half_cols;
    let mut out = CenteredGrid::zeros(hr, hc);
    let bw = b.row_len();
    let ow = out.row_len();
    for (u, v, av) in a.iter() {
        if av == 0.0 {
            continue;
        }
        // shift of b's origin inside `out`
        let r0 = (u + hr as isize - b.half_rows as isize) as usize;
        let c0 = (v + hc as isize - b.half_cols as isize) as usize;
        for (br, brow) in b.data.chunks_exact(bw).enumerate() {
            let start = (r0 + br) * ow + c0;
            for (o, &bv) in out.data[start..start + bw].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Convolution restricted to output offsets `|x| <= half_rows`, `|y| <= half_cols`.
pub fn convolve_cropped(
    a: &CenteredGrid,
    b: &CenteredGrid,
    half_rows: usize,
    half_cols: usize,
) -> CenteredGrid {
    let mut out = CenteredGrid::zeros(half_rows, half_cols);
    let (ohr, ohc) = (half_rows as isize, half_cols as isize);
    let (bhr, bhc) = (b.half_rows as isize, b.half_cols as isize);
    for (u, v, av) in a.iter() {
        if av == 0.0 {
            continue;
        }
        let x_lo = (u - bhr).max(-ohr);
        let x_hi = (u + bhr).min(ohr);
        let y_lo = (v - bhc).max(-ohc);
        let y_hi = (v + bhc).min(ohc);
        if x_lo > x_hi || y_lo > y_hi {
            continue;
        }
        let len = (y_hi - y_lo + 1) as usize;
        for x in x_lo..=x_hi {
            let bo = b.offset(x - u, y_lo - v);
            let oo = out.offset(x, y_lo);
            for (o, &bv) in out.data[oo..oo + len].iter_mut().zip(&b.data[bo..bo + len]) {
                *o += av * bv;
            }
        }
    }
    out
}
