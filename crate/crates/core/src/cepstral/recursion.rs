//! Moving-average factors of the cepstral spectrum.
//!
//! The log spectrum splits into a causal quadrant (`j, k >= 1`), a skew
//! quadrant (`Θ_{-j,k}`, `j, k >= 1`), the two semi-axes and the origin. Each
//! piece exponentiates to a one-sided moving-average field whose coefficients
//! follow from differentiating `Ψ = exp(P)`, i.e. `∂Ψ/∂Z1 = Ψ ∂P/∂Z1`.

use serde::{Deserialize, Serialize};

use super::CepstralGrid;
use crate::error::{CepstralError, Result};
use crate::grid::CenteredGrid;

/// Default truncation of the moving-average recursions.
pub const DEFAULT_TRUNCATION: usize = 25;

/// Tail magnitude above which a truncation is reported.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Coefficients of the four moving-average factors, indices `0..=truncation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaCoefficients {
    /// `psi[j * (K+1) + k]` multiplies `Z1^j Z2^k`.
    psi: Vec<f64>,
    /// `phi[j * (K+1) + k]` multiplies `Z1^{-j} Z2^k`.
    phi: Vec<f64>,
    xi: Vec<f64>,
    omega: Vec<f64>,
    truncation: usize,
}

impl MaCoefficients {
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    fn at(&self, j: usize, k: usize) -> usize {
        j * (self.truncation + 1) + k
    }

    pub fn psi(&self, j: usize, k: usize) -> f64 {
        self.psi[self.at(j, k)]
    }

    pub fn phi(&self, j: usize, k: usize) -> f64 {
        self.phi[self.at(j, k)]
    }

    pub fn xi(&self, j: usize) -> f64 {
        self.xi[j]
    }

    pub fn omega(&self, j: usize) -> f64 {
        self.omega[j]
    }

    /// Largest coefficient magnitude on the shell `j + k = K`, on the edges
    /// `j = K` and `k = K` of the retained square, and at index `K` of the
    /// axis sequences.
    pub fn tail(&self) -> f64 {
        let kk = self.truncation;
        let mut t = self.xi[kk].abs().max(self.omega[kk].abs());
        for j in 0..=kk {
            for (a, b) in [(j, kk - j), (j, kk), (kk, j)] {
                t = t.max(self.psi(a, b).abs()).max(self.phi(a, b).abs());
            }
        }
        t
    }

    pub fn is_truncated(&self) -> bool {
        self.tail() > TAIL_TOLERANCE
    }

    /// Builds coefficients directly; used by tests and by callers that
    /// already hold moving-average fields.
    pub fn from_parts(truncation: usize, psi: Vec<f64>, phi: Vec<f64>, xi: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        let sq = (truncation + 1) * (truncation + 1);
        for (len, want) in [(psi.len(), sq), (phi.len(), sq), (xi.len(), truncation + 1), (omega.len(), truncation + 1)] {
            if len != want {
                return Err(CepstralError::Dimension { expected: want, got: len });
            }
        }
        Ok(Self { psi, phi, xi, omega, truncation })
    }
}

/// Runs the four recursions up to index `truncation` in each direction.
///
/// Logs a warning when the outer shell exceeds [`TAIL_TOLERANCE`].
pub fn cepstral_to_ma(grid: &CepstralGrid, truncation: usize) -> Result<MaCoefficients> {
    if truncation < 1 {
        return Err(CepstralError::InvalidArgument("truncation must be at least 1".into()));
    }
    let kk = truncation;
    let p = grid.order();
    let w = kk + 1;

    let quadrant = |sign: isize| {
        let mut c = vec![0.0; w * w];
        c[0] = 1.0;
        for k in 1..=kk {
            for j in 1..=kk {
                let mut s = 0.0;
                for m in 1..=p.min(j) {
                    let mut inner = 0.0;
                    for n in 1..=p.min(k) {
                        let t = grid.get(sign * m as isize, n as isize);
                        if t != 0.0 {
                            inner += c[(j - m) * w + (k - n)] * t;
                        }
                    }
                    s += m as f64 * inner;
                }
                c[j * w + k] = s / j as f64;
            }
        }
        c
    };

    let axis = |coef: &dyn Fn(usize) -> f64| {
        let mut c = vec![0.0; w];
        c[0] = 1.0;
        for j in 1..=kk {
            let mut s = 0.0;
            for m in 1..=p.min(j) {
                s += m as f64 * coef(m) * c[j - m];
            }
            c[j] = s / j as f64;
        }
        c
    };

    let ma = MaCoefficients {
        psi: quadrant(1),
        phi: quadrant(-1),
        xi: axis(&|m| grid.get(m as isize, 0)),
        omega: axis(&|m| grid.get(0, m as isize)),
        truncation,
    };
    let tail = ma.tail();
    if tail > TAIL_TOLERANCE {
        log::warn!("moving-average tail {tail:.3e} at truncation {truncation}; raise the truncation");
    }
    Ok(ma)
}

/// Autocovariances of the four moving-average fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentAcfs {
    /// `γ_{r,s}(Ψ) = Σ_{m,n>=0} ψ_{r+m,s+n} ψ_{m,n}`.
    pub psi: CenteredGrid,
    /// `γ_{r,s}(Φ) = Σ_{m,n>=0} φ_{r+m,s+n} φ_{m,n}`.
    pub phi: CenteredGrid,
    /// `γ_h(Ξ)` on a `1 x (2K+1)` grid (column offset is the lag).
    pub xi: CenteredGrid,
    pub omega: CenteredGrid,
}

fn quadrant_acf(c: &[f64], kk: usize) -> CenteredGrid {
    let w = kk + 1;
    let k = kk as isize;
    let mut out = CenteredGrid::square(kk);
    for r in 0..=k {
        for s in -k..=k {
            let mut acc = 0.0;
            let m_hi = k - r;
            let n_lo = (-s).max(0);
            let n_hi = (k - s).min(k);
            for m in 0..=m_hi {
                let row_a = ((r + m) as usize) * w;
                let row_b = (m as usize) * w;
                for n in n_lo..=n_hi {
                    acc += c[row_a + (s + n) as usize] * c[row_b + n as usize];
                }
            }
            out.set(r, s, acc);
            out.set(-r, -s, acc);
        }
    }
    out
}

fn axis_acf(c: &[f64]) -> CenteredGrid {
    let kk = c.len() - 1;
    let mut out = CenteredGrid::zeros(0, kk);
    for h in 0..=kk {
        let g: f64 = (0..=kk - h).map(|k| c[k] * c[k + h]).sum();
        out.set(0, h as isize, g);
        out.set(0, -(h as isize), g);
    }
    out
}

pub fn ma_acf(ma: &MaCoefficients) -> ComponentAcfs {
    ComponentAcfs {
        psi: quadrant_acf(&ma.psi, ma.truncation),
        phi: quadrant_acf(&ma.phi, ma.truncation),
        xi: axis_acf(&ma.xi),
        omega: axis_acf(&ma.omega),
    }
}
