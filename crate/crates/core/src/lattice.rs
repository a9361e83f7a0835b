//! Lattice samples: storage, lexicographic vectorisation, regression design,
//! sample autocovariances and CSV ingestion.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cepstral::{trig_poly_on_mesh, AcfTable, FrequencyGrid};
use crate::error::{CepstralError, Result};
use crate::grid::CenteredGrid;

/// Which regressors accompany the response.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignSpec {
    /// Zero-mean field, no regressors.
    None,
    /// Intercept only.
    #[default]
    Constant,
    /// Intercept plus the 1-based row and column indices.
    ConstantRowCol,
}

impl DesignSpec {
    pub fn names(self) -> Vec<String> {
        match self {
            DesignSpec::None => vec![],
            DesignSpec::Constant => vec!["intercept".into()],
            DesignSpec::ConstantRowCol => vec!["intercept".into(), "row".into(), "col".into()],
        }
    }

    pub fn columns(self) -> usize {
        self.names().len()
    }

    /// The design matrix for an `n_rows x n_cols` lattice, rows in
    /// lexicographic order.
    pub fn matrix(self, n_rows: usize, n_cols: usize) -> DMatrix<f64> {
        let n = n_rows * n_cols;
        DMatrix::from_fn(n, self.columns(), |k, l| {
            let (r, s) = (k / n_cols + 1, k % n_cols + 1);
            match l {
                0 => 1.0,
                1 => r as f64,
                _ => s as f64,
            }
        })
    }
}

impl std::str::FromStr for DesignSpec {
    type Err = CepstralError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(DesignSpec::None),
            "constant" | "const" => Ok(DesignSpec::Constant),
            "constant+rowcol" | "rowcol" | "trend" => Ok(DesignSpec::ConstantRowCol),
            other => Err(CepstralError::InvalidArgument(format!("unknown design `{other}`"))),
        }
    }
}

/// 1-based `(r, s)` to 0-based vector position, `k = N2 (r-1) + s` minus one.
pub fn lex_index(r: usize, s: usize, n_cols: usize) -> usize {
    n_cols * (r - 1) + s - 1
}

/// Row-major flattening of a grid given as rows.
pub fn vectorize(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

pub fn devectorize(y: &[f64], n_cols: usize) -> Vec<Vec<f64>> {
    y.chunks(n_cols).map(<[f64]>::to_vec).collect()
}

/// An observed field on an `n_rows x n_cols` lattice with its design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSample {
    n_rows: usize,
    n_cols: usize,
    y: DVector<f64>,
    design: DMatrix<f64>,
    names: Vec<String>,
}

impl LatticeSample {
    /// `y` is in lexicographic order. Fails unless the design has full
    /// column rank.
    pub fn new(n_rows: usize, n_cols: usize, y: Vec<f64>, design: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let n = n_rows * n_cols;
        if n == 0 {
            return Err(CepstralError::InvalidArgument("empty lattice".into()));
        }
        if y.len() != n {
            return Err(CepstralError::Dimension { expected: n, got: y.len() });
        }
        if design.nrows() != n {
            return Err(CepstralError::Dimension { expected: n, got: design.nrows() });
        }
        if names.len() != design.ncols() {
            return Err(CepstralError::Dimension { expected: design.ncols(), got: names.len() });
        }
        if design.ncols() > 0 && column_rank(&design) < design.ncols() {
            return Err(CepstralError::RankDeficient);
        }
        Ok(Self { n_rows, n_cols, y: DVector::from_vec(y), design, names })
    }

    pub fn with_design(n_rows: usize, n_cols: usize, y: Vec<f64>, spec: DesignSpec) -> Result<Self> {
        Self::new(n_rows, n_cols, y, spec.matrix(n_rows, n_cols), spec.names())
    }

    pub fn from_rows(rows: &[Vec<f64>], spec: DesignSpec) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(CepstralError::Load { row: i + 1, col: rows[i].len(), msg: "ragged row".into() });
        }
        Self::with_design(n_rows, n_cols, vectorize(rows), spec)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn len(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_regressors(&self) -> usize {
        self.design.ncols()
    }

    /// Value at 1-based `(r, s)`.
    pub fn at(&self, r: usize, s: usize) -> f64 {
        self.y[lex_index(r, s, self.n_cols)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        devectorize(self.y.as_slice(), self.n_cols)
    }

    /// Same design, different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.len() {
            return Err(CepstralError::Dimension { expected: self.len(), got: y.len() });
        }
        Ok(Self { y: DVector::from_vec(y), ..self.clone() })
    }

    /// The lattice with rows and columns exchanged; design rows move with
    /// their cells.
    pub fn transposed(&self) -> Self {
        let (nr, nc) = (self.n_rows, self.n_cols);
        let perm = |k: usize| {
            let (r, s) = (k / nr, k % nr);
            s * nc + r
        };
        let y = DVector::from_fn(nr * nc, |k, _| self.y[perm(k)]);
        let design = DMatrix::from_fn(nr * nc, self.design.ncols(), |k, l| self.design[(perm(k), l)]);
        Self { n_rows: nc, n_cols: nr, y, design, names: self.names.clone() }
    }

    pub fn mean(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        if beta.len() != self.n_regressors() {
            return Err(CepstralError::Dimension { expected: self.n_regressors(), got: beta.len() });
        }
        if beta.is_empty() {
            return Ok(DVector::zeros(self.len()));
        }
        Ok(&self.design * beta)
    }

    /// `Y - X̃β`.
    pub fn residual(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.y - self.mean(beta)?)
    }

    /// Ordinary least squares coefficients.
    pub fn ols(&self) -> Result<DVector<f64>> {
        if self.n_regressors() == 0 {
            return Ok(DVector::zeros(0));
        }
        let xtx = self.design.tr_mul(&self.design);
        let xty = self.design.tr_mul(&self.y);
        xtx.cholesky().map(|c| c.solve(&xty)).ok_or(CepstralError::SingularDesign)
    }
}

fn column_rank(x: &DMatrix<f64>) -> usize {
    let sv = x.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    let tol = top * (x.nrows().max(x.ncols()) as f64) * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Biased and divisor-corrected sample autocovariances over the full lag
/// window `|h| < N1`, `|k| < N2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleAcf {
    pub biased: AcfTable,
    pub unbiased: AcfTable,
    pub beta_used: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
}

impl SampleAcf {
    pub fn table(&self, unbiased: bool) -> &AcfTable {
        if unbiased {
            &self.unbiased
        } else {
            &self.biased
        }
    }
}

/// Autocovariances of the residual field `W = Y - X̃β`:
/// `γ_{h,k}(I) = (N1 N2)^{-1} Σ W_{r,s} W_{r+h,s+k}`, and the unbiased
/// version scaled by `N1 N2 / ((N1-|h|)(N2-|k|))`.
pub fn sample_acf(sample: &LatticeSample, beta: &DVector<f64>) -> Result<SampleAcf> {
    let w = sample.residual(beta)?;
    let (nr, nc) = (sample.n_rows, sample.n_cols);
    let (hr, hc) = (nr - 1, nc - 1);
    let n = (nr * nc) as f64;
    let mut biased = CenteredGrid::zeros(hr, hc);
    let mut unbiased = CenteredGrid::zeros(hr, hc);
    for h in 0..nr {
        for k in -(hc as isize)..=(hc as isize) {
            let (s_lo, s_hi) = if k >= 0 { (0, nc - k as usize) } else { ((-k) as usize, nc) };
            let mut acc = 0.0;
            for r in 0..nr - h {
                let a = &w.as_slice()[r * nc..(r + 1) * nc];
                let b = &w.as_slice()[(r + h) * nc..(r + h + 1) * nc];
                for s in s_lo..s_hi {
                    acc += a[s] * b[(s as isize + k) as usize];
                }
            }
            let g = acc / n;
            let overlap = ((nr - h) * (nc - k.unsigned_abs())) as f64;
            let hh = h as isize;
            biased.set(hh, k, g);
            biased.set(-hh, -k, g);
            unbiased.set(hh, k, acc / overlap);
            unbiased.set(-hh, -k, acc / overlap);
        }
    }
    Ok(SampleAcf {
        biased: AcfTable::new(biased),
        unbiased: AcfTable::new(unbiased),
        beta_used: beta.iter().copied().collect(),
        n_rows: nr,
        n_cols: nc,
    })
}

/// Fourier transform `Σ γ̂_{h,k} e^{-i(hλ1 + kλ2)}` of the unbiased sample
/// acf on the mesh of order `m`. Values may be negative.
pub fn periodogram_ft(acf: &SampleAcf, m: usize) -> Result<FrequencyGrid> {
    acf_transform(&acf.unbiased, m)
}

/// Fourier transform of any point-symmetric autocovariance table.
pub fn acf_transform(acf: &AcfTable, m: usize) -> Result<FrequencyGrid> {
    if m == 0 {
        return Err(CepstralError::InvalidArgument("mesh order must be positive".into()));
    }
    FrequencyGrid::new(trig_poly_on_mesh(acf.grid(), m))
}

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut first = true;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, usize>> =
            rec.iter().enumerate().map(|(j, c)| c.parse::<f64>().map_err(|_| j + 1)).collect();
        if first && parsed.iter().all(|v| v.is_err()) {
            // header row
            first = false;
            continue;
        }
        first = false;
        let mut row = Vec::with_capacity(parsed.len());
        for v in parsed {
            match v {
                Ok(x) if x.is_finite() => row.push(x),
                Ok(_) => {
                    return Err(CepstralError::Load { row: line, col: row.len() + 1, msg: "non-finite value".into() })
                }
                Err(col) => {
                    return Err(CepstralError::Load {
                        row: line,
                        col,
                        msg: format!("non-numeric cell `{}`", rec.get(col - 1).unwrap_or("")),
                    })
                }
            }
        }
        if let Some(prev) = rows.first().map(Vec::len) {
            if row.len() != prev {
                return Err(CepstralError::Load {
                    row: line,
                    col: row.len().min(prev) + 1,
                    msg: format!("ragged row: {} cells, expected {prev}", row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CepstralError::Load { row: 0, col: 0, msg: "empty file".into() });
    }
    Ok(rows)
}

/// Reads a rectangular numeric CSV (rows are lattice rows). A first row with
/// no numeric cells is treated as a header.
pub fn load_csv(path: impl AsRef<Path>, spec: DesignSpec) -> Result<LatticeSample> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_csv(&text, spec)
}

pub fn parse_csv(text: &str, spec: DesignSpec) -> Result<LatticeSample> {
    LatticeSample::from_rows(&parse_rows(text)?, spec)
}
