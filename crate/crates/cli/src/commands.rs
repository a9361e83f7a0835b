use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cepstral_core::cepstral::{log_spectrum, MeshRule};
use cepstral_core::diagnostics::{fit_report, morans_i, morans_i_permutation, residuals, InfoCriteria, MoranResult};
use cepstral_core::estimation::{
    fit, mcmc_fit, run_study, simulate_sample, FitOptions, FitResult, McmcConfig, McmcOutput, Method, StudySpec,
};
use cepstral_core::extensions::{extract_signal, SelectionMap, SignalNoiseSpec};
use cepstral_core::lattice::load_csv;
use cepstral_core::{AcfMethod, CepstralGrid, CoefficientMask, DesignSpec, LatticeSample};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::config_hash;
use crate::output::{write_grid, write_json, write_text};
use crate::plot::heatmap;

#[derive(Parser, Debug)]
#[command(name = "cepfield", version, about = "Cepstral random-field models for lattice data")]
pub struct Cli {
    /// Log level (off, error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Fit a model to a lattice CSV and write report, results and residuals.
    Fit(FitArgs),
    /// Draw lattices from a model, one CSV per seed.
    Simulate(SimulateArgs),
    /// Simulate and refit repeatedly; summarise bias, spread and MSE.
    Study(StudyArgs),
    /// Moran's I of raw, OLS and (given a fit) whitened residuals.
    Diagnose(DiagnoseArgs),
    /// Conditional mean and standard error of a signal under additive noise.
    Extract(ExtractArgs),
    /// Heatmap image of a lattice, its whitened residuals or a fitted log spectrum.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model order p.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Fixed-zero coefficients: none, quadrant, separable, or `j:k,j:k,...`.
    #[arg(long, default_value = "none")]
    pub mask: String,
    /// mle, qmle_exact, qmle_approx or bayes.
    #[arg(long, default_value = "mle", value_parser = parse_method)]
    pub method: Method,
    /// Frequency mesh order M for the approximate Whittle criterion and mesh autocovariances.
    #[arg(long, default_value_t = 200)]
    pub mesh_order: usize,
    /// Truncation index K of the moving-average recursions.
    #[arg(long, default_value_t = 25)]
    pub truncation: usize,
    /// Compute model autocovariances by mesh quadrature instead of the recursions.
    #[arg(long)]
    pub mesh_acf: bool,
    /// Use the biased sample autocovariances in the Whittle criteria.
    #[arg(long)]
    pub biased: bool,
    /// Skip standard errors.
    #[arg(long)]
    pub no_se: bool,
}

impl ModelArgs {
    pub fn acf(&self) -> AcfMethod {
        if self.mesh_acf {
            AcfMethod::Mesh { order: self.mesh_order, rule: MeshRule::Trapezoid }
        } else {
            AcfMethod::Exact { truncation: self.truncation }
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            acf: self.acf(),
            mesh_order: self.mesh_order,
            unbiased: !self.biased,
            standard_errors: !self.no_se,
            ..Default::default()
        }
    }

    pub fn coefficient_mask(&self) -> Result<CoefficientMask> {
        parse_mask(&self.mask, self.order)
    }
}

#[derive(Args, Debug, Clone)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 5000)]
    pub mcmc_iter: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// Multiplier of the default random-walk scale.
    #[arg(long, default_value_t = 1.0)]
    pub proposal_scale: f64,
    /// Standard deviation of the zero-mean normal priors.
    #[arg(long, default_value_t = 10.0)]
    pub prior_sd: f64,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Lattice CSV, one row per lattice row.
    #[arg(long)]
    pub data: PathBuf,
    /// none, constant or constant+rowcol.
    #[arg(long, default_value = "constant", value_parser = parse_design)]
    pub design: DesignSpec,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Grid file: `p=<order>` then the coefficient matrix rows.
    #[arg(long)]
    pub grid: PathBuf,
    /// Regression coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value = "constant", value_parser = parse_design)]
    pub design: DesignSpec,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    /// First seed; replicate i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub reps: u64,
    #[arg(long, default_value_t = 25)]
    pub truncation: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct StudyArgs {
    /// Grid file of the true model.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value = "constant", value_parser = parse_design)]
    pub design: DesignSpec,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub reps: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "constant", value_parser = parse_design)]
    pub design: DesignSpec,
    /// `fit.json` written by the fit command.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub truncation: usize,
    /// Random permutations for a permutation p-value (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ExtractArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "constant", value_parser = parse_design)]
    pub design: DesignSpec,
    /// Grid file of the signal field.
    #[arg(long)]
    pub signal: PathBuf,
    /// Grid file of the noise field.
    #[arg(long)]
    pub noise: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    /// Design columns (0-based) whose effects belong to the signal.
    #[arg(long, value_delimiter = ',')]
    pub assign: Vec<usize>,
    /// Unobserved cells as 1-based `row:col`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub missing: Vec<String>,
    #[arg(long, default_value_t = 25)]
    pub truncation: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Lattice,
    Residuals,
    Spectrum,
}

#[derive(Args, Debug, Clone)]
pub struct PlotArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "constant", value_parser = parse_design)]
    pub design: DesignSpec,
    #[arg(long, value_enum, default_value_t = PlotKind::Lattice)]
    pub kind: PlotKind,
    /// `fit.json`, needed for residual and spectrum plots.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub truncation: usize,
    #[arg(long, default_value_t = 100)]
    pub mesh_order: usize,
    /// Pixels per lattice site.
    #[arg(long, default_value_t = 16)]
    pub cell: u32,
    /// Output PNG file.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: cepstral_core::CepstralError| e.to_string())
}

fn parse_design(s: &str) -> std::result::Result<DesignSpec, String> {
    s.parse().map_err(|e: cepstral_core::CepstralError| e.to_string())
}

pub fn parse_mask(spec: &str, order: usize) -> Result<CoefficientMask> {
    match spec.trim() {
        "" | "none" => Ok(CoefficientMask::none(order)),
        "quadrant" => Ok(CoefficientMask::positive_quadrant(order)),
        "separable" => Ok(CoefficientMask::separable(order)),
        list => {
            let positions = list
                .split(',')
                .map(|item| parse_pair(item).with_context(|| format!("mask entry {item:?}")))
                .collect::<Result<Vec<(isize, isize)>>>()?;
            if positions.contains(&(0, 0)) {
                bail!("the (0, 0) coefficient cannot be fixed");
            }
            Ok(CoefficientMask::from_positions(order, &positions)?)
        }
    }
}

fn parse_pair<T: std::str::FromStr>(item: &str) -> Result<(T, T)> {
    let (a, b) = item.trim().split_once(':').ok_or_else(|| anyhow!("expected a:b"))?;
    let a = a.trim().parse().map_err(|_| anyhow!("bad number {a:?}"))?;
    let b = b.trim().parse().map_err(|_| anyhow!("bad number {b:?}"))?;
    Ok((a, b))
}

impl Command {
    /// Canonical settings text; output locations are left out so the same
    /// run written elsewhere hashes identically.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        match &mut c {
            Command::Fit(a) => a.out = PathBuf::new(),
            Command::Simulate(a) => a.out = PathBuf::new(),
            Command::Study(a) => a.out = PathBuf::new(),
            Command::Diagnose(a) => a.out = PathBuf::new(),
            Command::Extract(a) => a.out = PathBuf::new(),
            Command::Plot(a) => a.out = PathBuf::new(),
        }
        format!("{c:?}")
    }

    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }
}

pub fn execute(cmd: Command) -> Result<()> {
    let hash = cmd.hash();
    match cmd {
        Command::Fit(a) => cmd_fit(&a, &hash),
        Command::Simulate(a) => cmd_simulate(&a, &hash),
        Command::Study(a) => cmd_study(&a, &hash),
        Command::Diagnose(a) => cmd_diagnose(&a, &hash),
        Command::Extract(a) => cmd_extract(&a, &hash),
        Command::Plot(a) => cmd_plot(&a),
    }
}

fn load_sample(path: &Path, design: DesignSpec) -> Result<LatticeSample> {
    load_csv(path, design).with_context(|| format!("loading {}", path.display()))
}

fn load_grid(path: &Path) -> Result<CepstralGrid> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CepstralGrid::from_text(&text).with_context(|| format!("parsing grid {}", path.display()))
}

/// Structured fit results as written to `fit.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitRecord {
    pub config_hash: String,
    pub design: DesignSpec,
    pub truncation: usize,
    pub fit: FitResult,
    pub criteria: InfoCriteria,
    pub moran: MoranResult,
    pub acceptance_rate: Option<f64>,
}

fn load_fit(path: &Path) -> Result<FitRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_fit(a: &FitArgs, hash: &str) -> Result<()> {
    let sample = load_sample(&a.data, a.design)?;
    let mask = a.model.coefficient_mask()?;
    let opts = a.model.fit_options();
    let (result, chain): (FitResult, Option<McmcOutput>) = if a.model.method == Method::Bayes {
        let config = McmcConfig {
            n_iter: a.mcmc.mcmc_iter,
            burn_in: a.mcmc.burn_in,
            proposal_scale: a.mcmc.proposal_scale,
            prior_sd: a.mcmc.prior_sd,
            seed: a.seed,
        };
        let (r, out) = mcmc_fit(&sample, a.model.order, &mask, &config, &opts)?;
        (r, Some(out))
    } else {
        (fit(&sample, a.model.order, &mask, a.model.method, &opts)?, None)
    };

    let criteria = InfoCriteria::from_fit(&result);
    let resid = residuals(&result, &sample, opts.acf)?;
    let mut report = fit_report(&result, &criteria, Some(&resid.moran));
    if let Some(c) = &chain {
        let _ = writeln!(report, "\nacceptance  {:.3}", c.acceptance_rate);
    }
    write_text(&a.out.join("report.txt"), hash, &report)?;
    write_text(&a.out.join("theta.txt"), hash, &result.grid()?.to_text())?;
    write_grid(&a.out.join("residuals.csv"), hash, &resid.whitened, resid.n_cols)?;
    if let Some(c) = &chain {
        let mut s = c.labels.join(",");
        s.push('\n');
        for d in &c.draws {
            let row: Vec<String> = d.iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        write_text(&a.out.join("draws.csv"), hash, &s)?;
    }
    let converged = result.converged;
    let record = FitRecord {
        config_hash: hash.to_string(),
        design: a.design,
        truncation: a.model.truncation,
        fit: result,
        criteria,
        moran: resid.moran,
        acceptance_rate: chain.map(|c| c.acceptance_rate),
    };
    write_json(&a.out.join("fit.json"), &record)?;
    print!("{report}");
    if !converged {
        bail!("optimiser did not converge; results written to {}", a.out.display());
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, hash: &str) -> Result<()> {
    if a.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let grid = load_grid(&a.grid)?;
    let acf = AcfMethod::Exact { truncation: a.truncation };
    for i in 0..a.reps {
        let seed = a.seed + i;
        let s = simulate_sample(&grid, &a.beta, a.design, a.rows, a.cols, seed, acf)?;
        write_grid(&a.out.join(format!("sim_{seed:04}.csv")), hash, s.y().as_slice(), a.cols)?;
    }
    println!("wrote {} lattice(s) to {}", a.reps, a.out.display());
    Ok(())
}

fn cmd_study(a: &StudyArgs, hash: &str) -> Result<()> {
    if a.reps < 2 {
        bail!("--reps must be at least 2");
    }
    let truth = load_grid(&a.grid)?;
    let spec = StudySpec {
        truth,
        beta: a.beta.clone(),
        design: a.design,
        n_rows: a.rows,
        n_cols: a.cols,
        order: a.model.order,
        mask: a.model.coefficient_mask()?,
        method: a.model.method,
        seeds: (a.seed..a.seed + a.reps).collect(),
    };
    let opts = FitOptions { standard_errors: false, ..a.model.fit_options() };
    let summary = run_study(&spec, &opts)?;

    let mut table = String::new();
    let _ = writeln!(table, "replicates {} failed {}", summary.replicates, summary.failures.len());
    let _ = writeln!(table, "{:<16} {:>10} {:>10} {:>10} {:>12}", "parameter", "truth", "mean", "sd", "mse");
    for p in &summary.params {
        let _ = writeln!(table, "{:<16} {:>10.3} {:>10.3} {:>10.3} {:>12.3e}", p.label, p.truth, p.mean, p.sd, p.mse);
    }
    for (seed, msg) in &summary.failures {
        let _ = writeln!(table, "failed seed {seed}: {msg}");
    }
    write_text(&a.out.join("study.txt"), hash, &table)?;

    let mut est = String::new();
    let labels: Vec<&str> = summary.params.iter().map(|p| p.label.as_str()).collect();
    let _ = writeln!(est, "seed,{}", labels.join(","));
    for (seed, v) in &summary.estimates {
        let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(est, "{seed},{}", row.join(","));
    }
    write_text(&a.out.join("estimates.csv"), hash, &est)?;
    write_json(&a.out.join("study.json"), &serde_json::json!({ "config_hash": hash, "summary": summary }))?;
    print!("{table}");
    Ok(())
}

fn moran_line(name: &str, m: &MoranResult) -> String {
    format!("{name:<10} I = {:>8.4}  E = {:>8.4}  z = {:>8.3}  p = {:.3e}\n", m.i_stat, m.expected, m.z, m.p_value)
}

fn cmd_diagnose(a: &DiagnoseArgs, hash: &str) -> Result<()> {
    let sample = load_sample(&a.data, a.design)?;
    let (nr, nc) = (sample.n_rows(), sample.n_cols());
    let mut report = String::new();
    let raw = morans_i(sample.y().as_slice(), nr, nc)?;
    report.push_str(&moran_line("raw", &raw));
    if sample.n_regressors() > 0 {
        let ols = sample.residual(&sample.ols()?)?;
        report.push_str(&moran_line("ols", &morans_i(ols.as_slice(), nr, nc)?));
    }
    if a.permutations > 0 {
        let p = morans_i_permutation(sample.y().as_slice(), nr, nc, a.permutations, a.seed)?;
        let _ = writeln!(report, "raw permutation p = {p:.4} ({} permutations)", a.permutations);
    }
    if let Some(path) = &a.fit {
        let record = load_fit(path)?;
        let r = residuals(&record.fit, &sample, AcfMethod::Exact { truncation: a.truncation })?;
        report.push_str(&moran_line("whitened", &r.moran));
        write_grid(&a.out.join("residuals.csv"), hash, &r.whitened, nc)?;
    }
    write_text(&a.out.join("diagnostics.txt"), hash, &report)?;
    print!("{report}");
    Ok(())
}

fn cmd_extract(a: &ExtractArgs, hash: &str) -> Result<()> {
    let sample = load_sample(&a.data, a.design)?;
    let missing = a
        .missing
        .iter()
        .map(|m| parse_pair::<usize>(m).with_context(|| format!("missing cell {m:?}")))
        .collect::<Result<Vec<_>>>()?;
    let sel = SelectionMap::with_missing(sample.n_rows(), sample.n_cols(), &missing)?;
    let spec = SignalNoiseSpec {
        signal: load_grid(&a.signal)?,
        noise: load_grid(&a.noise)?,
        beta: a.beta.clone(),
        mean_assignment: a.assign.clone(),
    };
    let ex = extract_signal(&sample, &spec, &sel, AcfMethod::Exact { truncation: a.truncation })?;
    write_grid(&a.out.join("signal_mean.csv"), hash, &ex.mean, ex.n_cols)?;
    write_grid(&a.out.join("signal_se.csv"), hash, &ex.std_errors(), ex.n_cols)?;
    if let Some(cov) = &ex.covariance {
        let rows: Vec<f64> = (0..cov.nrows()).flat_map(|i| (0..cov.ncols()).map(move |j| cov[(i, j)])).collect();
        write_grid(&a.out.join("signal_cov.csv"), hash, &rows, cov.ncols())?;
    }
    println!("extracted signal on {} x {} lattice, {} observed cells", ex.n_rows, ex.n_cols, sel.count());
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let (values, nr, nc) = match a.kind {
        PlotKind::Lattice => {
            let path = a.data.as_ref().ok_or_else(|| anyhow!("--data is required for a lattice plot"))?;
            let s = load_sample(path, DesignSpec::None)?;
            (s.y().as_slice().to_vec(), s.n_rows(), s.n_cols())
        }
        PlotKind::Residuals => {
            let path = a.data.as_ref().ok_or_else(|| anyhow!("--data is required for a residual plot"))?;
            let fit_path = a.fit.as_ref().ok_or_else(|| anyhow!("--fit is required for a residual plot"))?;
            let record = load_fit(fit_path)?;
            let s = load_sample(path, record.design)?;
            let r = residuals(&record.fit, &s, AcfMethod::Exact { truncation: a.truncation })?;
            (r.whitened, r.n_rows, r.n_cols)
        }
        PlotKind::Spectrum => {
            let fit_path = a.fit.as_ref().ok_or_else(|| anyhow!("--fit is required for a spectrum plot"))?;
            let grid = load_fit(fit_path)?.fit.grid()?;
            let m = a.mesh_order;
            let logf = log_spectrum(&grid, m)?;
            let side = 2 * m + 1;
            let mut v = Vec::with_capacity(side * side);
            for u in -(m as isize)..=m as isize {
                for w in -(m as isize)..=m as isize {
                    v.push(logf.get(u, w));
                }
            }
            (v, side, side)
        }
    };
    let img = heatmap(&values, nr, nc, a.cell)?;
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    crate::output::write_atomic(&a.out, buf.get_ref())?;
    println!("wrote {} ({} x {} pixels)", a.out.display(), img.width(), img.height());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_specs() {
        assert_eq!(parse_mask("none", 2).unwrap().free_count(), 13);
        assert_eq!(parse_mask("separable", 1).unwrap().free_count(), 3);
        let m = parse_mask("1:-1, 0:2", 2).unwrap();
        assert!(m.is_fixed(1, -1) && m.is_fixed(-1, 1) && m.is_fixed(0, -2));
        assert!(parse_mask("0:0", 1).is_err());
        assert!(parse_mask("3:0", 2).is_err());
        assert!(parse_mask("x", 2).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = Cli::try_parse_from(["cepfield", "fit", "--data", "d.csv", "--out", "a"]).unwrap().command;
        let b = Cli::try_parse_from(["cepfield", "fit", "--out", "b", "--data", "d.csv"]).unwrap().command;
        let c = Cli::try_parse_from(["cepfield", "fit", "--data", "d.csv", "--out", "a", "--order", "1"]).unwrap().command;
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn defaults_match_desk_scale() {
        let cmd = Cli::try_parse_from(["cepfield", "fit", "--data", "d.csv", "--out", "o"]).unwrap().command;
        let Command::Fit(a) = cmd else { panic!("not a fit") };
        assert_eq!(a.model.mesh_order, 200);
        assert_eq!(a.model.truncation, 25);
        assert_eq!(a.model.method, Method::Mle);
        assert_eq!(a.design, DesignSpec::Constant);
    }

    #[test]
    fn negative_beta_values_parse() {
        let cmd = Cli::try_parse_from([
            "cepfield", "simulate", "--grid", "g", "--beta", "7.6,-0.035,-0.059", "--rows", "2", "--cols", "2", "--out", "o",
        ])
        .unwrap()
        .command;
        let Command::Simulate(a) = cmd else { panic!("not simulate") };
        assert_eq!(a.beta, vec![7.6, -0.035, -0.059]);
    }
}
