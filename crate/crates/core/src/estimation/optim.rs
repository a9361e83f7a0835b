//! Quasi-Newton minimisation with central-difference derivatives.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the max-norm of the gradient falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Relative finite-difference step, `h = step_rel * max(1, |x|)`.
    pub step_rel: f64,
    /// Largest max-norm step taken before the line search.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-6, max_iter: 500, step_rel: 1e-5, max_step: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Final inverse-Hessian approximation; pass back in to warm-start.
    pub inv_hessian: DMatrix<f64>,
}

impl BfgsResult {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Evaluates `f`, mapping errors and non-finite values to `+∞` so that line
/// searches back away from inadmissible points.
fn eval<F: FnMut(&[f64]) -> Result<f64>>(f: &mut F, x: &[f64], count: &mut usize) -> f64 {
    *count += 1;
    match f(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

fn fd_step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient.
pub fn central_gradient<F: FnMut(&[f64]) -> Result<f64>>(f: &mut F, x: &[f64], step_rel: f64) -> Result<Vec<f64>> {
    let mut xp = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = fd_step(x[i], step_rel);
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

/// Central-difference Hessian, `2 n^2` evaluations.
pub fn numerical_hessian<F: FnMut(&[f64]) -> Result<f64>>(f: &mut F, x: &[f64], step_rel: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let f0 = f(x)?;
    let h: Vec<f64> = x.iter().map(|&v| fd_step(v, step_rel)).collect();
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let fp = f(&xp)?;
        xp[i] = x[i] - h[i];
        let fm = f(&xp)?;
        xp[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Minimises `f` from `x0` by BFGS with Armijo backtracking. `inv_h0`, when
/// given, seeds the inverse-Hessian approximation.
pub fn minimize<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x0: &[f64],
    inv_h0: Option<DMatrix<f64>>,
    opts: &BfgsOptions,
) -> Result<BfgsResult> {
    let n = x0.len();
    let mut evals = 0;
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x0)?;
    evals += 1;
    let mut wrapped = |p: &[f64]| -> Result<f64> { f(p) };
    let mut g = DVector::from_vec(central_gradient(&mut wrapped, x.as_slice(), opts.step_rel)?);
    evals += 2 * n;
    let warm = inv_h0.as_ref().is_some_and(|h| h.nrows() == n && h.ncols() == n);
    let mut hinv = if warm { inv_h0.unwrap() } else { DMatrix::identity(n, n) };
    let mut scaled = warm;
    let mut iterations = 0;
    let mut converged = n == 0 || g.amax() < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut d = -(&hinv * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 || !slope.is_finite() {
            // not a descent direction: restart from steepest descent
            hinv = DMatrix::identity(n, n);
            scaled = false;
            d = -g.clone();
            slope = g.dot(&d);
        }
        let dmax = d.amax();
        if dmax > opts.max_step {
            d *= opts.max_step / dmax;
            slope *= opts.max_step / dmax;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial = &x + t * &d;
            let ft = eval(&mut wrapped, trial.as_slice(), &mut evals);
            if ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            if scaled {
                // retry once from a fresh steepest-descent model
                hinv = DMatrix::identity(n, n);
                scaled = false;
                continue;
            }
            break;
        };
        let gn = DVector::from_vec(central_gradient(&mut wrapped, xn.as_slice(), opts.step_rel)?);
        evals += 2 * n;
        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                hinv = DMatrix::identity(n, n) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(s hy' + hy s') + (ρ² y'Hy + ρ) s s'
            hinv -= rho * (&s * hy.transpose() + &hy * s.transpose());
            hinv += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        let stalled = (fx - fnew).abs() <= 1e-15 * (1.0 + fx.abs()) && s.amax() <= 1e-12;
        x = xn;
        fx = fnew;
        g = gn;
        converged = g.amax() < opts.grad_tol;
        if stalled {
            break;
        }
    }

    Ok(BfgsResult {
        x: x.as_slice().to_vec(),
        f: fx,
        grad: g.as_slice().to_vec(),
        iterations,
        evaluations: evals,
        converged,
        inv_hessian: hinv,
    })
}
