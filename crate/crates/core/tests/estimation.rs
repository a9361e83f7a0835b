use cepstral_core::diagnostics::{recorrelate, residuals, morans_i};
use cepstral_core::estimation::{backward_delete, fit, lr_test, simulate_sample, FitOptions, Method};
use cepstral_core::objectives::{lattice_lag, model_covariance};
use cepstral_core::{AcfMethod, BlockToeplitzCov, CepstralError, CepstralGrid, CoefficientMask, DesignSpec};
use nalgebra::DVector;

fn grid(order: usize, entries: &[((isize, isize), f64)]) -> CepstralGrid {
    let mut g = CepstralGrid::zeros(order);
    for &((j, k), v) in entries {
        g.set(j, k, v).unwrap();
    }
    g
}

fn truth() -> CepstralGrid {
    grid(1, &[((0, 0), 0.2), ((1, 0), 0.35), ((0, 1), 0.25), ((1, 1), 0.1), ((-1, 1), -0.15)])
}

fn quick() -> FitOptions {
    FitOptions { standard_errors: false, ..Default::default() }
}

#[test]
fn mle_and_whittle_estimates_converge_together() {
    let g = truth();
    let mask = CoefficientMask::none(1);
    let mut gaps = Vec::new();
    for side in [12, 24] {
        let mut total = 0.0;
        for seed in 0..3 {
            let s = simulate_sample(&g, &[1.0], DesignSpec::Constant, side, side, seed, AcfMethod::default()).unwrap();
            let a = fit(&s, 1, &mask, Method::Mle, &quick()).unwrap();
            let b = fit(&s, 1, &mask, Method::QmleExact, &quick()).unwrap();
            let gap = a
                .theta_hat
                .values
                .iter()
                .zip(&b.theta_hat.values)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            total += gap;
        }
        gaps.push(total / 3.0);
    }
    assert!(gaps[1] < gaps[0], "mean max gap {:?}", gaps);
}

#[test]
fn whittle_information_is_nearly_diagonal() {
    let s = simulate_sample(&truth(), &[0.0], DesignSpec::Constant, 24, 24, 5, AcfMethod::default()).unwrap();
    let f = fit(&s, 1, &CoefficientMask::none(1), Method::QmleExact, &FitOptions::default()).unwrap();
    let h = f.hessian.as_ref().unwrap();
    let k = f.theta_hat.len();
    let n = s.len() as f64;
    let origin = f.positions.iter().position(|&p| p == (0, 0)).unwrap();
    for i in 0..k {
        let want = if i == origin { 0.5 } else { 1.0 };
        assert!((h[i][i] / n - want).abs() < 0.2, "diagonal {i}: {}", h[i][i] / n);
        for j in 0..k {
            if i != j {
                assert!((h[i][j] / n).abs() <= 0.2, "off-diagonal ({i},{j}): {}", h[i][j] / n);
            }
        }
    }
}

#[test]
fn likelihood_ratio_detects_correlation() {
    let s = simulate_sample(&truth(), &[1.0], DesignSpec::Constant, 12, 12, 2, AcfMethod::default()).unwrap();
    let full = fit(&s, 1, &CoefficientMask::none(1), Method::Mle, &quick()).unwrap();
    let white = fit(&s, 0, &CoefficientMask::none(0), Method::Mle, &quick()).unwrap();
    let t = lr_test(&full, &white).unwrap();
    assert_eq!(t.dof, 4);
    assert!(t.p_value < 1e-3, "{t:?}");
    assert!(matches!(lr_test(&white, &full), Err(CepstralError::NotNested(_))));

    let q = fit(&s, 0, &CoefficientMask::none(0), Method::QmleExact, &quick()).unwrap();
    assert!(matches!(lr_test(&full, &q), Err(CepstralError::NotNested(_))));
    let same = lr_test(&full, &full).unwrap();
    assert_eq!((same.dof, same.p_value), (0, 1.0));
}

#[test]
fn likelihood_ratio_on_white_noise() {
    let s = simulate_sample(&CepstralGrid::zeros(1), &[0.5], DesignSpec::Constant, 10, 10, 9, AcfMethod::default()).unwrap();
    let full = fit(&s, 1, &CoefficientMask::separable(1), Method::Mle, &quick()).unwrap();
    let white = fit(&s, 0, &CoefficientMask::none(0), Method::Mle, &quick()).unwrap();
    let t = lr_test(&full, &white).unwrap();
    assert_eq!(t.dof, 2);
    assert!(t.statistic >= 0.0 && t.p_value > 0.01, "{t:?}");
}

#[test]
fn backward_deletion_keeps_strong_terms() {
    let g = grid(1, &[((0, 0), 0.0), ((1, 0), 0.6)]);
    let s = simulate_sample(&g, &[1.0], DesignSpec::Constant, 14, 14, 4, AcfMethod::default()).unwrap();
    let f = fit(&s, 1, &CoefficientMask::none(1), Method::Mle, &FitOptions::default()).unwrap();
    let (refit, removed) = backward_delete(&s, &f, &FitOptions::default()).unwrap();
    assert!(!removed.contains(&(0, 0)));
    assert!(!removed.contains(&(1, 0)));
    assert!(!removed.is_empty());
    assert_eq!(refit.theta_hat.len(), f.theta_hat.len() - removed.len());
    assert!(refit.neg_log_lik >= f.neg_log_lik - 1e-6);

    let no_se = fit(&s, 1, &CoefficientMask::none(1), Method::Mle, &quick()).unwrap();
    assert!(backward_delete(&s, &no_se, &quick()).is_err());
}

#[test]
fn whitening_round_trip() {
    let s = simulate_sample(&truth(), &[3.0, 0.1, -0.2], DesignSpec::ConstantRowCol, 7, 9, 1, AcfMethod::default()).unwrap();
    let f = fit(&s, 1, &CoefficientMask::none(1), Method::Mle, &quick()).unwrap();
    let r = residuals(&f, &s, AcfMethod::default()).unwrap();
    let back = recorrelate(&f, &s, &r.whitened, AcfMethod::default()).unwrap();
    let err = (back - s.y()).amax();
    assert!(err < 1e-10, "{err}");
}

#[test]
fn whitened_simulations_pass_moran() {
    let g = truth();
    let (nr, nc) = (10, 12);
    let acf = AcfMethod::default().compute(&g, lattice_lag(nr, nc)).unwrap();
    let cov = BlockToeplitzCov::factored(&acf, nr, nc).unwrap();
    let zero = DVector::zeros(nr * nc);
    let mut pass = 0;
    for seed in 0..200 {
        let y = cov.simulate(&zero, seed).unwrap();
        let w = cov.whiten(&y).unwrap();
        if morans_i(w.as_slice(), nr, nc).unwrap().p_value > 0.01 {
            pass += 1;
        }
    }
    assert!(pass >= 198, "{pass}/200");
}

#[test]
fn bayes_method_reports_posterior_means() {
    let s = simulate_sample(&CepstralGrid::zeros(0), &[2.0], DesignSpec::Constant, 6, 6, 3, AcfMethod::default()).unwrap();
    let opts = FitOptions::default();
    let b = fit(&s, 0, &CoefficientMask::none(0), Method::Bayes, &opts).unwrap();
    let m = fit(&s, 0, &CoefficientMask::none(0), Method::Mle, &opts).unwrap();
    assert_eq!(b.method, Method::Bayes);
    let sd = b.se_beta.as_ref().unwrap()[0];
    assert!((b.beta_hat[0] - m.beta_hat[0]).abs() < 2.0 * sd);
    assert!(model_covariance(&b.grid().unwrap(), 6, 6, AcfMethod::default()).is_ok());
}
