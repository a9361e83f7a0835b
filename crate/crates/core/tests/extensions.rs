use cepstral_core::extensions::{extract_signal, SelectionMap, SignalNoiseSpec};
use cepstral_core::objectives::lattice_lag;
use cepstral_core::{AcfMethod, BlockToeplitzCov, CepstralGrid, DesignSpec, LatticeSample};
use nalgebra::DVector;

fn grid(order: usize, entries: &[((isize, isize), f64)]) -> CepstralGrid {
    let mut g = CepstralGrid::zeros(order);
    for &((j, k), v) in entries {
        g.set(j, k, v).unwrap();
    }
    g
}

// Averaging the conditional mean over draws of the data recovers the prior
// signal mean.
#[test]
fn conditional_means_average_to_prior_mean() {
    let (nr, nc) = (3, 3);
    let n = nr * nc;
    let signal = grid(1, &[((0, 0), 0.3), ((1, 0), 0.4), ((0, 1), 0.2)]);
    let noise = grid(1, &[((0, 0), -0.5), ((1, 1), 0.2)]);
    let beta = vec![1.5, 0.4, -0.3];
    let spec = SignalNoiseSpec { signal: signal.clone(), noise: noise.clone(), beta: beta.clone(), mean_assignment: vec![0, 1] };
    let sel = SelectionMap::with_missing(nr, nc, &[(2, 2)]).unwrap();

    let lag = lattice_lag(nr, nc);
    let cov_s = BlockToeplitzCov::factored(&AcfMethod::default().compute(&signal, lag).unwrap(), nr, nc).unwrap();
    let cov_n = BlockToeplitzCov::factored(&AcfMethod::default().compute(&noise, lag).unwrap(), nr, nc).unwrap();
    let x = DesignSpec::ConstantRowCol.matrix(nr, nc);
    let mu = &x * DVector::from_vec(beta.clone());
    let signal_mean = &x * DVector::from_vec(vec![beta[0], beta[1], 0.0]);
    let zero = DVector::zeros(n);

    let draws = 10_000u64;
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let template = LatticeSample::with_design(nr, nc, vec![0.0; n], DesignSpec::ConstantRowCol).unwrap();
    for seed in 0..draws {
        let y = &mu + cov_s.simulate(&zero, 2 * seed).unwrap() + cov_n.simulate(&zero, 2 * seed + 1).unwrap();
        let sample = template.with_response(y.as_slice().to_vec()).unwrap();
        let ex = extract_signal(&sample, &spec, &sel, AcfMethod::default()).unwrap();
        for i in 0..n {
            sum[i] += ex.mean[i];
            sum_sq[i] += ex.mean[i] * ex.mean[i];
        }
    }
    let d = draws as f64;
    for i in 0..n {
        let mean = sum[i] / d;
        let sd = (sum_sq[i] / d - mean * mean).max(0.0).sqrt();
        let bound = 4.0 * sd / d.sqrt() + 1e-12;
        assert!((mean - signal_mean[i]).abs() < bound, "cell {i}: {mean} vs {}", signal_mean[i]);
    }
}

#[test]
fn large_lattices_return_only_the_diagonal() {
    let (nr, nc) = (33, 2);
    let y: Vec<f64> = (0..nr * nc).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
    let sample = LatticeSample::with_design(nr, nc, y, DesignSpec::Constant).unwrap();
    let spec = SignalNoiseSpec {
        signal: grid(1, &[((1, 0), 0.3)]),
        noise: CepstralGrid::white(0, -1.0),
        beta: vec![0.0],
        mean_assignment: vec![0],
    };
    let ex = extract_signal(&sample, &spec, &SelectionMap::all(nr, nc), AcfMethod::default()).unwrap();
    assert!(ex.covariance.is_none());
    assert_eq!(ex.variance.len(), nr * nc);
    assert!(ex.std_errors().iter().all(|s| *s > 0.0));
}
