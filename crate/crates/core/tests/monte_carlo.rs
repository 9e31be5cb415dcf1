//! Ensemble-level checks of the sampler's second-order law against
//! normal-theory Monte Carlo bands, plus determinism contracts. All tests
//! use fixed seeds, so outcomes are reproducible.

use std::sync::Arc;

use noncirc::covariance::{
    complex_to_bivariate, improper_fgn_spec, CovarianceSource, CovarianceSpec, FgnParams,
};
use noncirc::embedding::NegEigPolicy;
use noncirc::fft::FftEngine;
use noncirc::sampler::{simulate_batch, PreparedSampler};
use noncirc::validation::{
    covariance_entry_sigma, estimate_autocovariance, estimate_complementary,
    theoretical_covariance, CholeskyOracle, CovarianceAccumulator, CrossCovarianceAccumulator, Mat,
};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn white_noise_spec(n: usize) -> CovarianceSpec<f64> {
    let mut s = vec![Complex::new(2.0, 0.0)];
    s.extend(std::iter::repeat_n(Complex::new(0.0, 0.0), n));
    CovarianceSpec::new(s, vec![Complex::new(0.0, 0.0); n + 1]).unwrap()
}

fn assert_within_bands(empirical: &Mat<f64>, theory: &Mat<f64>, replicates: usize, label: &str) {
    let dim = theory.rows();
    for i in 0..dim {
        for j in 0..dim {
            let sigma = covariance_entry_sigma(theory, i, j, replicates);
            let dev = (empirical.get(i, j) - theory.get(i, j)).abs();
            assert!(
                dev <= 3.0 * sigma,
                "{label}: entry ({i},{j}) deviates {dev:.5} > 3 sigma = {:.5}",
                3.0 * sigma
            );
        }
    }
}

#[test]
fn white_noise_ensemble_matches_the_target_law() {
    let n = 8;
    let replicates = 100_000;
    let spec = white_noise_spec(n);
    let prepared = PreparedSampler::prepare(
        &CovarianceSource::Fixed(spec.clone()),
        n,
        n,
        NegEigPolicy::strict(),
        Arc::new(FftEngine::new()),
    )
    .unwrap();
    let mut acc = CovarianceAccumulator::new(n);
    for run in 0..replicates {
        let pair = prepared.synthesize(314, run as u64);
        acc.push(&pair.z1);
    }
    let empirical = acc.finish();
    let theory = theoretical_covariance(&complex_to_bivariate(&spec), n).unwrap();
    assert_within_bands(&empirical, &theory, replicates, "white noise z1");
}

#[test]
fn z1_and_z2_are_ensemble_independent() {
    let n = 8;
    let runs = 100_000;
    let params = FgnParams::unit_variance(0.75f64, 0.5).unwrap();
    let prepared = PreparedSampler::prepare(
        &CovarianceSource::Fgn(params),
        n,
        n,
        NegEigPolicy::strict(),
        Arc::new(FftEngine::new()),
    )
    .unwrap();
    let mut cross = CrossCovarianceAccumulator::new(n);
    for run in 0..runs {
        let pair = prepared.synthesize(2718, run as u64);
        cross.push(&pair.z1, &pair.z2);
    }
    let empirical = cross.finish();
    let theory =
        theoretical_covariance(&complex_to_bivariate(&improper_fgn_spec(&params, n)), n).unwrap();
    // Cross covariance is exactly zero; each entry's estimator variance is
    // C_ii C_jj / R for independent vectors.
    for i in 0..2 * n {
        for j in 0..2 * n {
            let sigma = (theory.get(i, i) * theory.get(j, j) / runs as f64).sqrt();
            let dev = empirical.get(i, j).abs();
            assert!(
                dev <= 3.0 * sigma,
                "cross entry ({i},{j}) deviates {dev:.5} > {:.5}",
                3.0 * sigma
            );
        }
    }
}

#[test]
fn estimators_are_unbiased_across_replicates() {
    let n = 64;
    let replicates = 10_000;
    let max_lag = 10;
    let params = FgnParams::unit_variance(0.75f64, 0.5).unwrap();
    let spec = improper_fgn_spec(&params, n);
    let batch = simulate_batch(
        &CovarianceSource::Fgn(params),
        n,
        replicates,
        NegEigPolicy::strict(),
        99,
    )
    .unwrap();

    let mut s_samples = vec![Vec::with_capacity(replicates); max_lag + 1];
    let mut r_samples = vec![Vec::with_capacity(replicates); max_lag + 1];
    for z in &batch.sequences {
        let s = estimate_autocovariance(z, max_lag).unwrap();
        let r = estimate_complementary(z, max_lag).unwrap();
        for tau in 0..=max_lag {
            s_samples[tau].push(s[tau]);
            r_samples[tau].push(r[tau]);
        }
    }

    let check =
        |samples: &[Vec<Complex<f64>>], theory: &dyn Fn(usize) -> Complex<f64>, label: &str| {
            for (tau, lag_samples) in samples.iter().enumerate() {
                let count = lag_samples.len() as f64;
                let mean = lag_samples.iter().sum::<Complex<f64>>() / count;
                let var_re = lag_samples
                    .iter()
                    .map(|v| (v.re - mean.re).powi(2))
                    .sum::<f64>()
                    / (count - 1.0);
                let var_im = lag_samples
                    .iter()
                    .map(|v| (v.im - mean.im).powi(2))
                    .sum::<f64>()
                    / (count - 1.0);
                let want = theory(tau);
                let dev_re = (mean.re - want.re).abs();
                let dev_im = (mean.im - want.im).abs();
                let band_re = 3.0 * (var_re / count).sqrt();
                let band_im = 3.0 * (var_im / count).sqrt();
                assert!(
                    dev_re <= band_re && dev_im <= band_im,
                    "{label} lag {tau}: mean {mean} vs {want} (bands {band_re:.5}, {band_im:.5})"
                );
            }
        };
    check(&s_samples, &|tau| spec.s_zz()[tau], "autocovariance");
    check(&r_samples, &|tau| spec.r_zz()[tau], "complementary");
}

#[test]
fn cholesky_oracle_ensemble_matches_theory() {
    let n = 8;
    let replicates = 100_000;
    let params = FgnParams::unit_variance(0.75f64, 0.5).unwrap();
    let spec = improper_fgn_spec(&params, n);
    let oracle = CholeskyOracle::new(&spec, n).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(1618);
    let mut acc = CovarianceAccumulator::new(n);
    for _ in 0..replicates {
        acc.push(&oracle.draw(&mut rng));
    }
    let empirical = acc.finish();
    let theory = theoretical_covariance(&complex_to_bivariate(&spec), n).unwrap();
    assert_within_bands(&empirical, &theory, replicates, "cholesky oracle");
}

#[test]
fn rms_halves_when_replicates_quadruple() {
    // The RMS of the averaged estimators follows 1/sqrt(R); a single
    // instance is noisy, so the law is checked on the mean over twelve
    // independent repetitions of each replicate count.
    let params = FgnParams::unit_variance(0.75f64, 0.5).unwrap();
    let repetitions = 12;
    let mut mean_small = 0.0;
    let mut mean_large = 0.0;
    for rep in 0..repetitions {
        let small =
            noncirc::validation::rms_experiment(&params, &[64], 250, NegEigPolicy::strict(), rep)
                .unwrap();
        let large = noncirc::validation::rms_experiment(
            &params,
            &[64],
            1000,
            NegEigPolicy::strict(),
            1000 + rep,
        )
        .unwrap();
        mean_small += small[0].rms_s;
        mean_large += large[0].rms_s;
    }
    let ratio = mean_large / mean_small;
    assert!(
        (0.375..=0.625).contains(&ratio),
        "quadrupling replicates scaled mean RMS by {ratio:.3}, expected ~0.5"
    );
}

#[test]
fn batch_results_do_not_depend_on_worker_count() {
    let params = FgnParams::unit_variance(0.6f64, 0.3).unwrap();
    let source = CovarianceSource::Fgn(params);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_batch(&source, 32, 9, NegEigPolicy::strict(), 7).unwrap())
    };
    let serial = run(1);
    let parallel = run(4);
    assert_eq!(serial.sequences, parallel.sequences);
}
