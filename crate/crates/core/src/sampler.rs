//! Synthesis of sample pairs from the embedded spectra: Gaussian inputs,
//! per-frequency 2x2 correlation factors, eigenvalue scaling, inverse
//! synthesis transform, and extraction of the two output sequences.
//!
//! One synthesis run consumes 4 real Gaussian sequences of length 2m and
//! costs 5 FFTs of length 2m in total: 3 for the eigen-spectra and 2 for the
//! frequency-to-time synthesis.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::covariance::{BivariateCovariance, CovarianceError, CovarianceSource, CovarianceSpec};
use crate::embedding::{
    apply_policy, build_first_rows, eigen_spectrum, EigenSpectrum, EmbeddingError, NegEigPolicy,
};
use crate::fft::FftEngine;
use crate::scalar::Scalar;

/// Relative slack on `|rho|^2 <= 1` before the 2x2 spectral matrix is
/// treated as indefinite and eigen-clipped.
const RHO_ROUNDOFF_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(
        "eigenvalue {value:.6e} at index {index} is negative; apply a policy before factoring"
    )]
    NegativeLambda { index: usize, value: f64 },
    #[error("batch size must be at least 1")]
    EmptyBatch,
}

/// Four i.i.d. Gaussian input sequences with mean 0 and variance 1/2, each
/// of length 2m.
#[derive(Debug, Clone)]
pub struct GaussianInputs<T: Scalar> {
    w1: Vec<T>,
    w2: Vec<T>,
    w3: Vec<T>,
    w4: Vec<T>,
}

impl<T: Scalar> GaussianInputs<T> {
    /// Assembles inputs from raw sequences (used by the deterministic
    /// covariance oracle, which probes the linear pipeline with unit
    /// vectors).
    pub fn from_parts(w1: Vec<T>, w2: Vec<T>, w3: Vec<T>, w4: Vec<T>) -> Self {
        assert!(
            w1.len() == w2.len() && w2.len() == w3.len() && w3.len() == w4.len(),
            "input streams must have equal length"
        );
        Self { w1, w2, w3, w4 }
    }

    pub fn len(&self) -> usize {
        self.w1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w1.is_empty()
    }

    pub fn streams(&self) -> [&[T]; 4] {
        [&self.w1, &self.w2, &self.w3, &self.w4]
    }
}

fn draw_stream<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, std_dev: T) -> Vec<T> {
    (0..len)
        .map(|_| T::standard_normal(rng) * std_dev)
        .collect()
}

/// Draws the four input streams. The draw order (w1 in full, then w2, w3,
/// w4) is part of the determinism contract.
pub fn draw_gaussian_inputs<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
) -> GaussianInputs<T> {
    let len = 2 * m;
    let std_dev = T::from_f64_c(std::f64::consts::FRAC_1_SQRT_2);
    let w1 = draw_stream(rng, len, std_dev);
    let w2 = draw_stream(rng, len, std_dev);
    let w3 = draw_stream(rng, len, std_dev);
    let w4 = draw_stream(rng, len, std_dev);
    GaussianInputs { w1, w2, w3, w4 }
}

/// Lower-triangular factor of the per-frequency 2x2 matrix
/// `Sigma_k = 2 [[1, rho_k], [conj(rho_k), 1]]`, with `a12 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyFactor<T: Scalar> {
    pub k: usize,
    pub a11: T,
    pub a21: Complex<T>,
    pub a22: T,
    /// A zero eigenvalue forced `rho_k = 0`.
    pub degenerate: bool,
    /// `Sigma_k` was indefinite and replaced by its nearest nonnegative
    /// definite version.
    pub clipped: bool,
}

/// Computes the factor for one frequency from post-policy eigenvalues.
pub fn frequency_factor<T: Scalar>(
    k: usize,
    lambda_xx: T,
    lambda_yy: T,
    lambda_xy: Complex<T>,
) -> Result<FrequencyFactor<T>, SamplerError> {
    for value in [lambda_xx, lambda_yy] {
        if value < T::zero() {
            return Err(SamplerError::NegativeLambda {
                index: k,
                value: value.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let sqrt2 = T::from_f64_c(2.0).sqrt();
    if lambda_xx == T::zero() || lambda_yy == T::zero() {
        return Ok(FrequencyFactor {
            k,
            a11: sqrt2,
            a21: Complex::new(T::zero(), T::zero()),
            a22: sqrt2,
            degenerate: true,
            clipped: false,
        });
    }
    let rho = lambda_xy / (lambda_xx * lambda_yy).sqrt();
    let norm_sq = rho.norm_sqr();
    if norm_sq <= T::one() + T::from_f64_c(RHO_ROUNDOFF_TOL) {
        let two = T::from_f64_c(2.0);
        Ok(FrequencyFactor {
            k,
            a11: sqrt2,
            a21: rho.conj() * sqrt2,
            a22: (two * (T::one() - norm_sq).max(T::zero())).sqrt(),
            degenerate: false,
            clipped: false,
        })
    } else {
        // Indefinite Sigma_k: zero its negative eigenvalue 2(1 - |rho|) and
        // factor the rank-1 remainder (1 + |rho|) [[1, phase], [conj, 1]].
        let modulus = norm_sq.sqrt();
        let phase = rho / modulus;
        let a11 = (T::one() + modulus).sqrt();
        Ok(FrequencyFactor {
            k,
            a11,
            a21: phase.conj() * a11,
            a22: T::zero(),
            degenerate: false,
            clipped: true,
        })
    }
}

/// One output of a synthesis run: two independent, identically distributed
/// complex sequences of length n.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair<T: Scalar> {
    pub z1: Vec<Complex<T>>,
    pub z2: Vec<Complex<T>>,
    /// True when any eigenvalue or Sigma_k clipping occurred; the output law
    /// is then only approximate.
    pub inexact: bool,
    /// Root seed the run's RNG stream was derived from.
    pub seed: u64,
}

/// Embedding, spectra, and frequency factors prepared once so that repeated
/// runs only draw inputs and perform the two synthesis FFTs.
///
/// The per-frequency work is stored as three premultiplied coefficient
/// arrays (`h_x(k) = xa(k) w_a(k)`, `h_y(k) = ya(k) w_a(k) + yb(k) w_b(k)`
/// with `w_a = w1 + i w2`, `w_b = w3 + i w4`), which keeps the synthesis
/// loop bandwidth-bound on 40 bytes per frequency.
pub struct PreparedSampler<T: Scalar> {
    n: usize,
    m: usize,
    coeff_xa: Vec<T>,
    coeff_ya: Vec<Complex<T>>,
    coeff_yb: Vec<T>,
    inexact: bool,
    engine: Arc<FftEngine<T>>,
}

impl<T: Scalar> PreparedSampler<T> {
    fn from_spectrum(
        spectrum: EigenSpectrum<T>,
        n: usize,
        policy_inexact: bool,
        engine: Arc<FftEngine<T>>,
    ) -> Result<Self, SamplerError> {
        let len = 2 * spectrum.m();
        let inv_sqrt_len = (T::from_f64_c(len as f64)).sqrt().recip();
        let mut coeff_xa = Vec::with_capacity(len);
        let mut coeff_ya = Vec::with_capacity(len);
        let mut coeff_yb = Vec::with_capacity(len);
        let mut any_clipped = false;
        for k in 0..len {
            let factor = frequency_factor(
                k,
                spectrum.lambda_xx()[k],
                spectrum.lambda_yy()[k],
                spectrum.lambda_xy()[k],
            )?;
            any_clipped |= factor.clipped;
            let scale_x = spectrum.lambda_xx()[k].sqrt() * inv_sqrt_len;
            let scale_y = spectrum.lambda_yy()[k].sqrt() * inv_sqrt_len;
            coeff_xa.push(scale_x * factor.a11);
            coeff_ya.push(factor.a21 * scale_y);
            coeff_yb.push(scale_y * factor.a22);
        }
        Ok(Self {
            n,
            m: spectrum.m(),
            coeff_xa,
            coeff_ya,
            coeff_yb,
            inexact: policy_inexact || any_clipped,
            engine,
        })
    }

    fn prepare_with(
        bivariate_at: impl Fn(usize) -> Result<BivariateCovariance<T>, CovarianceError>,
        n: usize,
        m: usize,
        policy: NegEigPolicy,
        engine: Arc<FftEngine<T>>,
    ) -> Result<Self, SamplerError> {
        if m < n {
            return Err(EmbeddingError::EmbeddingTooShort { m, n }.into());
        }
        let rows = build_first_rows(&bivariate_at(m)?, m)?;
        let spectrum = eigen_spectrum(&rows, engine.as_ref());
        drop(rows);
        let applied = apply_policy(spectrum, policy, engine.as_ref(), |larger_m| {
            build_first_rows(&bivariate_at(larger_m)?, larger_m)
        })?;
        Self::from_spectrum(applied.spectrum, n, applied.inexact, engine)
    }

    pub fn prepare(
        source: &CovarianceSource<T>,
        n: usize,
        m: usize,
        policy: NegEigPolicy,
        engine: Arc<FftEngine<T>>,
    ) -> Result<Self, SamplerError> {
        Self::prepare_with(|lag| source.bivariate(lag), n, m, policy, engine)
    }

    /// As [`PreparedSampler::prepare`] for a fixed specification, without
    /// taking ownership of it.
    pub fn prepare_spec(
        spec: &CovarianceSpec<T>,
        n: usize,
        m: usize,
        policy: NegEigPolicy,
        engine: Arc<FftEngine<T>>,
    ) -> Result<Self, SamplerError> {
        Self::prepare_with(|lag| spec.bivariate_up_to(lag), n, m, policy, engine)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Embedding half-length actually in use (may exceed the requested m
    /// under the oversample policy).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn inexact(&self) -> bool {
        self.inexact
    }

    pub fn engine(&self) -> &Arc<FftEngine<T>> {
        &self.engine
    }

    /// The deterministic linear map from Gaussian inputs to the two output
    /// sequences: per-frequency correlation, eigenvalue scaling, synthesis
    /// transform, and component extraction. Pure; shared by sampling and by
    /// the exact covariance oracle.
    pub fn synthesize_from_inputs(
        &self,
        inputs: &GaussianInputs<T>,
    ) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let len = 2 * self.m;
        assert_eq!(inputs.len(), len, "inputs must have length 2m");
        let mut h_x = Vec::with_capacity(len);
        let mut h_y = Vec::with_capacity(len);
        for k in 0..len {
            let wa = Complex::new(inputs.w1[k], inputs.w2[k]);
            let wb = Complex::new(inputs.w3[k], inputs.w4[k]);
            h_x.push(wa * self.coeff_xa[k]);
            h_y.push(wa * self.coeff_ya[k] + wb * self.coeff_yb[k]);
        }
        self.engine.forward(&mut h_x);
        self.engine.forward(&mut h_y);
        let z1 = (0..self.n)
            .map(|t| Complex::new(h_x[t].re, h_y[t].re))
            .collect();
        let z2 = (0..self.n)
            .map(|t| Complex::new(h_x[t].im, h_y[t].im))
            .collect();
        (z1, z2)
    }

    /// Runs one synthesis with the RNG substream `(seed, stream)`.
    pub fn synthesize(&self, seed: u64, stream: u64) -> SamplePair<T> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let inputs = draw_gaussian_inputs(&mut rng, self.m);
        let (z1, z2) = self.synthesize_from_inputs(&inputs);
        SamplePair {
            z1,
            z2,
            inexact: self.inexact,
            seed,
        }
    }
}

/// Full synthesis run for a fixed specification: embed, factor, sample.
/// Costs exactly 5 FFTs on the shared engine.
pub fn synthesize_pair_with_engine<T: Scalar>(
    spec: &CovarianceSpec<T>,
    m: usize,
    policy: NegEigPolicy,
    seed: u64,
    engine: Arc<FftEngine<T>>,
) -> Result<SamplePair<T>, SamplerError> {
    let prepared = PreparedSampler::prepare_spec(spec, spec.n(), m, policy, engine)?;
    Ok(prepared.synthesize(seed, 0))
}

/// As [`synthesize_pair_with_engine`], with a private FFT engine.
pub fn synthesize_pair<T: Scalar>(
    spec: &CovarianceSpec<T>,
    m: usize,
    policy: NegEigPolicy,
    seed: u64,
) -> Result<SamplePair<T>, SamplerError> {
    synthesize_pair_with_engine(spec, m, policy, seed, Arc::new(FftEngine::new()))
}

/// A batch of simulated sequences, in run order: z1 then z2 of run 0, z1
/// then z2 of run 1, ..., truncated to the requested count.
#[derive(Debug, Clone)]
pub struct Batch<T: Scalar> {
    pub sequences: Vec<Vec<Complex<T>>>,
    pub runs: usize,
    pub inexact: bool,
    pub seed: u64,
}

/// Simulates `count` sequences of length `n` using `ceil(count / 2)`
/// synthesis runs. Run r draws from the RNG substream `(seed, r)`, so the
/// output is identical regardless of how runs are scheduled.
pub fn simulate_batch<T: Scalar>(
    source: &CovarianceSource<T>,
    n: usize,
    count: usize,
    policy: NegEigPolicy,
    seed: u64,
) -> Result<Batch<T>, SamplerError> {
    simulate_batch_with_engine(source, n, count, policy, seed, Arc::new(FftEngine::new()))
}

pub fn simulate_batch_with_engine<T: Scalar>(
    source: &CovarianceSource<T>,
    n: usize,
    count: usize,
    policy: NegEigPolicy,
    seed: u64,
    engine: Arc<FftEngine<T>>,
) -> Result<Batch<T>, SamplerError> {
    if count == 0 {
        return Err(SamplerError::EmptyBatch);
    }
    let prepared = PreparedSampler::prepare(source, n, n, policy, engine)?;
    let runs = count.div_ceil(2);
    let pairs: Vec<SamplePair<T>> = (0..runs)
        .into_par_iter()
        .map(|run| prepared.synthesize(seed, run as u64))
        .collect();
    let mut sequences = Vec::with_capacity(runs * 2);
    for pair in pairs {
        sequences.push(pair.z1);
        sequences.push(pair.z2);
    }
    sequences.truncate(count);
    Ok(Batch {
        sequences,
        runs,
        inexact: prepared.inexact(),
        seed,
    })
}

/// Derives an independent child seed for experiment cell `index` (splitmix64
/// step over the root seed).
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
