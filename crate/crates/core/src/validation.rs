//! Estimators, oracles, and experiment runners that certify the sampler:
//! unbiased covariance estimators and the RMS metric, a dense Cholesky
//! reference sampler, a deterministic end-to-end covariance oracle built by
//! probing the synthesis pipeline with unit vectors, and the eigenvalue and
//! RMS experiment sweeps.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::covariance::{
    complex_to_bivariate, fgn_autocovariance, improper_fgn_spec, BivariateCovariance,
    CovarianceError, CovarianceSource, CovarianceSpec, FgnParams,
};
use crate::embedding::{build_first_rows, eigen_spectrum, EmbeddingError, NegEigPolicy};
use crate::fft::FftEngine;
use crate::sampler::{derive_seed, simulate_batch, GaussianInputs, PreparedSampler, SamplerError};
use crate::scalar::Scalar;

/// Largest output length accepted by the dense covariance oracle.
pub const ORACLE_MAX_N: usize = 64;

/// Diagonal jitter ladder (relative to the largest diagonal entry) tried by
/// the dense Cholesky factorization before declaring the matrix indefinite.
const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("max_lag {max_lag} must be smaller than the sequence length {len}")]
    MaxLagTooLarge { max_lag: usize, len: usize },
    #[error("sequences must have equal length, got {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("covariance oracle is limited to n <= {limit}, got {n}")]
    OracleGuard { n: usize, limit: usize },
    #[error(
        "covariance matrix is not nonnegative definite (even with diagonal jitter up to 1e-10)"
    )]
    IndefiniteCovariance,
    #[error("covariance table stops at lag {available}, need lag {required}")]
    InsufficientLags { required: usize, available: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
}

/// Minimal dense row-major matrix used by the oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, self.get(row0 + i, col0 + j));
            }
        }
        out
    }
}

/// Covariance matrix of the stacked real vector `(x_0..x_{n-1}, y_0..y_{n-1})`
/// implied by a bivariate covariance structure.
pub fn theoretical_covariance<T: Scalar>(
    biv: &BivariateCovariance<T>,
    n: usize,
) -> Result<Mat<T>, ValidationError> {
    if n == 0 || biv.n() + 1 < n {
        return Err(ValidationError::InsufficientLags {
            required: n.saturating_sub(1),
            available: biv.n(),
        });
    }
    let mut cov = Mat::zeros(2 * n, 2 * n);
    for t in 0..n {
        for s in 0..n {
            let lag = t as isize - s as isize;
            cov.set(t, s, biv.s_xx_at(lag));
            cov.set(n + t, n + s, biv.s_yy_at(lag));
            cov.set(t, n + s, biv.s_xy_at(lag));
            cov.set(n + t, s, biv.s_xy_at(-lag));
        }
    }
    Ok(cov)
}

fn try_cholesky<T: Scalar>(a: &Mat<T>, jitter: T) -> Option<Mat<T>> {
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            if i == j {
                sum += jitter;
            }
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= T::zero() {
                    return None;
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Some(l)
}

/// Lower Cholesky factor with a small diagonal-jitter fallback for
/// semidefinite inputs. Returns the factor and the relative jitter used.
pub fn cholesky_lower<T: Scalar>(a: &Mat<T>) -> Result<(Mat<T>, f64), ValidationError> {
    assert_eq!(a.rows(), a.cols(), "Cholesky needs a square matrix");
    let mut scale = T::zero();
    for i in 0..a.rows() {
        scale = scale.max(a.get(i, i).abs());
    }
    if scale == T::zero() {
        scale = T::one();
    }
    for &jitter in &JITTER_LADDER {
        if let Some(l) = try_cholesky(a, T::from_f64_c(jitter) * scale) {
            return Ok((l, jitter));
        }
    }
    Err(ValidationError::IndefiniteCovariance)
}

/// Dense O(n^2)-per-draw reference sampler: factors the full 2n x 2n
/// covariance once and maps standard normal vectors through it.
pub struct CholeskyOracle<T: Scalar> {
    n: usize,
    factor: Mat<T>,
    jitter: f64,
}

impl<T: Scalar> CholeskyOracle<T> {
    pub fn new(spec: &CovarianceSpec<T>, n: usize) -> Result<Self, ValidationError> {
        let biv = complex_to_bivariate(spec);
        let cov = theoretical_covariance(&biv, n)?;
        let (factor, jitter) = cholesky_lower(&cov)?;
        Ok(Self { n, factor, jitter })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Relative diagonal jitter the factorization needed (0 for strictly
    /// positive definite inputs).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Draws one sequence exactly from the target law.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex<T>> {
        let dim = 2 * self.n;
        let g: Vec<T> = (0..dim).map(|_| T::standard_normal(rng)).collect();
        let mut v = vec![T::zero(); dim];
        for i in 0..dim {
            let mut acc = T::zero();
            for k in 0..=i {
                acc += self.factor.get(i, k) * g[k];
            }
            v[i] = acc;
        }
        (0..self.n)
            .map(|t| Complex::new(v[t], v[self.n + t]))
            .collect()
    }
}

/// One-shot draw through the dense reference sampler.
pub fn cholesky_oracle_simulate<T: Scalar, R: Rng + ?Sized>(
    spec: &CovarianceSpec<T>,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Complex<T>>, ValidationError> {
    Ok(CholeskyOracle::new(spec, n)?.draw(rng))
}

/// Unbiased (known zero mean) autocovariance estimate:
/// `s_hat(tau) = sum_t z(t+tau) conj(z(t)) / (n - tau)`.
pub fn estimate_autocovariance<T: Scalar>(
    z: &[Complex<T>],
    max_lag: usize,
) -> Result<Vec<Complex<T>>, ValidationError> {
    if max_lag >= z.len() {
        return Err(ValidationError::MaxLagTooLarge {
            max_lag,
            len: z.len(),
        });
    }
    Ok((0..=max_lag)
        .map(|tau| {
            let terms = z.len() - tau;
            let sum: Complex<T> = (0..terms).map(|t| z[t + tau] * z[t].conj()).sum();
            sum / T::from_f64_c(terms as f64)
        })
        .collect())
}

/// Unbiased complementary covariance estimate (no conjugation):
/// `r_hat(tau) = sum_t z(t+tau) z(t) / (n - tau)`.
pub fn estimate_complementary<T: Scalar>(
    z: &[Complex<T>],
    max_lag: usize,
) -> Result<Vec<Complex<T>>, ValidationError> {
    if max_lag >= z.len() {
        return Err(ValidationError::MaxLagTooLarge {
            max_lag,
            len: z.len(),
        });
    }
    Ok((0..=max_lag)
        .map(|tau| {
            let terms = z.len() - tau;
            let sum: Complex<T> = (0..terms).map(|t| z[t + tau] * z[t]).sum();
            sum / T::from_f64_c(terms as f64)
        })
        .collect())
}

/// Root mean square distance between a theoretical and an estimated
/// sequence over their common index range.
pub fn rms_metric<T: Scalar>(
    theory: &[Complex<T>],
    estimate: &[Complex<T>],
) -> Result<T, ValidationError> {
    if theory.len() != estimate.len() {
        return Err(ValidationError::LengthMismatch {
            left: theory.len(),
            right: estimate.len(),
        });
    }
    let n = T::from_f64_c(theory.len() as f64);
    let sum: T = theory
        .iter()
        .zip(estimate)
        .map(|(t, e)| (e - t).norm_sqr())
        .sum();
    Ok((sum / n).sqrt())
}

/// Output covariance of the full synthesis pipeline, computed exactly by
/// probing the deterministic linear map with unit vectors.
#[derive(Debug, Clone)]
pub struct OutputCovariance<T: Scalar> {
    /// Covariance of the stacked real vector `(Re z1, Im z1)`, 2n x 2n.
    pub z1: Mat<T>,
    /// Covariance of `(Re z2, Im z2)`.
    pub z2: Mat<T>,
    /// Cross covariance between the z1 and z2 stacked vectors.
    pub cross: Mat<T>,
    pub inexact: bool,
    pub n: usize,
    pub m: usize,
}

/// Composes the synthesis stages (frequency factors, eigenvalue scaling,
/// DFT, real/imaginary extraction) into one linear map L from the 8m real
/// Gaussian inputs to the 4n stacked outputs and returns the implied output
/// covariance (inputs have variance 1/2).
pub fn exact_output_covariance<T: Scalar>(
    spec: &CovarianceSpec<T>,
    m: usize,
    policy: NegEigPolicy,
) -> Result<OutputCovariance<T>, ValidationError> {
    let n = spec.n();
    if n > ORACLE_MAX_N {
        return Err(ValidationError::OracleGuard {
            n,
            limit: ORACLE_MAX_N,
        });
    }
    let engine = Arc::new(FftEngine::new());
    let source = CovarianceSource::Fixed(spec.clone());
    let prepared = PreparedSampler::prepare(&source, n, m, policy, engine)?;
    let m = prepared.m();
    let len = 2 * m;
    let out_dim = 4 * n;
    let in_dim = 4 * len;

    // Column j of L is the pipeline output for the j-th unit input.
    let mut l = Mat::zeros(out_dim, in_dim);
    for j in 0..in_dim {
        let mut streams = vec![vec![T::zero(); len]; 4];
        streams[j / len][j % len] = T::one();
        let [w1, w2, w3, w4]: [Vec<T>; 4] = streams.try_into().unwrap();
        let inputs = GaussianInputs::from_parts(w1, w2, w3, w4);
        let (z1, z2) = prepared.synthesize_from_inputs(&inputs);
        for t in 0..n {
            l.set(t, j, z1[t].re);
            l.set(n + t, j, z1[t].im);
            l.set(2 * n + t, j, z2[t].re);
            l.set(3 * n + t, j, z2[t].im);
        }
    }

    // Output covariance = L diag(1/2) L^T.
    let half = T::from_f64_c(0.5);
    let mut cov = Mat::zeros(out_dim, out_dim);
    for i in 0..out_dim {
        for j in i..out_dim {
            let mut acc = T::zero();
            for k in 0..in_dim {
                acc += l.get(i, k) * l.get(j, k);
            }
            let v = acc * half;
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok(OutputCovariance {
        z1: cov.block(0, 0, 2 * n, 2 * n),
        z2: cov.block(2 * n, 2 * n, 2 * n, 2 * n),
        cross: cov.block(0, 2 * n, 2 * n, 2 * n),
        inexact: prepared.inexact(),
        n,
        m,
    })
}

/// One cell of the minimum-eigenvalue sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow<T: Scalar> {
    pub hurst: T,
    pub n: usize,
    pub min_eig: T,
}

/// Minimum circulant eigenvalue (over both component spectra, before any
/// policy) of the improper fGn embedding with m = n, for each (H, n) cell.
pub fn min_eigenvalue_sweep<T: Scalar>(
    h_values: &[T],
    n_values: &[usize],
    amp_a: T,
    amp_b: T,
) -> Result<Vec<SweepRow<T>>, ValidationError> {
    let engine = FftEngine::new();
    let cells: Vec<(T, usize)> = h_values
        .iter()
        .flat_map(|&h| n_values.iter().map(move |&n| (h, n)))
        .collect();
    cells
        .into_par_iter()
        .map(|(hurst, n)| {
            let params = FgnParams::new(hurst, amp_a, amp_b)?;
            let spec = improper_fgn_spec(&params, n);
            let rows = build_first_rows(&complex_to_bivariate(&spec), n)?;
            let spectrum = eigen_spectrum(&rows, &engine);
            Ok(SweepRow {
                hurst,
                n,
                min_eig: spectrum.min_eig(),
            })
        })
        .collect()
}

/// Writes a sweep as CSV `H,n,min_eig`.
pub fn write_sweep_csv<T: Scalar, W: Write>(
    rows: &[SweepRow<T>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "H,n,min_eig")?;
    for row in rows {
        writeln!(out, "{},{},{}", row.hurst, row.n, row.min_eig)?;
    }
    Ok(())
}

type EstimatePair<T> = (Vec<Complex<T>>, Vec<Complex<T>>);

/// RMS distance of the replicate-averaged estimators from the model, for
/// one sequence length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsResult<T: Scalar> {
    pub n: usize,
    pub rms_s: T,
    pub rms_r: T,
    pub replicates: usize,
}

/// Simulates `replicates` sequences per length, averages the unbiased
/// estimators across replicates, and reports the RMS distance from the fGn
/// model for both covariance sequences.
pub fn rms_experiment<T: Scalar>(
    params: &FgnParams<T>,
    n_values: &[usize],
    replicates: usize,
    policy: NegEigPolicy,
    seed: u64,
) -> Result<Vec<RmsResult<T>>, ValidationError> {
    let source = CovarianceSource::Fgn(*params);
    let mut results = Vec::with_capacity(n_values.len());
    for (cell, &n) in n_values.iter().enumerate() {
        let cell_seed = derive_seed(seed, cell as u64);
        let batch = simulate_batch(&source, n, replicates, policy, cell_seed)?;
        let max_lag = n - 1;
        let estimates: Vec<EstimatePair<T>> = batch
            .sequences
            .par_iter()
            .map(|z| {
                let s = estimate_autocovariance(z, max_lag).expect("max_lag < n");
                let r = estimate_complementary(z, max_lag).expect("max_lag < n");
                (s, r)
            })
            .collect();
        let scale = T::from_f64_c(replicates as f64).recip();
        let mut mean_s = vec![Complex::new(T::zero(), T::zero()); n];
        let mut mean_r = vec![Complex::new(T::zero(), T::zero()); n];
        for (s, r) in &estimates {
            for tau in 0..n {
                mean_s[tau] += s[tau] * scale;
                mean_r[tau] += r[tau] * scale;
            }
        }
        let theory_s: Vec<Complex<T>> =
            fgn_autocovariance(params.hurst(), params.amp_a(), max_lag)?
                .into_iter()
                .map(|v| Complex::new(v, T::zero()))
                .collect();
        let theory_r: Vec<Complex<T>> =
            fgn_autocovariance(params.hurst(), params.amp_b(), max_lag)?
                .into_iter()
                .map(|v| Complex::new(v, T::zero()))
                .collect();
        results.push(RmsResult {
            n,
            rms_s: rms_metric(&theory_s, &mean_s)?,
            rms_r: rms_metric(&theory_r, &mean_r)?,
            replicates,
        });
    }
    Ok(results)
}

/// Writes RMS results as CSV `n,rms_s,rms_r,replicates`.
pub fn write_rms_csv<T: Scalar, W: Write>(
    results: &[RmsResult<T>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "n,rms_s,rms_r,replicates")?;
    for row in results {
        writeln!(
            out,
            "{},{},{},{}",
            row.n, row.rms_s, row.rms_r, row.replicates
        )?;
    }
    Ok(())
}

/// Accumulates the empirical covariance of stacked real vectors
/// `(Re z, Im z)` over replicates with known zero mean.
pub struct CovarianceAccumulator<T: Scalar> {
    n: usize,
    count: usize,
    sums: Mat<T>,
}

impl<T: Scalar> CovarianceAccumulator<T> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            count: 0,
            sums: Mat::zeros(2 * n, 2 * n),
        }
    }

    pub fn push(&mut self, z: &[Complex<T>]) {
        assert_eq!(z.len(), self.n);
        let v: Vec<T> = z
            .iter()
            .map(|c| c.re)
            .chain(z.iter().map(|c| c.im))
            .collect();
        for i in 0..2 * self.n {
            for j in 0..2 * self.n {
                let updated = self.sums.get(i, j) + v[i] * v[j];
                self.sums.set(i, j, updated);
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Mat<T> {
        let scale = T::from_f64_c(self.count as f64).recip();
        let mut out = self.sums;
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let v = out.get(i, j) * scale;
                out.set(i, j, v);
            }
        }
        out
    }
}

/// Accumulates the empirical cross covariance between two stacked real
/// vectors drawn as a pair.
pub struct CrossCovarianceAccumulator<T: Scalar> {
    n: usize,
    count: usize,
    sums: Mat<T>,
}

impl<T: Scalar> CrossCovarianceAccumulator<T> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            count: 0,
            sums: Mat::zeros(2 * n, 2 * n),
        }
    }

    pub fn push(&mut self, za: &[Complex<T>], zb: &[Complex<T>]) {
        assert_eq!(za.len(), self.n);
        assert_eq!(zb.len(), self.n);
        let va: Vec<T> = za
            .iter()
            .map(|c| c.re)
            .chain(za.iter().map(|c| c.im))
            .collect();
        let vb: Vec<T> = zb
            .iter()
            .map(|c| c.re)
            .chain(zb.iter().map(|c| c.im))
            .collect();
        for i in 0..2 * self.n {
            for j in 0..2 * self.n {
                let updated = self.sums.get(i, j) + va[i] * vb[j];
                self.sums.set(i, j, updated);
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Mat<T> {
        let scale = T::from_f64_c(self.count as f64).recip();
        let mut out = self.sums;
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let v = out.get(i, j) * scale;
                out.set(i, j, v);
            }
        }
        out
    }
}

/// Normal-theory standard error of one empirical covariance entry at the
/// given replicate count: `sqrt((C_ii C_jj + C_ij^2) / R)`.
pub fn covariance_entry_sigma<T: Scalar>(
    theory: &Mat<T>,
    i: usize,
    j: usize,
    replicates: usize,
) -> T {
    let var = theory.get(i, i) * theory.get(j, j) + theory.get(i, j) * theory.get(i, j);
    (var / T::from_f64_c(replicates as f64)).sqrt()
}
