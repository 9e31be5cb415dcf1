//! Circulant embedding of the bivariate covariance structure: first rows of
//! the three embedded circulant matrices, their eigenvalue sequences via the
//! FFT, and the policy for spectra that fail nonnegativity.
//!
//! The full 2m x 2m circulant matrices are never materialized; a first row
//! of length 2m determines each one.

use num_complex::Complex;
use thiserror::Error;

use crate::covariance::{BivariateCovariance, CovarianceError};
use crate::fft::FftEngine;
use crate::scalar::Scalar;

/// Relative threshold below which a negative eigenvalue is treated as FFT
/// round-off and zeroed without engaging the policy.
pub const EIGENVALUE_ROUNDOFF_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding half-length m = {m} is smaller than the target length n = {n}")]
    EmbeddingTooShort { m: usize, n: usize },
    #[error("embedding requires lags up to {required}, but the covariance table stops at {available}; supply more lags or use a generator-backed model")]
    InsufficientLags { required: usize, available: usize },
    #[error("negative circulant eigenvalue {min_eig:.6e} at index {index} under strict policy")]
    NegativeEigenvalue { min_eig: f64, index: usize },
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
}

/// First rows of the embedded circulant matrices, each of length `2m`.
#[derive(Debug, Clone)]
pub struct CirculantRows<T: Scalar> {
    m: usize,
    c_xx: Vec<T>,
    c_yy: Vec<T>,
    c_xy: Vec<T>,
}

impl<T: Scalar> CirculantRows<T> {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c_xx(&self) -> &[T] {
        &self.c_xx
    }

    pub fn c_yy(&self) -> &[T] {
        &self.c_yy
    }

    pub fn c_xy(&self) -> &[T] {
        &self.c_xy
    }
}

/// Builds the circulant first rows at embedding half-length `m`.
///
/// `c_xx` and `c_yy` wrap the even extension of the autocovariances; `c_xy`
/// stores negative lags in the first half and mirrored positive lags in the
/// second. Requires the covariance table to reach lag `m`.
pub fn build_first_rows<T: Scalar>(
    biv: &BivariateCovariance<T>,
    m: usize,
) -> Result<CirculantRows<T>, EmbeddingError> {
    if m == 0 {
        return Err(EmbeddingError::EmbeddingTooShort { m, n: 1 });
    }
    if biv.n() < m {
        return Err(EmbeddingError::InsufficientLags {
            required: m,
            available: biv.n(),
        });
    }
    let len = 2 * m;
    let mut c_xx = Vec::with_capacity(len);
    let mut c_yy = Vec::with_capacity(len);
    let mut c_xy = Vec::with_capacity(len);
    for tau in 0..=m {
        c_xx.push(biv.s_xx()[tau]);
        c_yy.push(biv.s_yy()[tau]);
        c_xy.push(biv.s_xy_at(-(tau as isize)));
    }
    for tau in (1..m).rev() {
        c_xx.push(biv.s_xx()[tau]);
        c_yy.push(biv.s_yy()[tau]);
        c_xy.push(biv.s_xy_at(tau as isize));
    }
    Ok(CirculantRows {
        m,
        c_xx,
        c_yy,
        c_xy,
    })
}

/// Eigenvalue sequences of the three circulant matrices, as produced by the
/// forward DFT of their first rows.
#[derive(Debug, Clone)]
pub struct EigenSpectrum<T: Scalar> {
    m: usize,
    lambda_xx: Vec<T>,
    lambda_yy: Vec<T>,
    lambda_xy: Vec<Complex<T>>,
    clipped_count: usize,
    min_eig: T,
}

impl<T: Scalar> EigenSpectrum<T> {
    pub fn m(&self) -> usize {
        self.m
    }

    /// Eigenvalues of the x-component circulant, index `k` matching the DFT
    /// bin `k` (0-based here; 1-based in the exported CSV).
    pub fn lambda_xx(&self) -> &[T] {
        &self.lambda_xx
    }

    pub fn lambda_yy(&self) -> &[T] {
        &self.lambda_yy
    }

    pub fn lambda_xy(&self) -> &[Complex<T>] {
        &self.lambda_xy
    }

    /// Number of eigenvalues zeroed by the clip policy.
    pub fn clipped_count(&self) -> usize {
        self.clipped_count
    }

    /// Minimum over `lambda_xx` and `lambda_yy` before any adjustment.
    pub fn min_eig(&self) -> T {
        self.min_eig
    }

    fn min_position(&self) -> (T, usize) {
        let mut min = T::infinity();
        let mut index = 0;
        for (k, &v) in self
            .lambda_xx
            .iter()
            .chain(self.lambda_yy.iter())
            .enumerate()
        {
            if v < min {
                min = v;
                index = k % (2 * self.m);
            }
        }
        (min, index)
    }

    /// Round-off threshold: negatives above `-tol` count as zero.
    pub fn roundoff_tol(&self) -> T {
        T::from_f64_c(EIGENVALUE_ROUNDOFF_TOL) * self.lambda_xx[0].max(self.lambda_yy[0])
    }

    /// Writes the spectrum as CSV `k,lambda_xx,lambda_yy,re_lambda_xy,im_lambda_xy`
    /// with `k` running 1..=2m.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,lambda_xx,lambda_yy,re_lambda_xy,im_lambda_xy")?;
        for k in 0..2 * self.m {
            writeln!(
                out,
                "{},{},{},{},{}",
                k + 1,
                self.lambda_xx[k],
                self.lambda_yy[k],
                self.lambda_xy[k].re,
                self.lambda_xy[k].im
            )?;
        }
        Ok(())
    }
}

/// Computes the three eigenvalue sequences by FFT of the first rows.
///
/// `lambda_xx` and `lambda_yy` are real up to FFT round-off (the rows are
/// even); the residue is stripped. No nonnegativity adjustment happens here.
pub fn eigen_spectrum<T: Scalar>(
    rows: &CirculantRows<T>,
    engine: &FftEngine<T>,
) -> EigenSpectrum<T> {
    // One complex work buffer serves all three transforms.
    let mut buf: Vec<Complex<T>> = Vec::with_capacity(2 * rows.m);
    let transform_real = |row: &[T], buf: &mut Vec<Complex<T>>| -> Vec<T> {
        buf.clear();
        buf.extend(row.iter().map(|&v| Complex::new(v, T::zero())));
        engine.forward(buf);
        buf.iter().map(|v| v.re).collect()
    };
    let lambda_xx = transform_real(&rows.c_xx, &mut buf);
    let lambda_yy = transform_real(&rows.c_yy, &mut buf);
    buf.clear();
    buf.extend(rows.c_xy.iter().map(|&v| Complex::new(v, T::zero())));
    engine.forward(&mut buf);
    let lambda_xy = buf;
    let min_eig = lambda_xx
        .iter()
        .chain(lambda_yy.iter())
        .fold(T::infinity(), |acc, &v| acc.min(v));
    EigenSpectrum {
        m: rows.m,
        lambda_xx,
        lambda_yy,
        lambda_xy,
        clipped_count: 0,
        min_eig,
    }
}

/// How to proceed when the embedded circulants have negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// Fail with the offending eigenvalue.
    Strict,
    /// Zero the negatives; the output law becomes approximate.
    Clip,
    /// Double the embedding length hoping for a nonnegative spectrum, then
    /// fall back to clipping.
    Oversample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NegEigPolicy {
    pub mode: PolicyMode,
    pub max_doublings: u32,
}

impl NegEigPolicy {
    pub fn strict() -> Self {
        Self {
            mode: PolicyMode::Strict,
            max_doublings: 0,
        }
    }

    pub fn clip() -> Self {
        Self {
            mode: PolicyMode::Clip,
            max_doublings: 0,
        }
    }

    pub fn oversample(max_doublings: u32) -> Self {
        Self {
            mode: PolicyMode::Oversample,
            max_doublings,
        }
    }
}

impl Default for NegEigPolicy {
    fn default() -> Self {
        Self::strict()
    }
}

/// Result of applying a negative-eigenvalue policy.
#[derive(Debug, Clone)]
pub struct PolicyApplied<T: Scalar> {
    pub spectrum: EigenSpectrum<T>,
    /// True when any genuine clipping occurred (the output law is no longer
    /// exact).
    pub inexact: bool,
    /// Oversample mode exhausted its doublings and fell back to clipping.
    pub fell_back_to_clip: bool,
}

/// Zeroes round-off negatives in place; returns true when every eigenvalue
/// was nonnegative up to `tol`.
fn settle_roundoff<T: Scalar>(spectrum: &mut EigenSpectrum<T>) -> bool {
    let tol = spectrum.roundoff_tol();
    let mut clean = true;
    for v in spectrum
        .lambda_xx
        .iter_mut()
        .chain(spectrum.lambda_yy.iter_mut())
    {
        if *v < T::zero() {
            if *v < -tol {
                clean = false;
            } else {
                *v = T::zero();
            }
        }
    }
    clean
}

fn clip_negatives<T: Scalar>(spectrum: &mut EigenSpectrum<T>) {
    let mut clipped = 0usize;
    for v in spectrum
        .lambda_xx
        .iter_mut()
        .chain(spectrum.lambda_yy.iter_mut())
    {
        if *v < T::zero() {
            *v = T::zero();
            clipped += 1;
        }
    }
    spectrum.clipped_count += clipped;
}

/// Applies the negative-eigenvalue policy to a computed spectrum.
///
/// `rebuild` must produce circulant rows at a larger half-length for the
/// oversample mode; sources with finitely many lags should return
/// [`EmbeddingError::InsufficientLags`], which aborts the oversampling (the
/// caller is expected to supply more lags rather than silently zero-pad).
pub fn apply_policy<T: Scalar>(
    spectrum: EigenSpectrum<T>,
    policy: NegEigPolicy,
    engine: &FftEngine<T>,
    mut rebuild: impl FnMut(usize) -> Result<CirculantRows<T>, EmbeddingError>,
) -> Result<PolicyApplied<T>, EmbeddingError> {
    let mut spectrum = spectrum;
    match policy.mode {
        PolicyMode::Strict => {
            if settle_roundoff(&mut spectrum) {
                Ok(PolicyApplied {
                    spectrum,
                    inexact: false,
                    fell_back_to_clip: false,
                })
            } else {
                let (min_eig, index) = spectrum.min_position();
                Err(EmbeddingError::NegativeEigenvalue {
                    min_eig: min_eig.to_f64().unwrap_or(f64::NAN),
                    index,
                })
            }
        }
        PolicyMode::Clip => {
            let clean = settle_roundoff(&mut spectrum);
            if !clean {
                clip_negatives(&mut spectrum);
            }
            Ok(PolicyApplied {
                inexact: !clean,
                spectrum,
                fell_back_to_clip: false,
            })
        }
        PolicyMode::Oversample => {
            if settle_roundoff(&mut spectrum) {
                return Ok(PolicyApplied {
                    spectrum,
                    inexact: false,
                    fell_back_to_clip: false,
                });
            }
            let mut m = spectrum.m.next_power_of_two();
            for _ in 0..policy.max_doublings {
                if m == spectrum.m {
                    m *= 2;
                }
                let rows = rebuild(m)?;
                spectrum = eigen_spectrum(&rows, engine);
                if settle_roundoff(&mut spectrum) {
                    return Ok(PolicyApplied {
                        spectrum,
                        inexact: false,
                        fell_back_to_clip: false,
                    });
                }
                m *= 2;
            }
            clip_negatives(&mut spectrum);
            Ok(PolicyApplied {
                spectrum,
                inexact: true,
                fell_back_to_clip: true,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{complex_to_bivariate, improper_fgn_spec, CovarianceSpec, FgnParams};

    fn biv(
        s_xx: Vec<f64>,
        s_yy: Vec<f64>,
        s_xy_pos: Vec<f64>,
        s_xy_neg: Vec<f64>,
    ) -> BivariateCovariance<f64> {
        BivariateCovariance::new(s_xx, s_yy, s_xy_pos, s_xy_neg).unwrap()
    }

    #[test]
    fn first_rows_follow_the_embedding_layout() {
        let (a, b, c) = (2.0, 1.0, 0.25);
        let biv = biv(
            vec![a, b, c],
            vec![a, b, c],
            vec![0.5, 0.125, 0.0625],
            vec![0.5, -0.3, 0.7],
        );
        let rows = build_first_rows(&biv, 2).unwrap();
        assert_eq!(rows.c_xx(), &[a, b, c, b]);
        assert_eq!(rows.c_yy(), &[a, b, c, b]);
        // [s_xy(0), s_xy(-1), s_xy(-2), s_xy(1)]
        assert_eq!(rows.c_xy(), &[0.5, -0.3, 0.7, 0.125]);
    }

    #[test]
    fn white_noise_embeds_to_a_delta_row() {
        let biv = biv(
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0; 3],
            vec![0.0; 3],
        );
        let rows = build_first_rows(&biv, 2).unwrap();
        assert_eq!(rows.c_xx(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_embedding_beyond_available_lags() {
        let biv = biv(vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0; 2], vec![0.0; 2]);
        assert!(matches!(
            build_first_rows(&biv, 2),
            Err(EmbeddingError::InsufficientLags {
                required: 2,
                available: 1
            })
        ));
    }

    #[test]
    fn delta_row_has_constant_spectrum() {
        let engine = FftEngine::new();
        let biv = biv(
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0; 3],
            vec![0.0; 3],
        );
        let spectrum = eigen_spectrum(&build_first_rows(&biv, 2).unwrap(), &engine);
        for k in 0..4 {
            assert!((spectrum.lambda_xx()[k] - 1.0).abs() < 1e-12);
        }
        assert!((spectrum.min_eig() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_spectrum() {
        // c_xx = [2, 1, 0, 1] has eigenvalues 2 + 2cos(2 pi k / 4).
        let engine = FftEngine::new();
        let biv = biv(
            vec![2.0, 1.0, 0.0],
            vec![2.0, 1.0, 0.0],
            vec![0.0; 3],
            vec![0.0; 3],
        );
        let spectrum = eigen_spectrum(&build_first_rows(&biv, 2).unwrap(), &engine);
        let want = [4.0, 2.0, 0.0, 2.0];
        for k in 0..4 {
            assert!(
                (spectrum.lambda_xx()[k] - want[k]).abs() < 1e-12,
                "k = {k}: {} vs {}",
                spectrum.lambda_xx()[k],
                want[k]
            );
        }
        assert!(spectrum.min_eig().abs() < 1e-12);
    }

    #[test]
    fn inverse_dft_recovers_the_first_row() {
        let engine = FftEngine::new();
        let params = FgnParams::unit_variance(0.8f64, 0.4).unwrap();
        let spec = improper_fgn_spec(&params, 48);
        let rows = build_first_rows(&complex_to_bivariate(&spec), 48).unwrap();
        let spectrum = eigen_spectrum(&rows, &engine);
        let mut buf: Vec<num_complex::Complex<f64>> = spectrum
            .lambda_xx()
            .iter()
            .map(|&v| num_complex::Complex::new(v, 0.0))
            .collect();
        engine.inverse(&mut buf);
        let len = buf.len() as f64;
        for (got, &want) in buf.iter().zip(rows.c_xx()) {
            assert!((got.re / len - want).abs() < 1e-10 * (1.0 + want.abs()));
            assert!(got.im.abs() < 1e-10);
        }
    }

    #[test]
    fn real_row_spectrum_is_conjugate_symmetric() {
        let engine = FftEngine::new();
        let spec = CovarianceSpec::new(
            vec![
                num_complex::Complex::new(1.0, 0.0),
                num_complex::Complex::new(0.0, 0.3),
                num_complex::Complex::new(0.1, -0.2),
            ],
            vec![num_complex::Complex::new(0.2, 0.0); 3],
        )
        .unwrap();
        let rows = build_first_rows(&complex_to_bivariate(&spec), 2).unwrap();
        let spectrum = eigen_spectrum(&rows, &engine);
        let lam = spectrum.lambda_xy();
        let len = lam.len();
        for k in 1..len {
            assert!((lam[len - k] - lam[k].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn time_reversible_cross_row_gives_real_cross_spectrum() {
        let engine = FftEngine::new();
        let biv = biv(
            vec![1.0, 0.4, 0.1],
            vec![0.8, 0.3, 0.05],
            vec![0.2, 0.15, 0.02],
            vec![0.2, 0.15, 0.02],
        );
        let rows = build_first_rows(&biv, 2).unwrap();
        assert_eq!(rows.c_xy()[1], rows.c_xy()[3]);
        let spectrum = eigen_spectrum(&rows, &engine);
        for v in spectrum.lambda_xy() {
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn fgn_spectra_need_no_adjustment() {
        let engine = FftEngine::new();
        for &h in &[0.5f64, 0.75, 0.95] {
            let params = FgnParams::new(h, 1.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
            let spec = improper_fgn_spec(&params, 64);
            let rows = build_first_rows(&complex_to_bivariate(&spec), 64).unwrap();
            let spectrum = eigen_spectrum(&rows, &engine);
            assert!(spectrum.min_eig() > 0.0, "H = {h}");
            let applied = apply_policy(spectrum, NegEigPolicy::strict(), &engine, |_| {
                panic!("rebuild must not be called")
            })
            .unwrap();
            assert!(!applied.inexact);
            assert_eq!(applied.spectrum.clipped_count(), 0);
        }
    }

    fn forced_negative_spectrum(engine: &FftEngine<f64>) -> EigenSpectrum<f64> {
        // s_xx = [1, 0.9, 0] embeds to [1, 0.9, 0, 0.9] with spectrum
        // [2.8, 1, -0.8, 1].
        let biv = biv(
            vec![1.0, 0.9, 0.0],
            vec![1.0, 0.9, 0.0],
            vec![0.0; 3],
            vec![0.0; 3],
        );
        eigen_spectrum(&build_first_rows(&biv, 2).unwrap(), engine)
    }

    #[test]
    fn clip_zeroes_negatives_and_reports_inexact() {
        let engine = FftEngine::new();
        let spectrum = forced_negative_spectrum(&engine);
        assert!((spectrum.min_eig() + 0.8).abs() < 1e-12);
        let applied = apply_policy(spectrum, NegEigPolicy::clip(), &engine, |_| {
            panic!("rebuild must not be called")
        })
        .unwrap();
        assert!(applied.inexact);
        assert_eq!(applied.spectrum.clipped_count(), 2);
        assert!(applied.spectrum.lambda_xx().iter().all(|&v| v >= 0.0));
        // min_eig preserves the pre-clip value.
        assert!((applied.spectrum.min_eig() + 0.8).abs() < 1e-12);
    }

    #[test]
    fn strict_reports_the_offending_eigenvalue() {
        let engine = FftEngine::new();
        let spectrum = forced_negative_spectrum(&engine);
        match apply_policy(spectrum, NegEigPolicy::strict(), &engine, |_| {
            panic!("rebuild must not be called")
        }) {
            Err(EmbeddingError::NegativeEigenvalue { min_eig, index }) => {
                assert!((min_eig + 0.8).abs() < 1e-9);
                assert_eq!(index, 2);
            }
            other => panic!("expected strict failure, got {other:?}"),
        }
    }

    #[test]
    fn oversample_falls_back_to_clip_when_doublings_exhaust() {
        let engine = FftEngine::new();
        let biv = biv(
            vec![1.0, 0.9, 0.0, 0.0, 0.0],
            vec![1.0, 0.9, 0.0, 0.0, 0.0],
            vec![0.0; 5],
            vec![0.0; 5],
        );
        let spectrum = eigen_spectrum(&build_first_rows(&biv, 2).unwrap(), &engine);
        let applied = apply_policy(spectrum, NegEigPolicy::oversample(1), &engine, |m| {
            build_first_rows(&biv, m)
        })
        .unwrap();
        // m = 4 still has negative eigenvalues for this row, so the policy
        // clips after the single allowed doubling.
        assert!(applied.fell_back_to_clip);
        assert!(applied.inexact);
        assert_eq!(applied.spectrum.m(), 4);
    }

    #[test]
    fn oversample_propagates_missing_lags() {
        let engine = FftEngine::new();
        let biv = biv(
            vec![1.0, 0.9, 0.0],
            vec![1.0, 0.9, 0.0],
            vec![0.0; 3],
            vec![0.0; 3],
        );
        let spectrum = eigen_spectrum(&build_first_rows(&biv, 2).unwrap(), &engine);
        let result = apply_policy(spectrum, NegEigPolicy::oversample(3), &engine, |m| {
            build_first_rows(&biv, m)
        });
        assert!(matches!(
            result,
            Err(EmbeddingError::InsufficientLags { .. })
        ));
    }

    #[test]
    fn spectrum_csv_has_one_based_bins() {
        let engine = FftEngine::new();
        let biv = biv(
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0; 3],
            vec![0.0; 3],
        );
        let spectrum = eigen_spectrum(&build_first_rows(&biv, 2).unwrap(), &engine);
        let mut out = Vec::new();
        spectrum.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,lambda_xx,lambda_yy,re_lambda_xy,im_lambda_xy"
        );
        assert!(lines.next().unwrap().starts_with("1,"));
        assert_eq!(text.lines().count(), 5);
    }
}
