//! Covariance representations of a complex-valued stationary Gaussian
//! process and conversions between them.
//!
//! A process is specified either in the complex domain by its autocovariance
//! `s_zz` and complementary covariance `r_zz`, or equivalently in the
//! bivariate domain by the autocovariances of its real and imaginary parts
//! plus their (generally asymmetric) cross covariance. Only lags `0..=n` are
//! stored; negative lags follow from the symmetries `s_zz(-tau) =
//! conj(s_zz(tau))`, `r_zz(-tau) = r_zz(tau)`, and the even symmetry of the
//! component autocovariances.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::special::ln_gamma;

/// Absolute slack accepted when checking constraints that hold exactly in
/// real arithmetic (e.g. realness of the lag-0 variance).
const STRUCTURAL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CovarianceError {
    #[error("invalid covariance specification: {}", format_violations(.0))]
    InvalidSpec(Vec<SpecViolation>),
    #[error("invalid bivariate covariance: {0}")]
    InvalidBivariate(String),
    #[error("Hurst parameter must lie strictly inside (0, 1), got {0}")]
    InvalidHurst(f64),
    #[error("amplitudes must satisfy B^2 < A^2 with A, B >= 0, got A = {a}, B = {b}")]
    InvalidAmplitudes { a: f64, b: f64 },
    #[error("covariance lags available only up to {available}, but lag {requested} was requested")]
    InsufficientLags { available: usize, requested: usize },
    #[error("covariance CSV, line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(violations: &[SpecViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// One invariant violation found by [`validate_parts`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecViolation {
    /// `s_zz(0)` has a nonzero imaginary part.
    VarianceNotReal,
    /// `s_zz(0)` is zero or negative.
    VarianceNotPositive,
    /// `|r_zz(0)| > s_zz(0)`, so no bivariate representation exists.
    ComplementaryExceedsVariance,
    /// Sequences are empty or of mismatched length.
    MalformedSequences,
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecViolation::VarianceNotReal => write!(f, "s_zz(0) not real"),
            SpecViolation::VarianceNotPositive => write!(f, "s_zz(0) <= 0"),
            SpecViolation::ComplementaryExceedsVariance => write!(f, "|r_zz(0)| > s_zz(0)"),
            SpecViolation::MalformedSequences => {
                write!(f, "s_zz and r_zz must be nonempty and of equal length")
            }
        }
    }
}

/// Diagnostic check of the complex-domain invariants on raw sequences.
///
/// Returns every violation found (empty when the sequences form a valid
/// specification). Never fails; constructors reject on the same conditions.
pub fn validate_parts<T: Scalar>(s_zz: &[Complex<T>], r_zz: &[Complex<T>]) -> Vec<SpecViolation> {
    let mut violations = Vec::new();
    if s_zz.len() < 2 || s_zz.len() != r_zz.len() {
        violations.push(SpecViolation::MalformedSequences);
        return violations;
    }
    let tol = T::from_f64_c(STRUCTURAL_TOL);
    let s0 = s_zz[0];
    let scale = T::one().max(s0.re.abs());
    if s0.im.abs() > tol * scale {
        violations.push(SpecViolation::VarianceNotReal);
    }
    if s0.re <= T::zero() {
        violations.push(SpecViolation::VarianceNotPositive);
    } else if r_zz[0].norm() > s0.re * (T::one() + tol) {
        violations.push(SpecViolation::ComplementaryExceedsVariance);
    }
    violations
}

/// Complex-domain specification of the process over lags `0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec<T: Scalar> {
    s_zz: Vec<Complex<T>>,
    r_zz: Vec<Complex<T>>,
}

impl<T: Scalar> CovarianceSpec<T> {
    /// Builds a specification from the autocovariance and complementary
    /// covariance at lags `0..=n`, rejecting invariant violations.
    ///
    /// A lag-0 imaginary residue below 1e-12 (relative) is treated as
    /// round-off and stripped, so that `s_zz(0)` is exactly real.
    pub fn new(mut s_zz: Vec<Complex<T>>, r_zz: Vec<Complex<T>>) -> Result<Self, CovarianceError> {
        let violations = validate_parts(&s_zz, &r_zz);
        if !violations.is_empty() {
            return Err(CovarianceError::InvalidSpec(violations));
        }
        s_zz[0].im = T::zero();
        Ok(Self { s_zz, r_zz })
    }

    /// Maximum stored lag (also the target sequence length).
    pub fn n(&self) -> usize {
        self.s_zz.len() - 1
    }

    pub fn s_zz(&self) -> &[Complex<T>] {
        &self.s_zz
    }

    pub fn r_zz(&self) -> &[Complex<T>] {
        &self.r_zz
    }

    /// Autocovariance at a signed lag, via Hermitian symmetry.
    pub fn s_zz_at(&self, tau: isize) -> Complex<T> {
        let v = self.s_zz[tau.unsigned_abs()];
        if tau < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// Complementary covariance at a signed lag, via even symmetry.
    pub fn r_zz_at(&self, tau: isize) -> Complex<T> {
        self.r_zz[tau.unsigned_abs()]
    }

    /// Violations of the stored data against the invariants. Empty for any
    /// successfully constructed value.
    pub fn diagnostics(&self) -> Vec<SpecViolation> {
        validate_parts(&self.s_zz, &self.r_zz)
    }

    /// Bivariate representation restricted to lags `0..=max_lag`.
    pub fn bivariate_up_to(
        &self,
        max_lag: usize,
    ) -> Result<BivariateCovariance<T>, CovarianceError> {
        if max_lag > self.n() {
            return Err(CovarianceError::InsufficientLags {
                available: self.n(),
                requested: max_lag,
            });
        }
        let half = T::from_f64_c(0.5);
        let len = max_lag + 1;
        let mut s_xx = Vec::with_capacity(len);
        let mut s_yy = Vec::with_capacity(len);
        let mut s_xy_pos = Vec::with_capacity(len);
        let mut s_xy_neg = Vec::with_capacity(len);
        for (s, r) in self.s_zz[..len].iter().zip(&self.r_zz[..len]) {
            s_xx.push((s.re + r.re) * half);
            s_yy.push((s.re - r.re) * half);
            s_xy_pos.push((r.im - s.im) * half);
            s_xy_neg.push((s.im + r.im) * half);
        }
        Ok(BivariateCovariance {
            s_xx,
            s_yy,
            s_xy_pos,
            s_xy_neg,
        })
    }

    /// Copy of the specification truncated to `max_lag`.
    pub fn truncated(&self, max_lag: usize) -> Result<Self, CovarianceError> {
        if max_lag > self.n() {
            return Err(CovarianceError::InsufficientLags {
                available: self.n(),
                requested: max_lag,
            });
        }
        Self::new(
            self.s_zz[..=max_lag].to_vec(),
            self.r_zz[..=max_lag].to_vec(),
        )
    }

    /// Loads a specification from CSV with header `tau,re_s,im_s,re_r,im_r`
    /// and rows for consecutive lags `0..=n`.
    pub fn from_csv_reader<R: BufRead>(reader: R) -> Result<Self, CovarianceError> {
        let mut s_zz = Vec::new();
        let mut r_zz = Vec::new();
        let mut expected_tau = 0usize;
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !saw_header {
                let normalized: String = trimmed
                    .split(',')
                    .map(str::trim)
                    .collect::<Vec<_>>()
                    .join(",");
                if normalized != "tau,re_s,im_s,re_r,im_r" {
                    return Err(CovarianceError::Csv {
                        line: line_no,
                        message: format!(
                            "expected header 'tau,re_s,im_s,re_r,im_r', got '{trimmed}'"
                        ),
                    });
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(CovarianceError::Csv {
                    line: line_no,
                    message: format!("expected 5 fields, got {}", fields.len()),
                });
            }
            let tau: usize = fields[0].parse().map_err(|_| CovarianceError::Csv {
                line: line_no,
                message: format!("invalid lag '{}'", fields[0]),
            })?;
            if tau != expected_tau {
                return Err(CovarianceError::Csv {
                    line: line_no,
                    message: format!(
                        "expected lag {expected_tau}, got {tau} (rows must be consecutive from 0)"
                    ),
                });
            }
            let mut values = [0.0f64; 4];
            for (slot, field) in values.iter_mut().zip(&fields[1..]) {
                *slot = field.parse().map_err(|_| CovarianceError::Csv {
                    line: line_no,
                    message: format!("invalid number '{field}'"),
                })?;
            }
            s_zz.push(Complex::new(
                T::from_f64_c(values[0]),
                T::from_f64_c(values[1]),
            ));
            r_zz.push(Complex::new(
                T::from_f64_c(values[2]),
                T::from_f64_c(values[3]),
            ));
            expected_tau += 1;
        }
        if !saw_header {
            return Err(CovarianceError::Csv {
                line: 1,
                message: "missing header".to_string(),
            });
        }
        Self::new(s_zz, r_zz)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, CovarianceError> {
        Self::from_csv_reader(BufReader::new(File::open(path)?))
    }
}

/// Bivariate-domain covariances of the real and imaginary component
/// processes over lags `0..=n`, with both signs of the cross covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateCovariance<T: Scalar> {
    s_xx: Vec<T>,
    s_yy: Vec<T>,
    s_xy_pos: Vec<T>,
    s_xy_neg: Vec<T>,
}

impl<T: Scalar> BivariateCovariance<T> {
    pub fn new(
        s_xx: Vec<T>,
        s_yy: Vec<T>,
        s_xy_pos: Vec<T>,
        s_xy_neg: Vec<T>,
    ) -> Result<Self, CovarianceError> {
        let len = s_xx.len();
        if len < 2 || s_yy.len() != len || s_xy_pos.len() != len || s_xy_neg.len() != len {
            return Err(CovarianceError::InvalidBivariate(
                "sequences must be nonempty and of equal length".to_string(),
            ));
        }
        if s_xx[0] < T::zero() || s_yy[0] < T::zero() {
            return Err(CovarianceError::InvalidBivariate(
                "component variances s_xx(0), s_yy(0) must be nonnegative".to_string(),
            ));
        }
        let scale = T::one().max(s_xy_pos[0].abs());
        if (s_xy_pos[0] - s_xy_neg[0]).abs() > T::from_f64_c(STRUCTURAL_TOL) * scale {
            return Err(CovarianceError::InvalidBivariate(
                "s_xy(0) must agree between the positive- and negative-lag sequences".to_string(),
            ));
        }
        Ok(Self {
            s_xx,
            s_yy,
            s_xy_pos,
            s_xy_neg,
        })
    }

    pub fn n(&self) -> usize {
        self.s_xx.len() - 1
    }

    pub fn s_xx(&self) -> &[T] {
        &self.s_xx
    }

    pub fn s_yy(&self) -> &[T] {
        &self.s_yy
    }

    pub fn s_xy_pos(&self) -> &[T] {
        &self.s_xy_pos
    }

    pub fn s_xy_neg(&self) -> &[T] {
        &self.s_xy_neg
    }

    /// Component autocovariance at a signed lag (even extension).
    pub fn s_xx_at(&self, tau: isize) -> T {
        self.s_xx[tau.unsigned_abs()]
    }

    pub fn s_yy_at(&self, tau: isize) -> T {
        self.s_yy[tau.unsigned_abs()]
    }

    /// Cross covariance at a signed lag; positive and negative lags are
    /// distinct sequences in general.
    pub fn s_xy_at(&self, tau: isize) -> T {
        if tau >= 0 {
            self.s_xy_pos[tau as usize]
        } else {
            self.s_xy_neg[tau.unsigned_abs()]
        }
    }
}

/// Converts a complex-domain specification into the bivariate representation.
pub fn complex_to_bivariate<T: Scalar>(spec: &CovarianceSpec<T>) -> BivariateCovariance<T> {
    spec.bivariate_up_to(spec.n())
        .expect("full lag range is always available")
}

/// Converts a bivariate representation back into the complex domain.
pub fn bivariate_to_complex<T: Scalar>(
    biv: &BivariateCovariance<T>,
) -> Result<CovarianceSpec<T>, CovarianceError> {
    let len = biv.n() + 1;
    let mut s_zz = Vec::with_capacity(len);
    let mut r_zz = Vec::with_capacity(len);
    for tau in 0..len {
        let (xx, yy) = (biv.s_xx[tau], biv.s_yy[tau]);
        let (pos, neg) = (biv.s_xy_pos[tau], biv.s_xy_neg[tau]);
        s_zz.push(Complex::new(xx + yy, neg - pos));
        r_zz.push(Complex::new(xx - yy, neg + pos));
    }
    CovarianceSpec::new(s_zz, r_zz)
}

/// Parameters of the improper fractional Gaussian noise family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgnParams<T: Scalar> {
    hurst: T,
    amp_a: T,
    amp_b: T,
}

impl<T: Scalar> FgnParams<T> {
    pub fn new(hurst: T, amp_a: T, amp_b: T) -> Result<Self, CovarianceError> {
        if !(hurst > T::zero() && hurst < T::one()) {
            return Err(CovarianceError::InvalidHurst(
                hurst.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let valid = amp_a >= T::zero() && amp_b >= T::zero() && amp_b * amp_b < amp_a * amp_a;
        if !valid {
            return Err(CovarianceError::InvalidAmplitudes {
                a: amp_a.to_f64().unwrap_or(f64::NAN),
                b: amp_b.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            hurst,
            amp_a,
            amp_b,
        })
    }

    /// Parameters normalized to unit process variance: `A = 1/sqrt(V_H)` and
    /// `B^2 = ratio * A^2` for a complementary ratio in `[0, 1)`.
    pub fn unit_variance(hurst: T, ratio: T) -> Result<Self, CovarianceError> {
        if !(hurst > T::zero() && hurst < T::one()) {
            return Err(CovarianceError::InvalidHurst(
                hurst.to_f64().unwrap_or(f64::NAN),
            ));
        }
        let amp_a = T::one() / hurst_normalizer(hurst).sqrt();
        Self::new(hurst, amp_a, amp_a * ratio.sqrt())
    }

    pub fn hurst(&self) -> T {
        self.hurst
    }

    pub fn amp_a(&self) -> T {
        self.amp_a
    }

    pub fn amp_b(&self) -> T {
        self.amp_b
    }
}

/// Normalizing constant `V_H = Gamma(H) Gamma(1-H) / (pi Gamma(2H + 1))`,
/// evaluated in log space. `V_{1/2} = 1` exactly.
pub fn hurst_normalizer<T: Scalar>(hurst: T) -> T {
    assert!(
        hurst > T::zero() && hurst < T::one(),
        "Hurst parameter must lie in (0, 1)"
    );
    let half = T::from_f64_c(0.5);
    if hurst == half {
        return T::one();
    }
    let one = T::one();
    let two = T::from_f64_c(2.0);
    let ln_vh =
        ln_gamma(hurst) + ln_gamma(one - hurst) - T::PI().ln() - ln_gamma(two * hurst + one);
    ln_vh.exp()
}

/// Second central difference of `|tau|^{2H}`, the lag kernel shared by the
/// autocovariance and complementary covariance of fractional Gaussian noise.
///
/// The textbook form `(tau+1)^{2H} + (tau-1)^{2H} - 2 tau^{2H}` cancels
/// catastrophically as tau grows (absolute error ~eps * tau^{2H}), which for
/// H near 1 already corrupts second differences of the covariance at lags
/// in the hundreds. For tau >= 2 the kernel is therefore evaluated as
/// `tau^{2H} ((1+u)^{2H} + (1-u)^{2H} - 2)` with `u = 1/tau`, each binomial
/// term via `exp_m1(2H ln_1p(+-u))` so the leading 1s never enter the sum.
fn fgn_kernel<T: Scalar>(tau: usize, two_h: T) -> T {
    match tau {
        0 => T::from_f64_c(2.0),
        1 => T::from_f64_c(2.0).powf(two_h) - T::from_f64_c(2.0),
        _ => {
            let t = T::from_f64_c(tau as f64);
            let u = t.recip();
            let plus = (two_h * u.ln_1p()).exp_m1();
            let minus = (two_h * (-u).ln_1p()).exp_m1();
            t.powf(two_h) * (plus + minus)
        }
    }
}

/// Autocovariance of fractional Gaussian noise at lags `0..=max_lag`:
/// `(V_H / 2) A^2 (|tau+1|^{2H} + |tau-1|^{2H} - 2|tau|^{2H})`.
pub fn fgn_autocovariance<T: Scalar>(
    hurst: T,
    amplitude: T,
    max_lag: usize,
) -> Result<Vec<T>, CovarianceError> {
    if !(hurst > T::zero() && hurst < T::one()) {
        return Err(CovarianceError::InvalidHurst(
            hurst.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if amplitude < T::zero() {
        return Err(CovarianceError::InvalidAmplitudes {
            a: amplitude.to_f64().unwrap_or(f64::NAN),
            b: 0.0,
        });
    }
    let half = T::from_f64_c(0.5);
    if hurst == half {
        // White noise: the kernel vanishes at every nonzero lag and V_H = 1.
        let mut seq = vec![T::zero(); max_lag + 1];
        seq[0] = amplitude * amplitude;
        return Ok(seq);
    }
    let two_h = hurst + hurst;
    let coeff = hurst_normalizer(hurst) * half * amplitude * amplitude;
    Ok((0..=max_lag)
        .map(|tau| coeff * fgn_kernel(tau, two_h))
        .collect())
}

/// Improper fGn specification: `s_zz` with amplitude `A` and `r_zz` the same
/// sequence with amplitude `B`, both purely real.
pub fn improper_fgn_spec<T: Scalar>(params: &FgnParams<T>, max_lag: usize) -> CovarianceSpec<T> {
    let s = fgn_autocovariance(params.hurst, params.amp_a, max_lag)
        .expect("parameters validated at construction");
    let r = fgn_autocovariance(params.hurst, params.amp_b, max_lag)
        .expect("parameters validated at construction");
    let to_complex = |v: Vec<T>| v.into_iter().map(|x| Complex::new(x, T::zero())).collect();
    CovarianceSpec::new(to_complex(s), to_complex(r))
        .expect("fGn specification is valid by construction")
}

/// A process definition the sampler can query for covariances at arbitrary
/// lags: a generator-backed model, or a fixed finite table of lags.
#[derive(Debug, Clone)]
pub enum CovarianceSource<T: Scalar> {
    Fgn(FgnParams<T>),
    Fixed(CovarianceSpec<T>),
}

impl<T: Scalar> CovarianceSource<T> {
    /// Specification covering lags `0..=max_lag`. Fixed sources fail when
    /// asked for lags beyond their table; generator-backed sources never do.
    pub fn spec(&self, max_lag: usize) -> Result<CovarianceSpec<T>, CovarianceError> {
        match self {
            CovarianceSource::Fgn(params) => Ok(improper_fgn_spec(params, max_lag)),
            CovarianceSource::Fixed(spec) => spec.truncated(max_lag),
        }
    }

    pub fn bivariate(&self, max_lag: usize) -> Result<BivariateCovariance<T>, CovarianceError> {
        self.spec(max_lag).map(|s| complex_to_bivariate(&s))
    }

    /// Largest available lag, or `None` when unbounded.
    pub fn max_lag(&self) -> Option<usize> {
        match self {
            CovarianceSource::Fgn(_) => None,
            CovarianceSource::Fixed(spec) => Some(spec.n()),
        }
    }
}
