//! Ahead-of-time decision of whether the circulant embedding is guaranteed
//! exact for every embedding length m >= n: time-reversibility plus
//! nonnegative definiteness of the 2x2 lag matrices R_tau and their first
//! and second differences. When both covariance sequences are real, the
//! equivalent complex-domain inequalities are evaluated as corroboration.

use num_complex::Complex;
use serde::Serialize;

use crate::covariance::{complex_to_bivariate, BivariateCovariance, CovarianceSpec};
use crate::embedding::{build_first_rows, eigen_spectrum};
use crate::fft::FftEngine;
use crate::scalar::Scalar;

/// Absolute tolerance for symmetry and applicability checks that hold
/// exactly in real arithmetic.
const SYMMETRY_TOL: f64 = 1e-12;

/// Relative slack for the nonnegative-definiteness determinant test.
const DEFINITENESS_TOL: f64 = 1e-12;

/// The 2x2 covariance matrix of the component pair at one lag:
/// `[[s_xx(tau), s_xy(tau)], [s_xy(-tau), s_yy(tau)]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagMatrix<T: Scalar> {
    pub tau: usize,
    pub entries: [[T; 2]; 2],
}

/// Builds the lag matrix `R_tau` from a bivariate covariance.
pub fn lag_matrix<T: Scalar>(biv: &BivariateCovariance<T>, tau: usize) -> LagMatrix<T> {
    let t = tau as isize;
    LagMatrix {
        tau,
        entries: [
            [biv.s_xx_at(t), biv.s_xy_at(t)],
            [biv.s_xy_at(-t), biv.s_yy_at(t)],
        ],
    }
}

/// Outcome of one scalar condition checked across a lag range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConditionResult {
    pub holds: bool,
    pub first_offending_lag: Option<usize>,
}

impl ConditionResult {
    fn passing() -> Self {
        Self {
            holds: true,
            first_offending_lag: None,
        }
    }

    fn failing(lag: usize) -> Self {
        Self {
            holds: false,
            first_offending_lag: Some(lag),
        }
    }
}

/// Complex-domain corroboration: applicable only when both sequences are
/// purely real.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComplexConditions {
    /// `Im(s_zz)` or `Im(r_zz)` is nonzero, so the diagonal-R form of the
    /// conditions does not apply.
    NotApplicable,
    Checked {
        c1: ConditionResult,
        c2: ConditionResult,
        c3: ConditionResult,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GuaranteedExact,
    NotGuaranteed,
}

/// Full exactness decision for one specification.
#[derive(Debug, Clone, Serialize)]
pub struct ExactnessReport {
    pub time_reversible: bool,
    pub cond_r: ConditionResult,
    pub cond_dr: ConditionResult,
    pub cond_d2r: ConditionResult,
    pub complex_conditions: ComplexConditions,
    pub verdict: Verdict,
    /// Largest lag entering the undifferenced condition; differences use
    /// correspondingly shorter ranges.
    pub checked_lags: usize,
    /// Minimum circulant eigenvalue at m = n, when the caller asked for the
    /// embedding corroboration.
    pub min_eig: Option<f64>,
}

/// True iff `s_xy(tau) = s_xy(-tau)` for every stored lag (within 1e-12).
pub fn check_time_reversible<T: Scalar>(biv: &BivariateCovariance<T>) -> bool {
    let tol = T::from_f64_c(SYMMETRY_TOL);
    biv.s_xy_pos()
        .iter()
        .zip(biv.s_xy_neg())
        .all(|(&pos, &neg)| (pos - neg).abs() <= tol)
}

fn max_abs_entry<T: Scalar>(m: &[[T; 2]; 2]) -> T {
    m.iter()
        .flatten()
        .fold(T::zero(), |acc, &v| acc.max(v.abs()))
}

/// Nonnegative definiteness of a 2x2 matrix in the quadratic-form sense:
/// the symmetric part must have nonnegative diagonal and determinant, up to
/// a scale-aware round-off slack.
fn nonneg_definite<T: Scalar>(m: &[[T; 2]; 2]) -> bool {
    let tol = T::from_f64_c(DEFINITENESS_TOL) * (T::one() + max_abs_entry(m));
    let off = (m[0][1] + m[1][0]) * T::from_f64_c(0.5);
    let det = m[0][0] * m[1][1] - off * off;
    m[0][0] >= -tol && m[1][1] >= -tol && det >= -tol
}

fn check_condition<T: Scalar>(
    max_tau: usize,
    matrix_at: impl Fn(usize) -> [[T; 2]; 2],
) -> ConditionResult {
    for tau in 0..=max_tau {
        if !nonneg_definite(&matrix_at(tau)) {
            return ConditionResult::failing(tau);
        }
    }
    ConditionResult::passing()
}

fn sub<T: Scalar>(a: [[T; 2]; 2], b: [[T; 2]; 2]) -> [[T; 2]; 2] {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

/// Checks nonnegative definiteness of `R_tau`, `R_tau - R_{tau+1}`, and
/// `R_tau - 2 R_{tau+1} + R_{tau+2}` over the available lag range.
pub fn check_matrix_conditions<T: Scalar>(
    biv: &BivariateCovariance<T>,
) -> (ConditionResult, ConditionResult, ConditionResult) {
    let n = biv.n();
    let at = |tau: usize| lag_matrix(biv, tau).entries;
    let cond_r = check_condition(n, at);
    let cond_dr = check_condition(n - 1, |tau| sub(at(tau), at(tau + 1)));
    let cond_d2r = if n >= 2 {
        check_condition(n - 2, |tau| {
            sub(sub(at(tau), at(tau + 1)), sub(at(tau + 1), at(tau + 2)))
        })
    } else {
        ConditionResult::passing()
    };
    (cond_r, cond_dr, cond_d2r)
}

/// Complex-domain exactness inequalities on raw sequences. Applicable only
/// when both sequences are real; returns `NotApplicable` otherwise.
pub fn check_complex_conditions_parts<T: Scalar>(
    s_zz: &[Complex<T>],
    r_zz: &[Complex<T>],
) -> ComplexConditions {
    let tol = T::from_f64_c(SYMMETRY_TOL);
    let imag_free = s_zz.iter().chain(r_zz.iter()).all(|v| v.im.abs() <= tol);
    if !imag_free || s_zz.len() != r_zz.len() || s_zz.is_empty() {
        return ComplexConditions::NotApplicable;
    }
    let s: Vec<T> = s_zz.iter().map(|v| v.re).collect();
    let r: Vec<T> = r_zz.iter().map(|v| v.re).collect();
    let scale = s.iter().fold(T::one(), |acc, &v| acc.max(v.abs()));
    let slack = T::from_f64_c(DEFINITENESS_TOL) * scale;
    let n = s.len() - 1;
    let two = T::from_f64_c(2.0);

    let scan = |max_tau: usize, holds_at: &dyn Fn(usize) -> bool| -> ConditionResult {
        for tau in 0..=max_tau {
            if !holds_at(tau) {
                return ConditionResult::failing(tau);
            }
        }
        ConditionResult::passing()
    };

    let c1 = scan(n, &|tau| r[tau].abs() <= s[tau] + slack);
    let c2 = if n >= 1 {
        scan(n - 1, &|tau| {
            (r[tau] - r[tau + 1]).abs() <= s[tau] - s[tau + 1] + slack
        })
    } else {
        ConditionResult::passing()
    };
    let c3 = if n >= 2 {
        scan(n - 2, &|tau| {
            (r[tau] - two * r[tau + 1] + r[tau + 2]).abs()
                <= s[tau] - two * s[tau + 1] + s[tau + 2] + slack
        })
    } else {
        ConditionResult::passing()
    };
    ComplexConditions::Checked { c1, c2, c3 }
}

/// Complex-domain conditions for a validated specification.
pub fn check_complex_conditions<T: Scalar>(spec: &CovarianceSpec<T>) -> ComplexConditions {
    check_complex_conditions_parts(spec.s_zz(), spec.r_zz())
}

/// Runs all checks and renders the verdict: guaranteed exact iff the
/// process is time-reversible and all three matrix conditions hold.
pub fn exactness_report<T: Scalar>(spec: &CovarianceSpec<T>) -> ExactnessReport {
    let biv = complex_to_bivariate(spec);
    let time_reversible = check_time_reversible(&biv);
    let (cond_r, cond_dr, cond_d2r) = check_matrix_conditions(&biv);
    let complex_conditions = check_complex_conditions(spec);
    let verdict = if time_reversible && cond_r.holds && cond_dr.holds && cond_d2r.holds {
        Verdict::GuaranteedExact
    } else {
        Verdict::NotGuaranteed
    };
    ExactnessReport {
        time_reversible,
        cond_r,
        cond_dr,
        cond_d2r,
        complex_conditions,
        verdict,
        checked_lags: biv.n(),
        min_eig: None,
    }
}

/// As [`exactness_report`], additionally recording the minimum circulant
/// eigenvalue of the m = n embedding as corroborating evidence.
pub fn exactness_report_with_embedding<T: Scalar>(
    spec: &CovarianceSpec<T>,
    engine: &FftEngine<T>,
) -> ExactnessReport {
    let mut report = exactness_report(spec);
    let biv = complex_to_bivariate(spec);
    if let Ok(rows) = build_first_rows(&biv, biv.n()) {
        let spectrum = eigen_spectrum(&rows, engine);
        report.min_eig = spectrum.min_eig().to_f64();
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{improper_fgn_spec, FgnParams};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn spec(s: Vec<Complex<f64>>, r: Vec<Complex<f64>>) -> CovarianceSpec<f64> {
        CovarianceSpec::new(s, r).unwrap()
    }

    fn real_spec(s: &[f64], r: &[f64]) -> CovarianceSpec<f64> {
        spec(
            s.iter().map(|&v| c(v, 0.0)).collect(),
            r.iter().map(|&v| c(v, 0.0)).collect(),
        )
    }

    #[test]
    fn lag_matrix_layout() {
        let spec = spec(vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 0.0); 2]);
        let biv = complex_to_bivariate(&spec);
        let r1 = lag_matrix(&biv, 1);
        assert_eq!(r1.entries, [[0.0, -0.5], [0.5, 0.0]]);
        let r0 = lag_matrix(&biv, 0);
        assert_eq!(r0.entries[0][1], r0.entries[1][0]);
    }

    #[test]
    fn real_specs_are_time_reversible() {
        let params = FgnParams::unit_variance(0.7f64, 0.3).unwrap();
        let biv = complex_to_bivariate(&improper_fgn_spec(&params, 32));
        assert!(check_time_reversible(&biv));
    }

    #[test]
    fn imaginary_autocovariance_breaks_time_reversibility() {
        let spec = spec(vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 0.0); 2]);
        assert!(!check_time_reversible(&complex_to_bivariate(&spec)));
    }

    #[test]
    fn proper_specs_with_zero_cross_covariance_are_reversible() {
        let spec = real_spec(&[1.0, 0.5, 0.2], &[0.0, 0.0, 0.0]);
        assert!(check_time_reversible(&complex_to_bivariate(&spec)));
    }

    #[test]
    fn fgn_satisfies_all_matrix_conditions() {
        let params = FgnParams::new(0.75f64, 1.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let spec = improper_fgn_spec(&params, 1000);
        let (r, dr, d2r) = check_matrix_conditions(&complex_to_bivariate(&spec));
        assert!(r.holds && dr.holds && d2r.holds);
    }

    #[test]
    fn nonmonotone_autocovariance_fails_the_first_difference() {
        let spec = real_spec(&[1.0, 0.0, 0.5], &[0.0, 0.0, 0.0]);
        let (r, dr, _) = check_matrix_conditions(&complex_to_bivariate(&spec));
        assert!(r.holds);
        assert!(!dr.holds);
        assert_eq!(dr.first_offending_lag, Some(1));
    }

    #[test]
    fn white_noise_passes_everything() {
        let spec = real_spec(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]);
        let (r, dr, d2r) = check_matrix_conditions(&complex_to_bivariate(&spec));
        assert!(r.holds && dr.holds && d2r.holds);
    }

    #[test]
    fn complex_conditions_hold_for_fgn() {
        for &h in &[0.5f64, 0.6, 0.75, 0.9] {
            let params = FgnParams::new(h, 1.0, 0.6).unwrap();
            let spec = improper_fgn_spec(&params, 256);
            match check_complex_conditions(&spec) {
                ComplexConditions::Checked { c1, c2, c3 } => {
                    assert!(c1.holds && c2.holds && c3.holds, "H = {h}");
                }
                ComplexConditions::NotApplicable => panic!("fGn sequences are real"),
            }
        }
    }

    #[test]
    fn oversized_complementary_fails_at_lag_zero() {
        // Invalid data forced through the raw interface.
        let s = [c(1.0, 0.0), c(0.5, 0.0)];
        let r = [c(2.0, 0.0), c(0.4, 0.0)];
        match check_complex_conditions_parts(&s, &r) {
            ComplexConditions::Checked { c1, .. } => {
                assert!(!c1.holds);
                assert_eq!(c1.first_offending_lag, Some(0));
            }
            ComplexConditions::NotApplicable => panic!("sequences are real"),
        }
    }

    #[test]
    fn zero_complementary_bound_is_trivial() {
        let spec = real_spec(&[1.0, 0.6, 0.35, 0.2], &[0.0; 4]);
        match check_complex_conditions(&spec) {
            ComplexConditions::Checked { c1, c2, c3 } => {
                assert!(c1.holds && c2.holds && c3.holds);
            }
            ComplexConditions::NotApplicable => panic!(),
        }
    }

    #[test]
    fn imaginary_parts_disable_the_complex_conditions() {
        let spec = spec(vec![c(1.0, 0.0), c(0.0, 0.4)], vec![c(0.0, 0.0); 2]);
        assert_eq!(
            check_complex_conditions(&spec),
            ComplexConditions::NotApplicable
        );
    }

    #[test]
    fn report_verdicts_match_the_examples() {
        let params = FgnParams::new(0.75f64, 1.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let good = exactness_report(&improper_fgn_spec(&params, 128));
        assert_eq!(good.verdict, Verdict::GuaranteedExact);

        let irreversible =
            exactness_report(&spec(vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 0.0); 2]));
        assert_eq!(irreversible.verdict, Verdict::NotGuaranteed);
        assert!(!irreversible.time_reversible);

        let bumpy = exactness_report(&real_spec(&[1.0, 0.0, 0.5], &[0.0; 3]));
        assert_eq!(bumpy.verdict, Verdict::NotGuaranteed);
        assert_eq!(bumpy.cond_dr.first_offending_lag, Some(1));
    }

    #[test]
    fn report_with_embedding_records_min_eig() {
        let engine = FftEngine::new();
        let params = FgnParams::new(0.75f64, 1.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let report = exactness_report_with_embedding(&improper_fgn_spec(&params, 64), &engine);
        assert!(report.min_eig.unwrap() > 0.0);
    }

    #[test]
    fn report_serializes_with_snake_case_verdict() {
        let params = FgnParams::unit_variance(0.75f64, 0.5).unwrap();
        let report = exactness_report(&improper_fgn_spec(&params, 16));
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"verdict\":\"guaranteed_exact\""));
        assert!(json.contains("\"time_reversible\":true"));
    }
}
