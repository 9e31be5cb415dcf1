//! Command-line front end: simulation batches, exactness reports,
//! eigenvalue sweeps, RMS experiments, and the deterministic covariance
//! oracle, with reproducible seeds and machine-readable artifacts.
//!
//! Exit codes: 0 success (or guaranteed exact / oracle pass), 1 not
//! guaranteed or oracle failure, 2 invalid configuration, 3 negative
//! eigenvalue under the strict policy. Codes 1-3 emit one machine-parsable
//! `noncirc: code=.. reason=..` line on stderr.

mod manifest;
mod output;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use noncirc::covariance::complex_to_bivariate;
use noncirc::covariance::{hurst_normalizer, CovarianceSource, CovarianceSpec, FgnParams};
use noncirc::embedding::{
    build_first_rows, eigen_spectrum, EmbeddingError, NegEigPolicy, PolicyMode,
};
use noncirc::exactness::{exactness_report_with_embedding, Verdict};
use noncirc::fft::FftEngine;
use noncirc::sampler::{simulate_batch, SamplerError};
use noncirc::validation::{
    exact_output_covariance, min_eigenvalue_sweep, rms_experiment, theoretical_covariance,
    write_rms_csv, write_sweep_csv, ValidationError,
};

/// Tolerance of the deterministic covariance oracle check.
const ORACLE_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(
    name = "noncirc",
    version,
    about = "Simulate improper complex-valued stationary Gaussian processes via circulant embedding"
)]
struct Cli {
    /// Cap the number of worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a batch of sequences and write them to disk.
    Simulate(SimulateArgs),
    /// Decide whether the embedding is guaranteed exact for a model.
    Check(CheckArgs),
    /// Sweep the minimum circulant eigenvalue over (H, n) cells.
    Eigs(EigsArgs),
    /// Reproduce the RMS-versus-n experiment.
    Rms(RmsArgs),
    /// Compare the exact pipeline covariance against the model covariance.
    OracleCheck(OracleCheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Fgn,
    Csv,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Process model: generator-backed fGn, or a covariance table from CSV.
    #[arg(long, value_enum, default_value_t = ModelKind::Fgn)]
    model: ModelKind,
    /// Hurst parameter in (0, 1) (fgn model).
    #[arg(long)]
    hurst: Option<f64>,
    /// Autocovariance amplitude A: a number, or `auto` for 1/sqrt(V_H).
    #[arg(long, default_value = "auto")]
    amp_a: String,
    /// Complementary amplitude B: a number, or `ratio:q` for B^2 = q A^2.
    #[arg(long, default_value = "ratio:0.5")]
    amp_b: String,
    /// Covariance CSV path with header tau,re_s,im_s,re_r,im_r (csv model).
    #[arg(long)]
    path: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    Strict,
    Clip,
    Oversample,
}

#[derive(Args, Clone, Copy)]
struct PolicyArgs {
    /// Negative-eigenvalue policy. Clipping makes the output approximate.
    #[arg(long, value_enum, default_value_t = PolicyKind::Strict)]
    policy: PolicyKind,
    /// Embedding doublings before oversample falls back to clipping.
    #[arg(long, default_value_t = 6)]
    max_doublings: u32,
}

impl PolicyArgs {
    fn to_policy(self) -> NegEigPolicy {
        let mode = match self.policy {
            PolicyKind::Strict => PolicyMode::Strict,
            PolicyKind::Clip => PolicyMode::Clip,
            PolicyKind::Oversample => PolicyMode::Oversample,
        };
        NegEigPolicy {
            mode,
            max_doublings: self.max_doublings,
        }
    }

    fn label(&self) -> &'static str {
        match self.policy {
            PolicyKind::Strict => "strict",
            PolicyKind::Clip => "clip",
            PolicyKind::Oversample => "oversample",
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Sequence length.
    #[arg(short)]
    n: usize,
    /// Number of sequences to generate (ceil(reps/2) synthesis runs).
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// RNG seed; reruns with the same seed are byte-identical.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Output data file (CSV or binary).
    #[arg(long)]
    out: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value_t = output::Format::Csv)]
    format: output::Format,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Target sequence length (fgn model).
    #[arg(short)]
    n: Option<usize>,
    /// Lag range for the conditions; defaults to 4n for fgn models and to
    /// the full table for csv models.
    #[arg(long)]
    check_lags: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EigsArgs {
    /// Comma-separated Hurst values.
    #[arg(
        long,
        default_value = "0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9,0.95,0.9999"
    )]
    hurst_list: String,
    /// Comma-separated sequence lengths; default 2^4..2^12.
    #[arg(long, default_value = "16,32,64,128,256,512,1024,2048,4096")]
    n_list: String,
    /// Autocovariance amplitude A (number; `auto` is per-H).
    #[arg(long, default_value = "1")]
    amp_a: String,
    /// Complementary amplitude B (number or `ratio:q`).
    #[arg(long, default_value = "ratio:0.5")]
    amp_b: String,
    /// Dump the full eigen-spectrum CSV instead of the sweep; requires a
    /// single H and a single n.
    #[arg(long)]
    spectrum: bool,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RmsArgs {
    /// Hurst parameter.
    #[arg(long, default_value_t = 0.75)]
    hurst: f64,
    /// Autocovariance amplitude A (number or `auto`).
    #[arg(long, default_value = "auto")]
    amp_a: String,
    /// Complementary amplitude B (number or `ratio:q`).
    #[arg(long, default_value = "ratio:0.5")]
    amp_b: String,
    /// Comma-separated sequence lengths; default 10,20,...,1000.
    #[arg(long)]
    n_list: Option<String>,
    /// Replicates per length.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Output length for the oracle (kept small; dense algebra).
    #[arg(short, default_value_t = 4)]
    n: usize,
    /// Embedding half-length; defaults to n.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    policy: PolicyArgs,
}

/// A failed run: exit code plus a machine-parsable reason.
struct Failure {
    code: u8,
    reason: String,
    detail: String,
}

impl Failure {
    fn config(detail: impl Display) -> Self {
        Self {
            code: 2,
            reason: "invalid-config".into(),
            detail: detail.to_string(),
        }
    }
}

fn map_embedding(err: &EmbeddingError) -> Option<Failure> {
    if let EmbeddingError::NegativeEigenvalue { min_eig, index } = err {
        Some(Failure {
            code: 3,
            reason: "strict-negative-eigenvalue".into(),
            detail: format!("min_eig={min_eig:e} k={index}"),
        })
    } else {
        None
    }
}

impl From<SamplerError> for Failure {
    fn from(err: SamplerError) -> Self {
        if let SamplerError::Embedding(inner) = &err {
            if let Some(failure) = map_embedding(inner) {
                return failure;
            }
        }
        Failure::config(err)
    }
}

impl From<ValidationError> for Failure {
    fn from(err: ValidationError) -> Self {
        match &err {
            ValidationError::Embedding(inner) => {
                map_embedding(inner).unwrap_or_else(|| Failure::config(&err))
            }
            ValidationError::Sampler(SamplerError::Embedding(inner)) => {
                map_embedding(inner).unwrap_or_else(|| Failure::config(&err))
            }
            _ => Failure::config(err),
        }
    }
}

impl ModelArgs {
    fn amplitudes(&self, hurst: f64) -> Result<(f64, f64), Failure> {
        let amp_a = if self.amp_a == "auto" {
            1.0 / hurst_normalizer(hurst).sqrt()
        } else {
            self.amp_a.parse::<f64>().map_err(|_| {
                Failure::config(format!(
                    "--amp-a must be a number or 'auto', got '{}'",
                    self.amp_a
                ))
            })?
        };
        let amp_b = if let Some(ratio) = self.amp_b.strip_prefix("ratio:") {
            let q: f64 = ratio.parse().map_err(|_| {
                Failure::config(format!(
                    "--amp-b ratio must be a number, got '{}'",
                    self.amp_b
                ))
            })?;
            if !(0.0..1.0).contains(&q) {
                return Err(Failure::config(format!(
                    "--amp-b ratio must lie in [0, 1), got {q}"
                )));
            }
            amp_a * q.sqrt()
        } else {
            self.amp_b.parse::<f64>().map_err(|_| {
                Failure::config(format!(
                    "--amp-b must be a number or 'ratio:q', got '{}'",
                    self.amp_b
                ))
            })?
        };
        Ok((amp_a, amp_b))
    }

    fn source(&self) -> Result<CovarianceSource<f64>, Failure> {
        match self.model {
            ModelKind::Fgn => {
                let hurst = self
                    .hurst
                    .ok_or_else(|| Failure::config("--hurst is required for the fgn model"))?;
                if !(0.0..=1.0).contains(&hurst) || hurst == 0.0 || hurst == 1.0 {
                    return Err(Failure::config(format!(
                        "--hurst must lie strictly inside (0, 1), got {hurst}"
                    )));
                }
                let (amp_a, amp_b) = self.amplitudes(hurst)?;
                let params = FgnParams::new(hurst, amp_a, amp_b).map_err(Failure::config)?;
                Ok(CovarianceSource::Fgn(params))
            }
            ModelKind::Csv => {
                let path = self
                    .path
                    .as_ref()
                    .ok_or_else(|| Failure::config("--path is required for the csv model"))?;
                let spec = CovarianceSpec::from_csv_path(path).map_err(Failure::config)?;
                Ok(CovarianceSource::Fixed(spec))
            }
        }
    }

    fn manifest_json(&self, source: &CovarianceSource<f64>) -> serde_json::Value {
        match (self.model, source) {
            (ModelKind::Fgn, CovarianceSource::Fgn(params)) => serde_json::json!({
                "kind": "fgn",
                "hurst": params.hurst(),
                "amp_a": params.amp_a(),
                "amp_b": params.amp_b(),
                "amp_a_arg": self.amp_a,
                "amp_b_arg": self.amp_b,
            }),
            (ModelKind::Csv, CovarianceSource::Fixed(spec)) => serde_json::json!({
                "kind": "csv",
                "path": self.path.as_ref().map(|p| p.display().to_string()),
                "max_lag": spec.n(),
            }),
            _ => serde_json::Value::Null,
        }
    }
}

/// Relative output paths land under `NONCIRC_OUT_DIR` when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("NONCIRC_OUT_DIR") {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

fn parse_usize_list(text: &str, flag: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Failure::config(format!("{flag}: invalid integer '{s}'")))
        })
        .collect()
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Failure::config(format!("{flag}: invalid number '{s}'")))
        })
        .collect()
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    if args.n == 0 {
        return Err(Failure::config("-n must be positive"));
    }
    if args.reps == 0 {
        return Err(Failure::config("--reps must be at least 1"));
    }
    let source = args.model.source()?;
    if args.policy.policy == PolicyKind::Oversample && args.model.model == ModelKind::Csv {
        return Err(Failure::config(
            "oversample policy needs covariances beyond the table; supply more lags or use a generator-backed model",
        ));
    }
    let policy = args.policy.to_policy();
    let batch = simulate_batch(&source, args.n, args.reps, policy, args.seed)?;
    let out = resolve_out(&args.out);
    output::write_batch(&batch, args.n, args.format, &out).map_err(Failure::config)?;
    let manifest_path = manifest::sibling_path(&out);
    manifest::write(
        &manifest_path,
        serde_json::json!({
            "command": "simulate",
            "model": args.model.manifest_json(&source),
            "n": args.n,
            "reps": args.reps,
            "seed": args.seed,
            "policy": {"mode": args.policy.label(), "max_doublings": args.policy.max_doublings},
            "runs": batch.runs,
            "inexact": batch.inexact,
            "format": args.format.label(),
            "output": out.display().to_string(),
        }),
    )
    .map_err(Failure::config)?;
    println!(
        "wrote {} sequences of length {} ({} runs, inexact={}) to {}",
        args.reps,
        args.n,
        batch.runs,
        batch.inexact,
        out.display()
    );
    Ok(())
}

fn run_check(args: CheckArgs) -> Result<(), Failure> {
    let source = args.model.source()?;
    let max_lag = match (&source, args.check_lags, args.n) {
        (_, Some(lags), _) => lags,
        (CovarianceSource::Fgn(_), None, Some(n)) => 4 * n,
        (CovarianceSource::Fgn(_), None, None) => {
            return Err(Failure::config(
                "-n or --check-lags is required for the fgn model",
            ))
        }
        (CovarianceSource::Fixed(spec), None, _) => spec.n(),
    };
    if max_lag < 1 {
        return Err(Failure::config(
            "the checked lag range must reach at least lag 1",
        ));
    }
    let spec = source.spec(max_lag).map_err(Failure::config)?;
    let engine = FftEngine::new();
    let report = exactness_report_with_embedding(&spec, &engine);
    let json = serde_json::to_string_pretty(&report).map_err(Failure::config)?;
    match &args.out {
        Some(path) => {
            let path = resolve_out(path);
            std::fs::write(&path, format!("{json}\n")).map_err(Failure::config)?;
            manifest::write(
                &manifest::sibling_path(&path),
                serde_json::json!({
                    "command": "check",
                    "model": args.model.manifest_json(&source),
                    "checked_lags": max_lag,
                    "output": path.display().to_string(),
                }),
            )
            .map_err(Failure::config)?;
        }
        None => println!("{json}"),
    }
    match report.verdict {
        Verdict::GuaranteedExact => Ok(()),
        Verdict::NotGuaranteed => {
            let mut details = Vec::new();
            if !report.time_reversible {
                details.push("time-reversibility fails".to_string());
            }
            for (name, cond) in [
                ("R", report.cond_r),
                ("dR", report.cond_dr),
                ("d2R", report.cond_d2r),
            ] {
                if let Some(lag) = cond.first_offending_lag {
                    details.push(format!("{name} fails at tau={lag}"));
                }
            }
            Err(Failure {
                code: 1,
                reason: "not-guaranteed".into(),
                detail: details.join("; "),
            })
        }
    }
}

fn run_eigs(args: EigsArgs) -> Result<(), Failure> {
    let h_values = parse_f64_list(&args.hurst_list, "--hurst-list")?;
    let n_values = parse_usize_list(&args.n_list, "--n-list")?;
    if h_values.is_empty() || n_values.is_empty() {
        return Err(Failure::config(
            "--hurst-list and --n-list must be nonempty",
        ));
    }
    let amp_a: f64 = args
        .amp_a
        .parse()
        .map_err(|_| Failure::config(format!("--amp-a must be a number, got '{}'", args.amp_a)))?;
    let amp_b = if let Some(ratio) = args.amp_b.strip_prefix("ratio:") {
        let q: f64 = ratio.parse().map_err(|_| {
            Failure::config(format!(
                "--amp-b ratio must be a number, got '{}'",
                args.amp_b
            ))
        })?;
        amp_a * q.sqrt()
    } else {
        args.amp_b.parse().map_err(|_| {
            Failure::config(format!(
                "--amp-b must be a number or 'ratio:q', got '{}'",
                args.amp_b
            ))
        })?
    };

    let mut csv = Vec::new();
    if args.spectrum {
        if h_values.len() != 1 || n_values.len() != 1 {
            return Err(Failure::config("--spectrum needs exactly one H and one n"));
        }
        let params = FgnParams::new(h_values[0], amp_a, amp_b).map_err(Failure::config)?;
        let spec = noncirc::covariance::improper_fgn_spec(&params, n_values[0]);
        let rows =
            build_first_rows(&complex_to_bivariate(&spec), n_values[0]).map_err(Failure::config)?;
        let engine = FftEngine::new();
        let spectrum = eigen_spectrum(&rows, &engine);
        spectrum.write_csv(&mut csv).map_err(Failure::config)?;
    } else {
        let rows = min_eigenvalue_sweep(&h_values, &n_values, amp_a, amp_b)?;
        write_sweep_csv(&rows, &mut csv).map_err(Failure::config)?;
    }
    emit_csv(
        csv,
        args.out.as_deref(),
        serde_json::json!({
            "command": "eigs",
            "hurst_list": h_values,
            "n_list": n_values,
            "amp_a": amp_a,
            "amp_b": amp_b,
            "spectrum": args.spectrum,
        }),
    )
}

fn run_rms(args: RmsArgs) -> Result<(), Failure> {
    let n_values = match &args.n_list {
        Some(list) => parse_usize_list(list, "--n-list")?,
        None => (1..=100).map(|k| 10 * k).collect(),
    };
    if n_values.iter().any(|&n| n < 2) {
        return Err(Failure::config("--n-list entries must be at least 2"));
    }
    if args.reps == 0 {
        return Err(Failure::config("--reps must be at least 1"));
    }
    if !(args.hurst > 0.0 && args.hurst < 1.0) {
        return Err(Failure::config(format!(
            "--hurst must lie strictly inside (0, 1), got {}",
            args.hurst
        )));
    }
    let model = ModelArgs {
        model: ModelKind::Fgn,
        hurst: Some(args.hurst),
        amp_a: args.amp_a.clone(),
        amp_b: args.amp_b.clone(),
        path: None,
    };
    let source = model.source()?;
    let CovarianceSource::Fgn(params) = &source else {
        unreachable!("rms builds an fgn source");
    };
    let results = rms_experiment(
        params,
        &n_values,
        args.reps,
        args.policy.to_policy(),
        args.seed,
    )?;
    let mut csv = Vec::new();
    write_rms_csv(&results, &mut csv).map_err(Failure::config)?;
    emit_csv(
        csv,
        args.out.as_deref(),
        serde_json::json!({
            "command": "rms",
            "model": model.manifest_json(&source),
            "n_list": n_values,
            "replicates": args.reps,
            "seed": args.seed,
            "policy": {"mode": args.policy.label(), "max_doublings": args.policy.max_doublings},
        }),
    )
}

fn run_oracle_check(args: OracleCheckArgs) -> Result<(), Failure> {
    if args.n == 0 {
        return Err(Failure::config("-n must be positive"));
    }
    let source = args.model.source()?;
    let m = args.m.unwrap_or(args.n);
    if args.policy.policy == PolicyKind::Oversample && args.model.model == ModelKind::Csv {
        return Err(Failure::config(
            "oversample policy needs covariances beyond the table; supply more lags or use a generator-backed model",
        ));
    }
    let spec = source.spec(args.n).map_err(Failure::config)?;
    let out = exact_output_covariance(&spec, m, args.policy.to_policy())?;
    let theory = theoretical_covariance(&complex_to_bivariate(&spec), args.n)?;
    let err_z1 = out.z1.max_abs_diff(&theory);
    let err_z2 = out.z2.max_abs_diff(&theory);
    let err_cross = out.cross.max_abs();
    let max_err = err_z1.max(err_z2).max(err_cross);
    println!(
        "n={} m={} max_abs_err={max_err:e} (z1={err_z1:e} z2={err_z2:e} cross={err_cross:e}) inexact={}",
        out.n, out.m, out.inexact
    );
    if max_err < ORACLE_TOL && !out.inexact {
        println!("oracle-check: PASS");
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            reason: "oracle-mismatch".into(),
            detail: format!("max_abs_err={max_err:e} inexact={}", out.inexact),
        })
    }
}

fn emit_csv(
    csv: Vec<u8>,
    out: Option<&Path>,
    manifest_body: serde_json::Value,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let path = resolve_out(path);
            std::fs::write(&path, &csv).map_err(Failure::config)?;
            let mut body = manifest_body;
            body["output"] = serde_json::json!(path.display().to_string());
            manifest::write(&manifest::sibling_path(&path), body).map_err(Failure::config)?;
            println!("wrote {}", path.display());
        }
        None => {
            let text = String::from_utf8(csv).map_err(Failure::config)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Check(args) => run_check(args),
        Command::Eigs(args) => run_eigs(args),
        Command::Rms(args) => run_rms(args),
        Command::OracleCheck(args) => run_oracle_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if failure.detail.is_empty() {
                eprintln!("noncirc: code={} reason={}", failure.code, failure.reason);
            } else {
                eprintln!(
                    "noncirc: code={} reason={} {}",
                    failure.code, failure.reason, failure.detail
                );
            }
            ExitCode::from(failure.code)
        }
    }
}
