//! Command-line front end.
//!
//! Every subcommand writes one report to standard output or `--output`:
//! JSON with a `schema_version` field, or a CSV trace for `solve`. Domain
//! errors exit with status 1 and print `{"schema_version": "1", "error":
//! {"code": ..., "message": ...}}`; malformed command lines exit with 2.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{abel_limit, cesaro_slope_with, partial_sums, predicted_slope, DEFAULT_SLOPE_WINDOW};
use crate::classifier::{classify, find_root_in_unit_interval, limit_value_n1};
use crate::coefficients::{ToeplitzKernel, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::genfun::chi_series_check;
use crate::number::{Number, ValueKind, Values};
use crate::recurrence::{solve_forward, solve_forward_with, uniform_prefix, Prefix, SolverConfig, DEFAULT_BIT_LIMIT};
use crate::stochastic::{
    simulate_sup_single_many, simulate_sup_two_many, takacs_dp, two_seq_dp, DiscreteDist, SimConfig,
};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Parser)]
#[command(
    name = "toeplitz-fixpoint",
    version,
    about = "Bounded positive solutions of x = Tx for banded infinite Toeplitz matrices"
)]
struct Cli {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Report format; `solve` defaults to csv, everything else to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide the boundedness regime from the kernel mass and first moment.
    Classify {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Compute x_0..x_K by the forward recurrence from the n free prefix values.
    Solve {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        prefix: PrefixArgs,
        #[arg(long = "K")]
        k: usize,
        /// Cap on the bit length of exact numerators and denominators.
        #[arg(long, default_value_t = DEFAULT_BIT_LIMIT)]
        bit_limit: u64,
    },
    /// Look for a root of z^n = w tau(z) in (0, 1) by bisection.
    Roots {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        w: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Limit x_0 t_-1 / (1 - gamma) of a band-depth-1 critical solution.
    Limit {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, default_value = "1")]
        x0: String,
    },
    /// Compare the partial-sum slope and the Abel limit with their closed form.
    Tauber {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        prefix: PrefixArgs,
        #[arg(long = "K", default_value_t = 100_000)]
        k: usize,
        /// Comma-separated decreasing values in (0, 0.5).
        #[arg(long, default_value = "1e-2,1e-3,1e-4")]
        epsilons: String,
        /// Fraction of the trace, from the end, used for the slope fit.
        #[arg(long, default_value_t = DEFAULT_SLOPE_WINDOW)]
        window: f64,
        /// Also write the partial sums as `N,S_N` CSV to this path.
        #[arg(long)]
        sums_csv: Option<PathBuf>,
    },
    /// Compare the closed-form generating function with the truncated series.
    Gf {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        prefix: PrefixArgs,
        #[arg(long)]
        z: f64,
        #[arg(long = "K", default_value_t = 200)]
        k: usize,
    },
    /// Estimate random-walk supremum probabilities and compare with the exact recursion.
    Simulate {
        /// Distribution of nu: a JSON file or inline `{"probs": [...]}`.
        #[arg(long)]
        nu: String,
        /// Distribution of mu for the two-sequence walk N_r - M_r.
        #[arg(long)]
        mu: Option<String>,
        /// Band depth; mu must be supported on {0, ..., n}.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Comma-separated levels k.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
        k: Vec<i64>,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long, default_value_t = 10_000)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Kernel JSON: `{"n": 1, "coeffs": [...], "tail_mass_bound": 0}`.
    #[arg(long)]
    kernel: PathBuf,
    /// Use exact rational arithmetic; decimal inputs are read exactly.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct PrefixArgs {
    /// Comma-separated x_0, ..., x_{n-1}; decimals or `p/q`.
    #[arg(long)]
    prefix: Option<String>,
    /// Use the same value for every prefix entry.
    #[arg(long)]
    uniform_prefix: Option<String>,
}

impl KernelArgs {
    fn load(&self) -> Result<ToeplitzKernel> {
        let kernel = ToeplitzKernel::from_json_str(&read_text(&self.kernel)?)?;
        if self.exact {
            kernel.to_kind(ValueKind::ExactRational)
        } else {
            Ok(kernel)
        }
    }
}

impl PrefixArgs {
    fn build(&self, kernel: &ToeplitzKernel) -> Result<Prefix> {
        match (&self.prefix, &self.uniform_prefix) {
            (Some(list), _) => {
                let numbers = list
                    .split(',')
                    .map(|s| s.trim().parse::<Number>()?.into_kind(kernel.value_kind()))
                    .collect::<Result<Vec<_>>>()?;
                Prefix::new(Values::from_numbers(numbers)?)
            }
            (None, Some(v)) => uniform_prefix(kernel, &v.trim().parse()?),
            (None, None) => Err(Error::InvalidParameter("a prefix is required".into())),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_dist(source: &str) -> Result<DiscreteDist> {
    if source.trim_start().starts_with('{') {
        DiscreteDist::from_json_str(source)
    } else {
        DiscreteDist::from_json_str(&read_text(Path::new(source))?)
    }
}

/// Wraps a serializable report with the schema version.
fn envelope<T: Serialize>(report: &T) -> Result<Value> {
    let mut value = serde_json::to_value(report)?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("schema_version".into(), json!(SCHEMA_VERSION));
            Ok(value)
        }
        None => Ok(json!({ "schema_version": SCHEMA_VERSION, "result": value })),
    }
}

fn error_object(e: &Error) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "code": e.code(), "message": e.to_string() },
    })
}

/// Result of a step that may fail without failing the whole report.
fn field_or_error<T: Serialize>(r: Result<T>) -> (Value, Value) {
    match r {
        Ok(v) => (serde_json::to_value(v).unwrap_or(Value::Null), Value::Null),
        Err(e) => (Value::Null, json!({ "code": e.code(), "message": e.to_string() })),
    }
}

enum Report {
    Json(Value),
    Text(Vec<u8>),
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_io(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            if informational {
                let _ = out.write_all(text.as_bytes());
                return 0;
            }
            let _ = err.write_all(text.as_bytes());
            return 2;
        }
    };
    let result = dispatch(&cli, err).and_then(|report| emit(&cli, report, out));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(out, "{}", error_object(&e));
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn emit(cli: &Cli, report: Report, out: &mut dyn Write) -> Result<()> {
    let bytes = match report {
        Report::Json(v) => {
            let mut s = serde_json::to_string_pretty(&v)?;
            s.push('\n');
            s.into_bytes()
        }
        Report::Text(b) => b,
    };
    match &cli.output {
        Some(path) => fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => out.write_all(&bytes).map_err(Error::from),
    }
}

fn dispatch(cli: &Cli, err: &mut dyn Write) -> Result<Report> {
    let format = cli.format;
    let json_only = |name: &str| -> Result<()> {
        if format == Some(Format::Csv) {
            return Err(Error::InvalidParameter(format!("{name} only reports json")));
        }
        Ok(())
    };
    match &cli.command {
        Command::Classify { kernel, tolerance } => {
            json_only("classify")?;
            let k = kernel.load()?;
            let report = classify(&k, *tolerance)?;
            for w in &report.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            let mut v = envelope(&report)?;
            v["kernel_id"] = json!(k.id().0);
            Ok(Report::Json(v))
        }
        Command::Solve { kernel, prefix, k, bit_limit } => {
            let kern = kernel.load()?;
            let p = prefix.build(&kern)?;
            let trace = solve_forward_with(&kern, &p, *k, &SolverConfig { bit_limit: *bit_limit })?;
            if let Some(w) = trace.warning() {
                let _ = writeln!(err, "warning: {w}");
            }
            if format == Some(Format::Json) {
                let values: Vec<Number> = (0..trace.len()).filter_map(|i| trace.value(i)).collect();
                Ok(Report::Json(json!({
                    "schema_version": SCHEMA_VERSION,
                    "kernel_id": kern.id().0,
                    "mode": trace.mode(),
                    "values": values,
                    "warning": trace.warning(),
                })))
            } else {
                let mut buf = Vec::new();
                trace.write_csv(&mut buf)?;
                Ok(Report::Text(buf))
            }
        }
        Command::Roots { kernel, w, tol } => {
            json_only("roots")?;
            let report = find_root_in_unit_interval(&kernel.load()?, *w, *tol)?;
            Ok(Report::Json(envelope(&report)?))
        }
        Command::Limit { kernel, x0 } => {
            json_only("limit")?;
            let k = kernel.load()?;
            let limit = limit_value_n1(&k, &x0.trim().parse()?)?;
            Ok(Report::Json(json!({
                "schema_version": SCHEMA_VERSION,
                "kernel_id": k.id().0,
                "limit": limit,
            })))
        }
        Command::Tauber { kernel, prefix, k, epsilons, window, sums_csv } => {
            json_only("tauber")?;
            // Long horizons are out of reach for exact arithmetic, so the
            // trace is always computed in floating point.
            let kern = kernel.load()?.to_kind(ValueKind::Float)?;
            let p = prefix.build(&kern)?;
            let predicted = predicted_slope(&kern, &p)?;
            let eps = epsilons
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad epsilon {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let trace = solve_forward(&kern, &p, *k)?;
            if let Some(path) = sums_csv {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["N", "S_N"])?;
                for (n, s) in partial_sums(&trace).iter().enumerate() {
                    w.write_record([n.to_string(), format!("{s}")])?;
                }
                w.flush()?;
            }
            let cesaro = cesaro_slope_with(&trace, *window);
            let abel = abel_limit(&kern, &p, &eps);
            let rel = |v: f64| (v - predicted).abs() / predicted.abs();
            let rel_cesaro = cesaro.as_ref().ok().map(|s| rel(s.slope));
            let rel_abel = abel.as_ref().ok().map(|&a| rel(a));
            let (cesaro, cesaro_error) = field_or_error(cesaro);
            let (abel, abel_error) = field_or_error(abel);
            Ok(Report::Json(json!({
                "schema_version": SCHEMA_VERSION,
                "kernel_id": kern.id().0,
                "predicted": predicted,
                "cesaro": cesaro,
                "cesaro_error": cesaro_error,
                "abel": abel,
                "abel_error": abel_error,
                "relative_errors": { "cesaro": rel_cesaro, "abel": rel_abel },
            })))
        }
        Command::Gf { kernel, prefix, z, k } => {
            json_only("gf")?;
            let kern = kernel.load()?;
            let p = prefix.build(&kern)?;
            let report = chi_series_check(&kern, &p, *z, *k)?;
            Ok(Report::Json(envelope(&report)?))
        }
        Command::Simulate { nu, mu, n, k, reps, horizon, seed, threads } => {
            json_only("simulate")?;
            let nu = load_dist(nu)?;
            let config = SimConfig {
                horizon: *horizon,
                reps: *reps,
                seed: *seed,
                threads: *threads,
            };
            let kmax = k.iter().copied().max().unwrap_or(0).max(0) as usize;
            let report = match mu {
                None => {
                    let est = simulate_sup_single_many(&nu, k, &config)?;
                    let dp = takacs_dp(&nu, kmax)?.to_f64_vec();
                    let rows: Vec<Value> = k
                        .iter()
                        .zip(est)
                        .map(|(&k, e)| {
                            let exact = if k <= 0 { if k == 0 { dp[0] } else { 0.0 } } else { dp[k as usize] };
                            json!({ "k": k, "estimate": e, "dp": exact, "z_score": z_score(e.value, exact, e.std_error) })
                        })
                        .collect();
                    json!({ "schema_version": SCHEMA_VERSION, "walk": "single", "estimates": rows })
                }
                Some(mu) => {
                    let mu = load_dist(mu)?;
                    let est = simulate_sup_two_many(&nu, &mu, *n, k, &config)?;
                    let s = two_seq_dp(&nu, &mu, *n, kmax)?.to_f64_vec();
                    let at = |k: i64| if k < -(*n as i64) { 0.0 } else { s[(k + *n as i64) as usize] };
                    let below = at(-1);
                    let rows: Vec<Value> = est
                        .into_iter()
                        .map(|e| {
                            let dp = at(e.k);
                            let cond = if e.k < 0 { 0.0 } else { (dp - below) / (1.0 - below) };
                            json!({
                                "k": e.k,
                                "unconditional": e.unconditional,
                                "conditional": e.conditional,
                                "dp": dp,
                                "dp_conditional": cond,
                                "z_score": z_score(e.unconditional.value, dp, e.unconditional.std_error),
                            })
                        })
                        .collect();
                    json!({ "schema_version": SCHEMA_VERSION, "walk": "two_sequence", "n": n, "estimates": rows })
                }
            };
            Ok(Report::Json(report))
        }
    }
}

fn z_score(estimate: f64, exact: f64, se: f64) -> Option<f64> {
    (se > 0.0).then(|| (estimate - exact) / se)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("toeplitz-fixpoint").chain(args.iter().copied());
        let code = run_with_io(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn kernel_file(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    }

    #[test]
    fn classify_critical_example() {
        let dir = tempfile::tempdir().unwrap();
        let k = kernel_file(&dir, "k.json", r#"{"n": 1, "coeffs": [0.6, 0.3, 0.1]}"#);
        let (code, out, _) = run_capture(&["classify", "--kernel", &k]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["schema_version"], "1");
        assert_eq!(v["regime"], "CRITICAL_BOUNDED");
        assert!((v["limit_value"].as_f64().unwrap() - 1.2).abs() < 1e-12);
        let (_, out, _) = run_capture(&["classify", "--kernel", &k, "--exact"]);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["limit_value"], "6/5");
    }

    #[test]
    fn usage_and_domain_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = kernel_file(&dir, "bad.json", r#"{"n": 1, "coeffs": [0, 0.5, 0.5]}"#);
        let (code, out, _) = run_capture(&["roots", "--kernel", &bad, "--w", "1"]);
        assert_eq!(code, 1);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["error"]["code"], "ZERO_LEADING_COEFFICIENT");

        assert_eq!(run_capture(&["frobnicate"]).0, 2);
        assert_eq!(run_capture(&["solve", "--kernel", &bad, "--K", "3"]).0, 2);
        assert_eq!(run_capture(&["--help"]).0, 0);

        let (code, out, _) = run_capture(&["classify", "--kernel", "/nonexistent/k.json"]);
        assert_eq!(code, 1);
        assert!(out.contains("IO_ERROR"));
        let garbage = kernel_file(&dir, "g.json", "{not json");
        let (code, out, _) = run_capture(&["classify", "--kernel", &garbage]);
        assert_eq!(code, 1);
        assert!(out.contains("PARSE_ERROR"));
    }

    #[test]
    fn solve_writes_exact_csv() {
        let dir = tempfile::tempdir().unwrap();
        let k = kernel_file(&dir, "k.json", r#"{"n": 1, "coeffs": [0.6, 0.3, 0.1]}"#);
        let (code, out, _) = run_capture(&["solve", "--kernel", &k, "--uniform-prefix", "1", "--K", "100", "--exact"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 102);
        assert_eq!(lines[0], "k,x_k_num,x_k_den");
        assert_eq!(lines[2], "1,7,6");
    }

    #[test]
    fn simulate_single_reports_dp() {
        let (code, out, _) = run_capture(&[
            "simulate", "--nu", r#"{"probs": ["7/10", "0", "3/10"]}"#, "--k", "0,1", "--reps", "2000",
            "--horizon", "200", "--seed", "5",
        ]);
        assert_eq!(code, 0, "{out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["estimates"][0]["dp"].as_f64().unwrap(), 0.4);
        assert_eq!(v["estimates"][1]["k"], 1);
    }
}
