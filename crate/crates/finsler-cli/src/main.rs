//! `finsler` — command-line front end for the tensor engine.
//!
//! Subcommands ingest a JSON experiment config (metric + sampler +
//! tolerances), run the requested computation and emit a JSON or CSV
//! report. Exit codes: 0 success/pass, 1 check failure, 2 usage or config
//! error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use finsler_core::classify::{self, CheckTolerances};
use finsler_core::config::{OutputFormat, RunConfig};
use finsler_core::metrics::{self, builtins};
use finsler_core::product::ProductKind;
use finsler_core::tensors;
use finsler_core::ProductFunction;
use finsler_core::SamplePoint;

#[derive(Parser)]
#[command(
    name = "finsler",
    version,
    about = "Finsler metric validation, tensor evaluation, curvature classification and Minkowskian-product verification"
)]
struct Cli {
    /// List builtin metric families and product functions with their DSL
    /// expansions, then exit.
    #[arg(long)]
    catalog: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Override the command's main tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Report format (overrides the config's output.format).
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Report destination (overrides the config's output.path; stdout when
    /// neither is set).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the Finsler axioms on sampled points; exit 0 iff all pass.
    Validate(CommonArgs),
    /// Evaluate the full tensor frame at an explicit point (always JSON).
    Tensors {
        #[command(flatten)]
        common: CommonArgs,
        /// Base coordinates, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        /// Fiber coordinates, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Classify as Berwald / weakly Berwald / Landsberg / weakly Landsberg.
    Classify(CommonArgs),
    /// Verify the Minkowskian-product block identities and theorems;
    /// exit 1 if any check exceeds its tolerance.
    VerifyProduct(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.catalog {
        print_catalog();
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand (or --catalog) is required; see --help");
        return ExitCode::from(2);
    };
    match run(command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code)
        }
    }
}

struct CliError {
    exit_code: u8,
    message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

fn usage_error(message: impl Into<String>) -> CliError {
    CliError { exit_code: 2, message: message.into() }
}

fn check_failure(message: impl Into<String>) -> CliError {
    CliError { exit_code: 1, message: message.into() }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| usage_error(format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = RunConfig::from_json(&text).map_err(|e| usage_error(e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(samples) = common.samples {
        if samples == 0 {
            return Err(usage_error("--samples must be at least 1"));
        }
        cfg.sampler.count = samples;
    }
    if let Some(tol) = common.tol {
        if tol.is_nan() || tol <= 0.0 {
            return Err(usage_error("--tol must be positive"));
        }
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Validate(common) => {
            let cfg = load_config(&common)?;
            let metric = cfg.metric.compile().map_err(|e| usage_error(e.to_string()))?;
            let tol = common.tol.unwrap_or(1e-10);
            let report = metrics::validate_with(&metric, &cfg.sampler, cfg.reversibility, tol)
                .map_err(|e| check_failure(e.to_string()))?;
            let passed = report.passed;
            let csv = validation_csv(&report);
            emit(&common, &cfg, serde_json::to_value(&report).unwrap(), csv)?;
            Ok(exit_passed(passed))
        }
        Command::Tensors { common, x, y } => {
            let cfg = load_config(&common)?;
            let metric = cfg.metric.compile().map_err(|e| usage_error(e.to_string()))?;
            let x = parse_coords(&x)?;
            let y = parse_coords(&y)?;
            let point = SamplePoint::new(x, y).map_err(|e| usage_error(e.to_string()))?;
            if point.dim() != metric.dim {
                return Err(usage_error(format!(
                    "point has {} coordinates, metric has dimension {}",
                    point.dim(),
                    metric.dim
                )));
            }
            let frame =
                tensors::frame(&metric, &point).map_err(|e| check_failure(e.to_string()))?;
            emit(&common, &cfg, frame_json(&metric.name, &frame), None)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify(common) => {
            let cfg = load_config(&common)?;
            let metric = cfg.metric.compile().map_err(|e| usage_error(e.to_string()))?;
            let tol = common
                .tol
                .or_else(|| cfg.tolerances.get("classification").copied())
                .unwrap_or(1e-6);
            let report = classify::classify(&metric, &cfg.sampler, tol)
                .map_err(|e| check_failure(e.to_string()))?;
            let csv = report.to_csv();
            emit(&common, &cfg, serde_json::to_value(&report).unwrap(), Some(csv))?;
            // Verdicts are data, not errors.
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyProduct(common) => {
            let cfg = load_config(&common)?;
            let metric = cfg.metric.compile().map_err(|e| usage_error(e.to_string()))?;
            if metric.as_product().is_none() {
                return Err(usage_error("verify-product requires a metric of kind `product`"));
            }
            let mut tols = CheckTolerances::default();
            tols.apply(&cfg.tolerances).map_err(usage_error)?;
            if let Some(tol) = common.tol {
                tols.classification = tol;
            }
            let report = classify::verify_product(&metric, &cfg.sampler, &tols)
                .map_err(|e| check_failure(e.to_string()))?;
            let passed = report.passed;
            let csv = report.to_csv();
            emit(&common, &cfg, serde_json::to_value(&report).unwrap(), Some(csv))?;
            Ok(exit_passed(passed))
        }
    }
}

fn exit_passed(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn parse_coords(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| usage_error(format!("bad coordinate `{s}`")))
        })
        .collect()
}

/// Wrap a report in the output envelope. The `meta` block carries run
/// metadata (including a timestamp) and is the only part excluded from
/// byte-for-byte reproducibility.
fn envelope(report: serde_json::Value) -> serde_json::Value {
    let timestamp_ms = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    serde_json::json!({
        "meta": {
            "tool": "finsler",
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp_ms": timestamp_ms,
        },
        "report": report,
    })
}

fn emit(
    common: &CommonArgs,
    cfg: &RunConfig,
    report: serde_json::Value,
    csv: Option<String>,
) -> Result<(), CliError> {
    let format = match common.format {
        Some(Format::Json) => OutputFormat::Json,
        Some(Format::Csv) => OutputFormat::Csv,
        None => cfg.output.format,
    };
    let payload = match format {
        OutputFormat::Json => {
            serde_json::to_string_pretty(&envelope(report)).expect("serializable") + "\n"
        }
        OutputFormat::Csv => match csv {
            Some(csv) => csv,
            None => return Err(usage_error("this command only produces JSON output")),
        },
    };
    let out_path = common.out.clone().or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    match out_path {
        None => {
            print!("{payload}");
            Ok(())
        }
        Some(path) => write_atomic(&path, &payload)
            .map_err(|e| usage_error(format!("cannot write {}: {e}", path.display()))),
    }
}

/// Write via a temp file in the same directory plus rename, so readers
/// never observe a half-written report.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn validation_csv(report: &metrics::ValidationReport) -> Option<String> {
    let mut out = String::from("check_id,sample_index,residual\n");
    out.push_str(&format!("homogeneity_positive,,{}\n", report.homogeneity_positive_max));
    out.push_str(&format!("homogeneity_negative,,{}\n", report.homogeneity_negative_max));
    out.push_str(&format!("euler,,{}\n", report.euler_max));
    out.push_str(&format!("min_hessian_eigenvalue,,{}\n", report.min_hessian_eigenvalue));
    for f in &report.failures {
        out.push_str(&format!("failure_{},{},\n", f.check, f.sample_index));
    }
    Some(out)
}

fn tensor_value(indices: &[&str], dims: &[usize], data: &[f64]) -> serde_json::Value {
    serde_json::json!({
        "indices": indices,
        "dims": dims,
        "layout": "row-major",
        "data": data,
    })
}

/// Full tensor frame as labeled JSON, row-major with explicit index names.
fn frame_json(metric: &str, f: &tensors::TensorFrame) -> serde_json::Value {
    let d = f.g_lower.dim();
    serde_json::json!({
        "metric": metric,
        "at": { "x": f.at.x, "y": f.at.y },
        "g_val": f.g_val,
        "g_lower": tensor_value(&["alpha", "beta"], &[d, d], f.g_lower.as_slice()),
        "g_upper": tensor_value(&["alpha", "beta"], &[d, d], f.g_upper.as_slice()),
        "spray": tensor_value(&["alpha"], &[d], &f.spray),
        "nonlinear_connection": tensor_value(&["alpha", "beta"], &[d, d], f.nconn.as_slice()),
        "cartan_horizontal": tensor_value(&["alpha", "beta", "gamma"], &[d, d, d], f.cartan_h.as_slice()),
        "cartan_vertical": tensor_value(&["alpha", "beta", "gamma"], &[d, d, d], f.cartan_v.as_slice()),
        "berwald_connection": tensor_value(&["alpha", "beta", "gamma"], &[d, d, d], f.berwald_conn.as_slice()),
        "berwald_curvature": tensor_value(&["alpha", "beta", "gamma", "eta"], &[d, d, d, d], f.berwald_curv.as_slice()),
        "mean_berwald": tensor_value(&["beta", "gamma"], &[d, d], f.mean_berwald.as_slice()),
        "landsberg": tensor_value(&["beta", "gamma", "eta"], &[d, d, d], f.landsberg.as_slice()),
        "mean_landsberg": tensor_value(&["alpha"], &[d], &f.mean_landsberg),
    })
}

fn print_catalog() {
    println!("Builtin metric families (see configs/ for ready-to-run configs):");
    for (name, dsl) in builtins::catalog() {
        println!("  {name:<16} {dsl}");
    }
    println!();
    println!("Product functions f(s, t) for Minkowskian products F = sqrt(f(K, H)):");
    for (kind, label) in [
        (ProductKind::Sum, "sum"),
        (ProductKind::PNorm(2.0), "p_norm (p = 2 shown)"),
        (ProductKind::EpsSqrt(0.5), "eps_sqrt (eps = 0.5 shown)"),
    ] {
        let f = ProductFunction::from_kind(kind).expect("builtin");
        println!("  {label:<24} f = {}", f.dsl());
    }
    println!("  custom                   any 1-homogeneous expression in s, t");
    println!();
    println!("Expression language: + - * / ^, sqrt, sin, cos, exp, log;");
    println!("variables x1..xm, y1..ym (metrics), s, t (product functions).");
    let tol = CheckTolerances::default();
    println!();
    println!("Default verify-product tolerances:");
    println!(
        "  hessian_blocks={:.0e} inverse={:.0e} contractions={:.0e}",
        tol.hessian_blocks, tol.inverse, tol.contractions
    );
    println!(
        "  cross_blocks={:.0e} factor_match={:.0e} landsberg_relations={:.0e} classification={:.0e}",
        tol.cross_blocks, tol.factor_match, tol.landsberg_relations, tol.classification
    );
}
