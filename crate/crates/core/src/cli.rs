//! Command-line front end: spec validation, Pickands estimation, tail
//! evaluation, Monte Carlo runs, the ratio harness and path sampling.
//!
//! Every run writes one output directory containing `manifest.json` plus its
//! artifacts. The manifest records the fully resolved argument vector, so
//! `replay` reproduces the artifacts byte-for-byte; wall-clock duration lives
//! only in the manifest. Output files are written to a temp name and renamed,
//! so failed runs leave no partial artifacts.

use crate::asymptotics::{tail_asymptotic, PickandsValue};
use crate::covariance::{
    build_cov_matrix, default_d4_radii, field_kernel, verify_d4_expansion, CovKernel,
    ExpansionReport, D4_DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::fieldspec::FieldSpec;
use crate::grid::{Grid, SamplePath};
use crate::montecarlo::{estimate_sup_tail, grid_for_u, ratio_experiment};
use crate::pickands::{estimate_pickands, estimate_pickands_domain};
use crate::profile::AlphaProfile;
use crate::rng::RNG_ALGORITHM;
use crate::sampling::cholesky_sample;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Environment variable consulted for the seed when `--seed` is absent.
pub const SEED_ENV_VAR: &str = "SUPEX_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "supex", version, about = "Supremum tail toolkit for locally stationary Gaussian fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonOpts {
    /// Output directory for the manifest and artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Cap on worker threads; zero uses every core. Results never depend on
    /// this.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Replication seed. Falls back to SUPEX_SEED, then a fixed default.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a field specification against its structural conditions.
    Validate {
        #[arg(long)]
        spec: PathBuf,
        /// Ratio tolerance for the expansion check.
        #[arg(long, default_value_t = D4_DEFAULT_TOL)]
        tolerance: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Estimate a Pickands constant (scalar alpha) or a generalized domain
    /// constant (comma-separated alpha vector).
    Pickands {
        /// Exponent(s) in (0, 2]; a vector selects the domain estimator.
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        /// Interval horizon (or box edge). Default: 16 when every alpha >= 1,
        /// else 8.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate the closed-form tail approximation for a spec.
    Tail {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        u: f64,
        /// JSON file with Pickands constants (array of numbers or of
        /// {value|estimate, standard_error} records).
        #[arg(long)]
        pickands: Option<PathBuf>,
        /// Inline comma-separated Pickands constants.
        #[arg(long, value_delimiter = ',')]
        pickands_const: Option<Vec<f64>>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Monte Carlo estimate of the supremum exceedance probability.
    Mc {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        u: f64,
        /// Per-axis grid step; default follows the u-adaptive rule.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// MC / asymptotic ratio table across thresholds.
    Ratio {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        u_list: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        reps: u64,
        #[arg(long)]
        pickands: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        pickands_const: Option<Vec<f64>>,
        /// Per-axis grid step; default follows the u-adaptive rule per u.
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Draw sample paths of the field on a uniform grid.
    Sample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        /// csv or bin
        #[arg(long, default_value = "csv")]
        format: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Re-execute a recorded manifest; artifacts are reproduced byte-for-byte.
    Replay {
        manifest: PathBuf,
    },
}

/// Record of one CLI run, sufficient to replay it.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Fully resolved argument vector (defaults included); `replay` parses
    /// and re-executes exactly this.
    pub argv: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: u64,
    pub threads: usize,
    pub rng_algorithm: String,
    /// Wall-clock duration; informational only and excluded from replay
    /// comparisons.
    pub duration_ms: u64,
}

/// Write bytes to a temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = dir.to_path_buf();
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    tmp.push(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn resolve_seed(opt: Option<u64>) -> u64 {
    if let Some(s) = opt {
        return s;
    }
    if let Ok(v) = std::env::var(SEED_ENV_VAR) {
        if let Ok(s) = v.parse::<u64>() {
            return s;
        }
    }
    DEFAULT_SEED
}

fn configure_threads(threads: usize) {
    if threads > 0 {
        // ignore failure: the global pool may already exist in-process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn default_out_dir(command: &str) -> PathBuf {
    PathBuf::from("runs").join(command)
}

fn load_spec(path: &Path) -> Result<FieldSpec> {
    let text = std::fs::read_to_string(path)?;
    let spec = FieldSpec::from_json_str(&text)?;
    spec.validate()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    Ok(spec)
}

/// Accepts `[1.0, 0.9]`, `[{"value":1.0,"standard_error":0.1}, ...]` or
/// objects using `estimate` for the point value.
pub fn parse_pickands_json(text: &str, k: usize) -> Result<Vec<PickandsValue>> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema {
        path: "$".into(),
        message: format!("not valid JSON: {e}"),
    })?;
    let arr = v.as_array().ok_or_else(|| Error::Schema {
        path: "$".into(),
        message: "expected an array of Pickands constants".into(),
    })?;
    if arr.len() != k {
        return Err(Error::Schema {
            path: "$".into(),
            message: format!("expected {k} constants, got {}", arr.len()),
        });
    }
    arr.iter()
        .enumerate()
        .map(|(i, x)| {
            if let Some(f) = x.as_f64() {
                return Ok(PickandsValue::exact(f));
            }
            let obj = x.as_object().ok_or_else(|| Error::Schema {
                path: format!("$[{i}]"),
                message: "expected a number or an object".into(),
            })?;
            let value = obj
                .get("value")
                .or_else(|| obj.get("estimate"))
                .and_then(|f| f.as_f64())
                .ok_or_else(|| Error::Schema {
                    path: format!("$[{i}]"),
                    message: "missing numeric `value` or `estimate`".into(),
                })?;
            let standard_error = obj
                .get("standard_error")
                .and_then(|f| f.as_f64())
                .unwrap_or(0.0);
            Ok(PickandsValue {
                value,
                standard_error,
            })
        })
        .collect()
}

fn resolve_pickands(
    file: &Option<PathBuf>,
    inline: &Option<Vec<f64>>,
    k: usize,
) -> Result<(Vec<PickandsValue>, Vec<String>)> {
    match (file, inline) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            Ok((
                parse_pickands_json(&text, k)?,
                vec![path.display().to_string()],
            ))
        }
        (None, Some(vals)) => {
            if vals.len() != k {
                return Err(Error::Domain(format!(
                    "expected {k} inline Pickands constants, got {}",
                    vals.len()
                )));
            }
            Ok((vals.iter().map(|&v| PickandsValue::exact(v)).collect(), vec![]))
        }
        (None, None) => Err(Error::Domain(
            "supply --pickands <file> or --pickands-const <v,...>".into(),
        )),
    }
}

/// One structural condition's verdict.
#[derive(Debug, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

/// Full validation report for a field specification.
#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub conditions: Vec<ConditionCheck>,
    pub expansion_traces: Vec<ExpansionReport>,
}

/// Granular condition checks behind `supex validate`.
pub fn validate_spec_report(spec: &FieldSpec, tolerance: f64) -> ValidationReport {
    let mut conditions = Vec::new();
    let mut expansion_traces = Vec::new();
    let (lo, hi) = spec.domain();

    // structural pass first: counts, kinds, ranges, scale bounds
    let structural = spec.validate();
    let structural_ok = structural.is_ok();
    if let Err(e) = &structural {
        let msg = e.to_string();
        let name = if msg.contains("variance scale") {
            "D3 (scale bounds)"
        } else if msg.contains("minimum") {
            "A1 (minimum structure)"
        } else if msg.contains("alpha0") || msg.contains("beta") || msg.contains("delta_log") {
            "A2 (expansion constants)"
        } else {
            "structure"
        };
        conditions.push(ConditionCheck {
            name: name.into(),
            passed: false,
            details: msg,
        });
    }
    if !structural_ok {
        return ValidationReport {
            passed: false,
            conditions,
            expansion_traces,
        };
    }

    // D2: exponent range on a scan
    let mut d2_ok = true;
    let mut d2_detail = String::from("exponents within (0, 2] on a 512-point scan");
    for (i, p) in spec.profiles.iter().enumerate() {
        for j in 0..=512 {
            let t = lo + (hi - lo) * j as f64 / 512.0;
            let a = p.eval(t);
            if !(a > 0.0 && a <= 2.0) {
                d2_ok = false;
                d2_detail = format!("profile {i} leaves (0, 2] at t = {t} (alpha = {a})");
            }
        }
    }
    conditions.push(ConditionCheck {
        name: "D2 (exponent range)".into(),
        passed: d2_ok,
        details: d2_detail,
    });

    // D3: sampled scale bounds
    let mut d3_ok = true;
    let mut d3_details = Vec::new();
    for i in 0..spec.k {
        let (mn, mx) = spec.scale_range_on_lattice(i, 9);
        if !(mn > 0.0 && mx.is_finite()) {
            d3_ok = false;
        }
        d3_details.push(format!("C_{i} in [{mn:.6}, {mx:.6}]"));
    }
    conditions.push(ConditionCheck {
        name: "D3 (scale bounds)".into(),
        passed: d3_ok,
        details: d3_details.join("; "),
    });

    // A1: numeric minimum-structure scan per profile
    let mut a1_ok = true;
    let mut a1_details = Vec::new();
    for (i, p) in spec.profiles.iter().enumerate() {
        let n = 2048;
        let vals: Vec<f64> = (0..=n)
            .map(|j| p.eval(lo + (hi - lo) * j as f64 / n as f64))
            .collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let at_min: Vec<usize> = (0..=n)
            .filter(|&j| vals[j] <= min + 1e-12)
            .collect();
        // minimizer set must be one contiguous cluster
        let contiguous = at_min.windows(2).all(|w| w[1] == w[0] + 1);
        let kind_ok = match p {
            AlphaProfile::UniqueMin { .. } => contiguous && at_min.len() <= 3,
            AlphaProfile::Plateau { .. } | AlphaProfile::Constant { .. } => contiguous,
        };
        if !kind_ok {
            a1_ok = false;
            a1_details.push(format!(
                "profile {i}: minimum attained on {} scan points in a non-{} pattern",
                at_min.len(),
                p.kind_name()
            ));
        }
    }
    conditions.push(ConditionCheck {
        name: "A1 (minimum structure)".into(),
        passed: a1_ok,
        details: if a1_details.is_empty() {
            "each exponent attains its minimum on the declared set".into()
        } else {
            a1_details.join("; ")
        },
    });

    // A2: expansion constants present; delta_log is metadata (the parametric
    // families satisfy the expansion exactly)
    let delta_notes: Vec<String> = spec
        .profiles
        .iter()
        .enumerate()
        .map(|(i, p)| match *p {
            AlphaProfile::UniqueMin { delta_log, .. }
            | AlphaProfile::Plateau { delta_log, .. } => format!("delta_log[{i}] = {delta_log}"),
            AlphaProfile::Constant { .. } => format!("delta_log[{i}] = n/a"),
        })
        .collect();
    conditions.push(ConditionCheck {
        name: "A2 (expansion constants)".into(),
        passed: true,
        details: format!(
            "parametric families satisfy the expansion exactly; {}",
            delta_notes.join(", ")
        ),
    });

    let kernel = field_kernel(spec);

    // D1: unit variance on the diagonal
    let mut d1_ok = true;
    let mut worst = 0.0f64;
    for j in 0..=16 {
        let t = vec![lo + (hi - lo) * (0.03 + 0.94 * j as f64 / 16.0); spec.k];
        let dev = (kernel.cov(&t, &t) - 1.0).abs();
        worst = worst.max(dev);
        if dev > 1e-12 {
            d1_ok = false;
        }
    }
    conditions.push(ConditionCheck {
        name: "D1 (unit variance)".into(),
        passed: d1_ok,
        details: format!("max |cov(t,t) - 1| = {worst:.3e} on the diagonal scan"),
    });

    // strict inequality of the covariance off the diagonal
    let mut cov_ok = true;
    let mut min_margin = f64::INFINITY;
    let mut s = 0xC0FFEEu64;
    for _ in 0..64 {
        let mut draw = || {
            crate::rng::splitmix64(&mut s);
            let x = (s >> 11) as f64 / (1u64 << 53) as f64;
            lo + (hi - lo) * (0.02 + 0.96 * x)
        };
        let p: Vec<f64> = (0..spec.k).map(|_| draw()).collect();
        let q: Vec<f64> = (0..spec.k).map(|_| draw()).collect();
        if p == q {
            continue;
        }
        let c = kernel.cov(&p, &q);
        min_margin = min_margin.min(1.0 - c);
        if c >= 1.0 {
            cov_ok = false;
        }
    }
    conditions.push(ConditionCheck {
        name: "COV (strict inequality)".into(),
        passed: cov_ok,
        details: format!("min (1 - cov) over sampled distinct pairs = {min_margin:.3e}"),
    });

    // D4: expansion ratio at interior sample points
    let radii: Vec<f64> = default_d4_radii()
        .into_iter()
        .filter(|&r| r <= 0.4 * (hi - lo))
        .collect();
    let mut d4_ok = true;
    for frac in [0.37, 0.5, 0.71] {
        let t = vec![lo + (hi - lo) * frac; spec.k];
        let rep = verify_d4_expansion(spec, &kernel, &t, &radii, tolerance);
        d4_ok &= rep.converged;
        expansion_traces.push(rep);
    }
    conditions.push(ConditionCheck {
        name: "D4 (expansion ratio)".into(),
        passed: d4_ok,
        details: format!(
            "ratio within {tolerance:.0e}-tolerance of 1 at radius {:.1e} with improving error",
            radii.last().copied().unwrap_or(f64::NAN)
        ),
    });

    let passed = conditions.iter().all(|c| c.passed);
    ValidationReport {
        passed,
        conditions,
        expansion_traces,
    }
}

struct RunContext {
    t0: std::time::Instant,
    out_dir: PathBuf,
    outputs: Vec<String>,
    inputs: Vec<String>,
}

impl RunContext {
    fn new(out: &Option<PathBuf>, command: &str) -> Self {
        RunContext {
            t0: std::time::Instant::now(),
            out_dir: out.clone().unwrap_or_else(|| default_out_dir(command)),
            outputs: Vec::new(),
            inputs: Vec::new(),
        }
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        argv: Vec<String>,
        seed: u64,
        threads: usize,
    ) -> Result<()> {
        let manifest = RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            argv,
            inputs: std::mem::take(&mut self.inputs),
            outputs: self.outputs.clone(),
            seed,
            threads,
            rng_algorithm: RNG_ALGORITHM.into(),
            duration_ms: self.t0.elapsed().as_millis() as u64,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.out_dir.join("manifest.json"), text.as_bytes())?;
        Ok(())
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Execute a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate {
            spec,
            tolerance,
            common,
        } => {
            configure_threads(common.threads);
            let seed = resolve_seed(common.seed);
            let mut ctx = RunContext::new(&common.out, "validate");
            ctx.inputs.push(spec.display().to_string());
            let text = std::fs::read_to_string(&spec)?;
            let parsed = FieldSpec::from_json_str(&text)?; // schema errors exit 2
            let report = validate_spec_report(&parsed, tolerance);
            let body = serde_json::to_string_pretty(&report).expect("report serializes");
            ctx.emit("validation.json", body.as_bytes())?;
            for c in &report.conditions {
                println!(
                    "{} {}: {}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name,
                    c.details
                );
            }
            let argv = vec![
                "validate".into(),
                "--spec".into(),
                spec.display().to_string(),
                "--tolerance".into(),
                tolerance.to_string(),
                "--seed".into(),
                seed.to_string(),
                "--threads".into(),
                common.threads.to_string(),
                "--out".into(),
                ctx.out_dir.display().to_string(),
            ];
            let passed = report.passed;
            ctx.finish("validate", argv, seed, common.threads)?;
            Ok(if passed { 0 } else { 1 })
        }
        Command::Pickands {
            alpha,
            horizon,
            step,
            reps,
            common,
        } => {
            configure_threads(common.threads);
            let seed = resolve_seed(common.seed);
            let horizon = horizon.unwrap_or(if alpha.iter().all(|&a| a >= 1.0) {
                16.0
            } else {
                8.0
            });
            let est = if alpha.len() == 1 {
                estimate_pickands(alpha[0], horizon, step, reps, seed)?
            } else {
                let n = (horizon / step).round() as usize + 1;
                let nodes: Vec<f64> = (0..n).map(|j| j as f64 * step).collect();
                let grid = Grid::new(vec![nodes; alpha.len()])?;
                estimate_pickands_domain(&alpha, &grid, reps, seed)?
            };
            let mut ctx = RunContext::new(&common.out, "pickands");
            let body = serde_json::to_string_pretty(&est).expect("estimate serializes");
            ctx.emit("pickands.json", body.as_bytes())?;
            println!(
                "H estimate {:.6} +- {:.6} (alpha = {})",
                est.estimate,
                est.standard_error,
                fmt_list(&alpha)
            );
            let argv = vec![
                "pickands".into(),
                "--alpha".into(),
                fmt_list(&alpha),
                "--horizon".into(),
                horizon.to_string(),
                "--step".into(),
                step.to_string(),
                "--reps".into(),
                reps.to_string(),
                "--seed".into(),
                seed.to_string(),
                "--threads".into(),
                common.threads.to_string(),
                "--out".into(),
                ctx.out_dir.display().to_string(),
            ];
            ctx.finish("pickands", argv, seed, common.threads)?;
            Ok(0)
        }
        Command::Tail {
            spec,
            u,
            pickands,
            pickands_const,
            common,
        } => {
            configure_threads(common.threads);
            let seed = resolve_seed(common.seed);
            let parsed = load_spec(&spec)?;
            let (h, mut extra_inputs) = resolve_pickands(&pickands, &pickands_const, parsed.k)?;
            let result = tail_asymptotic(&parsed, &h, u)?;
            let mut ctx = RunContext::new(&common.out, "tail");
            ctx.inputs.push(spec.display().to_string());
            ctx.inputs.append(&mut extra_inputs);
            let body = serde_json::to_string_pretty(&result).expect("tail serializes");
            ctx.emit("tail.json", body.as_bytes())?;
            println!(
                "P(sup > {u}) ~ {:.6e}{}",
                result.probability,
                if result.pre_asymptotic {
                    "  [pre-asymptotic regime]"
                } else {
                    ""
                }
            );
            let mut argv = vec![
                "tail".into(),
                "--spec".into(),
                spec.display().to_string(),
                "--u".into(),
                u.to_string(),
            ];
            match (&pickands, &pickands_const) {
                (Some(p), _) => {
                    argv.push("--pickands".into());
                    argv.push(p.display().to_string());
                }
                (None, Some(v)) => {
                    argv.push("--pickands-const".into());
                    argv.push(fmt_list(v));
                }
                _ => {}
            }
            argv.extend([
                "--seed".into(),
                seed.to_string(),
                "--threads".into(),
                common.threads.to_string(),
                "--out".into(),
                ctx.out_dir.display().to_string(),
            ]);
            ctx.finish("tail", argv, seed, common.threads)?;
            Ok(0)
        }
        Command::Mc {
            spec,
            u,
            step,
            reps,
            common,
        } => {
            configure_threads(common.threads);
            let seed = resolve_seed(common.seed);
            let parsed = load_spec(&spec)?;
            let grid = match step {
                Some(s) => {
                    let (lo, hi) = parsed.domain();
                    let count = ((hi - lo) / s).ceil() as usize + 1;
                    Grid::uniform(lo, hi, count, parsed.k)?
                }
                None => grid_for_u(&parsed, u)?,
            };
            let est = estimate_sup_tail(&parsed, u, &grid, reps, seed, None)?;
            let mut ctx = RunContext::new(&common.out, "mc");
            ctx.inputs.push(spec.display().to_string());
            let body = serde_json::to_string_pretty(&est).expect("estimate serializes");
            ctx.emit("mc.json", body.as_bytes())?;
            println!(
                "P(sup > {u}) ~ {:.6e}  [{:.3e}, {:.3e}] ({} hits / {} reps)",
                est.estimate, est.ci_low, est.ci_high, est.hits, est.reps
            );
            let mut argv = vec![
                "mc".into(),
                "--spec".into(),
                spec.display().to_string(),
                "--u".into(),
                u.to_string(),
            ];
            if let Some(s) = step {
                argv.push("--step".into());
                argv.push(s.to_string());
            }
            argv.extend([
                "--reps".into(),
                reps.to_string(),
                "--seed".into(),
                seed.to_string(),
                "--threads".into(),
                common.threads.to_string(),
                "--out".into(),
                ctx.out_dir.display().to_string(),
            ]);
            ctx.finish("mc", argv, seed, common.threads)?;
            Ok(0)
        }
        Command::Ratio {
            spec,
            u_list,
            reps,
            pickands,
            pickands_const,
            step,
            common,
        } => {
            configure_threads(common.threads);
            let seed = resolve_seed(common.seed);
            let parsed = load_spec(&spec)?;
            let (h, mut extra_inputs) = resolve_pickands(&pickands, &pickands_const, parsed.k)?;
            let report = ratio_experiment(&parsed, &u_list, reps, &h, seed, step)?;
            let mut ctx = RunContext::new(&common.out, "ratio");
            ctx.inputs.push(spec.display().to_string());
            ctx.inputs.append(&mut extra_inputs);
            ctx.emit("ratio.csv", report.to_csv().as_bytes())?;
            let body = serde_json::to_string_pretty(&report).expect("report serializes");
            ctx.emit("ratio.json", body.as_bytes())?;
            for row in &report.rows {
                println!(
                    "u = {:<5} mc {:.4e}  asym {:.4e}  ratio {:.3}{}",
                    row.u,
                    row.mc_estimate,
                    row.asymptotic,
                    row.ratio,
                    if row.underpowered { "  [underpowered]" } else { "" }
                );
            }
            let mut argv = vec![
                "ratio".into(),
                "--spec".into(),
                spec.display().to_string(),
                "--u-list".into(),
                fmt_list(&u_list),
                "--reps".into(),
                reps.to_string(),
            ];
            match (&pickands, &pickands_const) {
                (Some(p), _) => {
                    argv.push("--pickands".into());
                    argv.push(p.display().to_string());
                }
                (None, Some(v)) => {
                    argv.push("--pickands-const".into());
                    argv.push(fmt_list(v));
                }
                _ => {}
            }
            if let Some(s) = step {
                argv.push("--step".into());
                argv.push(s.to_string());
            }
            argv.extend([
                "--seed".into(),
                seed.to_string(),
                "--threads".into(),
                common.threads.to_string(),
                "--out".into(),
                ctx.out_dir.display().to_string(),
            ]);
            ctx.finish("ratio", argv, seed, common.threads)?;
            Ok(0)
        }
        Command::Sample {
            spec,
            count,
            step,
            format,
            common,
        } => {
            configure_threads(common.threads);
            let seed = resolve_seed(common.seed);
            let parsed = load_spec(&spec)?;
            let (lo, hi) = parsed.domain();
            let nodes = ((hi - lo) / step).ceil() as usize + 1;
            let grid = Arc::new(Grid::uniform(lo, hi, nodes, parsed.k)?);
            let kernel = field_kernel(&parsed);
            let chol = build_cov_matrix(&grid.points(), &kernel)?;
            let values = cholesky_sample(&chol, count, seed, 0);
            let mut ctx = RunContext::new(&common.out, "sample");
            ctx.inputs.push(spec.display().to_string());
            for (r, vals) in values.into_iter().enumerate() {
                let path = SamplePath::new(grid.clone(), vals, seed, r as u64)?;
                let mut buf = Vec::new();
                match format.as_str() {
                    "csv" => {
                        path.write_csv(&mut buf)?;
                        ctx.emit(&format!("path_{r:04}.csv"), &buf)?;
                    }
                    "bin" => {
                        path.write_binary(&mut buf)?;
                        ctx.emit(&format!("path_{r:04}.bin"), &buf)?;
                    }
                    other => {
                        return Err(Error::Domain(format!(
                            "unknown format `{other}`; expected csv or bin"
                        )))
                    }
                }
            }
            println!("wrote {count} path(s) on a {}-point grid", grid.len());
            let argv = vec![
                "sample".into(),
                "--spec".into(),
                spec.display().to_string(),
                "--count".into(),
                count.to_string(),
                "--step".into(),
                step.to_string(),
                "--format".into(),
                format.clone(),
                "--seed".into(),
                seed.to_string(),
                "--threads".into(),
                common.threads.to_string(),
                "--out".into(),
                ctx.out_dir.display().to_string(),
            ];
            ctx.finish("sample", argv, seed, common.threads)?;
            Ok(0)
        }
        Command::Replay { manifest } => {
            let text = std::fs::read_to_string(&manifest)?;
            let m: RunManifest = serde_json::from_str(&text)?;
            let mut argv = vec!["supex".to_string()];
            argv.extend(m.argv.iter().cloned());
            let cli = Cli::try_parse_from(&argv).map_err(|e| {
                Error::Domain(format!("manifest argv does not parse: {e}"))
            })?;
            run(cli)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pickands_json_forms() {
        let v = parse_pickands_json("[1.0, 0.9]", 2).unwrap();
        assert_eq!(v[1].value, 0.9);
        let v = parse_pickands_json(r#"[{"estimate": 1.01, "standard_error": 0.02}]"#, 1).unwrap();
        assert_eq!(v[0].standard_error, 0.02);
        assert!(parse_pickands_json("[1.0]", 2).is_err());
        assert!(parse_pickands_json(r#"[{"foo": 1}]"#, 1).is_err());
    }

    #[test]
    fn validation_report_passes_stationary() {
        let spec = FieldSpec::from_json_str(
            r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#,
        )
        .unwrap();
        let rep = validate_spec_report(&spec, D4_DEFAULT_TOL);
        assert!(rep.passed, "{:?}", rep.conditions);
    }

    #[test]
    fn validation_reports_a1_failure_for_misdeclared_min() {
        let spec = FieldSpec::from_json_str(
            r#"{"k":1,"k1":1,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"constant","value":1.0}]}"#,
        )
        .unwrap();
        let rep = validate_spec_report(&spec, D4_DEFAULT_TOL);
        assert!(!rep.passed);
        assert!(rep
            .conditions
            .iter()
            .any(|c| c.name.starts_with("A1") && !c.passed));
    }

    #[test]
    fn validation_reports_d3_failure_for_vanishing_scale() {
        let spec = FieldSpec::from_json_str(
            r#"{"k":1,"k1":0,"T":1.0,
            "profiles":[{"kind":"constant","alpha0":1.0}],
            "variance_scales":[{"form":"grid","points":[[0.0,1.0]],"values":[0.0,1.0]}]}"#,
        )
        .unwrap();
        let rep = validate_spec_report(&spec, D4_DEFAULT_TOL);
        assert!(!rep.passed);
        assert!(rep
            .conditions
            .iter()
            .any(|c| c.name.starts_with("D3") && !c.passed));
    }
}
