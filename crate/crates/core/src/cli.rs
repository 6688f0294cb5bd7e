//! Command-line front end. [`main_with`] parses arguments, runs one
//! subcommand and maps failures to exit codes: 0 success, 1 internal error,
//! 2 user or configuration error. Every nonzero exit writes one JSON error
//! document to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::damage::{fit_dldr, fit_qratio, knee_from_power, Interval};
use crate::data::{builtin_constraints, load_single_load_csv, load_two_load_csv, DatasetId, TwoLoadDataset};
use crate::distributions::{fit_maxent, fmt17, Bound, MomentConstraints, Univariate, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::Error;
use crate::nonparam::{convergence_diagnostic, DEFAULT_SHUFFLES, DEFAULT_TAIL_FRACTION, DEFAULT_THRESHOLD};
use crate::plot::{Heatmap, Plot, Series, Style};
use crate::propagate::{
    band_from_result, build_input_model, conditional_summary, knee_joint_density, n2_distribution,
    run, summarize, ConditionalSummary, InputJointModel, MarginalSpec, ModelKind, PropagationResult, DEFAULT_BETA1,
    DEFAULT_LEVELS,
};

/// Seed used when neither `--seed` nor the config supplies one.
pub const DEFAULT_SEED: u64 = 20_190_601;
/// Monte Carlo draws used when neither `--samples` nor the config supplies a count.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Points in the `(x, pdf)` grid written by `fit-maxent`.
pub const DEFAULT_GRID_POINTS: usize = 1000;

const REFERENCE: &str = r#"Every subcommand except `datasets` reads one JSON document given by
--config. Relative file paths inside a config resolve against the config's
directory. Unknown keys are rejected. An optional "description" string is
accepted everywhere and ignored.

Global flags
  --seed <u64>      overrides "seed"; default 20190601
  --samples <n>     overrides "n_samples"; default 10000
  --out <dir>       write artifacts into <dir> and print a JSON manifest;
                    without it the primary artifact goes to stdout
  --svg             also write SVG plots (needs --out)
  --threads <n>     worker threads; results do not depend on it

fit-maxent
  support      [lo, hi], numbers or "-inf"/"+inf"           (required)
  mean, std    moment targets, each optional
  cov          alternative to std: std = cov * |mean|
  tol          Newton tolerance on moment residuals; default 1e-10
  max_iter     Newton iteration cap; default 60
  grid_points  rows of the (x, pdf) grid; default 1000
  artifacts    fit.json (primary), pdf_grid.csv, pdf.svg

converge
  data           single-load CSV of lifetimes                (required)
  shuffles       default 3
  tail_fraction  default 0.2
  threshold      default 0.05
  seed           default as above
  artifacts      convergence.json (primary), running_std.svg

fit-params
  model      "dldr" or "nonlinear"                           (required)
  two_load   two-load CSV                                    (required)
  life_high  mean life at the first (high) level: a number or a
             single-load CSV whose mean is used              (required)
  life_low   same for the second (low) level                 (required)
  alpha_box  dldr search box for alpha; default [-1, 1]
  b_box      dldr search box for B; default [0, 1]
  n_e        endurance cycles, required for nonlinear
  artifacts  fit_params.json (primary), fit_params.svg

propagate, knee-prob, band
  model      "ldr", "dldr" or "nonlinear"                    (required)
  params     map from N1, N2, alpha, B, q_ratio to a marginal (required)
             {"kind": "maxent-fixed", "constraints": {"support": [..], "mean": m, "std": s}}
             {"kind": "maxent-hierarchical", "support": [..], "mean": m, "cov_lo": a, "cov_hi": b}
             {"kind": "kde-from-data", "data": [..], "reflect_lo": 0}
             {"kind": "kde-from-file", "path": "lives.csv", "reflect_lo": 0}
             {"kind": "point-mass", "value": v}
  fixed      {"n_e": ...} for nonlinear
  n1_values  applied first-level cycles for propagate; default []
  n_samples  default 10000
  seed       default 20190601
  beta1      knee-prob abscissae; default [0.25, 0.5, 0.75]
  window     knee-prob half-width; default normal-reference bandwidth
  levels     band quantile levels; default [0.01, 0.5, 0.99]
  n1_grid    band grid: a list or {"from": a, "to": b, "points": k} (band only, required)
  two_load   band overlay CSV of observations (optional)
  artifacts  propagate: summary.json (primary), draws.csv, n2_density.svg, knee_density.svg
             knee-prob: knee_prob.json (primary), knee_density.svg
             band:      band.csv (primary), band.svg

datasets [name]
  built-in constraint tables for tanaka, xie045 and xie16mn as JSON
  artifacts  datasets.json (primary)

Exit codes: 0 success, 1 internal error, 2 user or configuration error.
Errors are reported on stderr as {"error": {"code": .., "kind": .., "message": ..}}.
"#;

/// Markdown reference page generated from the same text as `--help`.
pub fn reference_page() -> String {
    format!("# dldr configuration reference\n\n```text\n{REFERENCE}```\n")
}

#[derive(Debug, Parser)]
#[command(
    name = "dldr",
    version,
    about = "Probabilistic double linear damage rule toolkit",
    after_long_help = REFERENCE
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalOpts {
    /// JSON config for the subcommand
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed [default: 20190601]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo draws [default: 10000]
    #[arg(long, global = true, value_name = "N")]
    pub samples: Option<usize>,
    /// Output directory; without it the primary artifact is printed
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Also write SVG plots into the output directory
    #[arg(long, global = true)]
    pub svg: bool,
    /// Worker threads (results do not depend on it)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fit a maximum-entropy density to support and moment constraints
    FitMaxent,
    /// Running standard-deviation convergence check of a lifetime sample
    Converge,
    /// Fit DLDR (alpha, B) or the nonlinear q-ratio to two-load data
    FitParams,
    /// Monte Carlo propagation: draw table and summary
    Propagate,
    /// Conditional knee-location probabilities of a DLDR run
    KneeProb,
    /// Quantile band of remaining life over an n1 grid
    Band,
    /// Print the built-in constraint tables
    Datasets {
        /// tanaka, xie045 or xie16mn; all when omitted
        name: Option<String>,
    },
}

/// Failure with its exit code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn user(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            kind: "internal".into(),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidInput(_) => "invalid_input",
            Error::Infeasible(_) => "infeasible",
            Error::NoConvergence(_) => "no_convergence",
            Error::Degenerate(_) => "degenerate",
            Error::EmptyWindow { .. } => "empty_window",
            Error::Domain(_) => "domain",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "config",
        };
        // files named on the command line or in a config are user input
        let code = if e.is_user_error() || matches!(e, Error::Io(_)) { 2 } else { 1 };
        CliError {
            code,
            kind: kind.into(),
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Files produced by one subcommand. The first text artifact is primary.
#[derive(Debug, Default)]
struct Artifacts {
    files: Vec<(String, String)>,
    svgs: Vec<(String, String)>,
}

impl Artifacts {
    fn primary(name: &str, body: String) -> Self {
        Artifacts {
            files: vec![(name.into(), body)],
            svgs: Vec::new(),
        }
    }

    fn file(&mut self, name: &str, body: String) {
        self.files.push((name.into(), body));
    }

    fn svg(&mut self, name: &str, plot: &Plot) {
        self.svgs.push((name.into(), plot.to_svg()));
    }
}

struct Ctx {
    opts: GlobalOpts,
}

impl Ctx {
    fn config_path(&self) -> CliResult<&Path> {
        self.opts
            .config
            .as_deref()
            .ok_or_else(|| CliError::user("usage", "this subcommand needs --config <path>"))
    }

    /// Config document and the directory its relative paths resolve against.
    fn load_value(&self) -> CliResult<(Value, PathBuf)> {
        let path = self.config_path()?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user("io", format!("cannot read config {}: {e}", path.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::user("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((v, base))
    }

    fn seed(&self, config: Option<u64>) -> u64 {
        self.opts.seed.or(config).unwrap_or(DEFAULT_SEED)
    }

    fn samples(&self, config: Option<usize>) -> usize {
        self.opts.samples.or(config).unwrap_or(DEFAULT_SAMPLES)
    }

    fn wants_svg(&self) -> bool {
        self.opts.svg
    }
}

fn parse_config<T: DeserializeOwned>(v: Value, path: &Path) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::user("config", format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MaxentConfig {
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    support: [Bound; 2],
    mean: Option<f64>,
    std: Option<f64>,
    cov: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    grid_points: Option<usize>,
}

fn cmd_fit_maxent(ctx: &Ctx) -> CliResult<Artifacts> {
    let (v, _) = ctx.load_value()?;
    let c: MaxentConfig = parse_config(v, ctx.config_path()?)?;
    let std = match (c.std, c.cov) {
        (Some(_), Some(_)) => return Err(CliError::user("config", "give either std or cov, not both")),
        (s, None) => s,
        (None, Some(cov)) => {
            let m = c.mean.ok_or_else(|| CliError::user("config", "cov needs a mean"))?;
            Some(cov * m.abs())
        }
    };
    let cons = MomentConstraints::new(c.support[0].0, c.support[1].0, c.mean, std)?;
    let fit = fit_maxent(&cons, c.tol.unwrap_or(DEFAULT_TOL), c.max_iter.unwrap_or(DEFAULT_MAX_ITER))?;
    let n = c.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    if n < 2 {
        return Err(CliError::user("config", "grid_points must be at least 2"));
    }

    // extend the library document in place to keep its 17-digit numbers
    let mut doc = fit.to_json();
    doc.pop();
    doc.push_str(&format!(
        ",\"fitted_mean\":{},\"fitted_std\":{},\"iterations\":{}}}\n",
        fmt17(fit.fitted_mean()),
        fmt17(fit.fitted_std()),
        fit.iterations()
    ));
    let mut out = Artifacts::primary("fit.json", doc);

    // infinite ends are cut at far quantiles
    let lo = if cons.support_lo.is_finite() { cons.support_lo } else { fit.quantile(1e-9)? };
    let hi = if cons.support_hi.is_finite() { cons.support_hi } else { fit.quantile(1.0 - 1e-9)? };
    let grid: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x, fit.pdf(x))
        })
        .collect();
    let mut csv = String::from("x,pdf\n");
    for (x, p) in &grid {
        csv.push_str(&format!("{x},{p}\n"));
    }
    out.file("pdf_grid.csv", csv);
    if ctx.wants_svg() {
        let plot = Plot::new("Maximum-entropy density", "x", "pdf").with(Series::new("pdf", grid, Style::Line));
        out.svg("pdf.svg", &plot);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergeConfig {
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    data: String,
    shuffles: Option<usize>,
    tail_fraction: Option<f64>,
    threshold: Option<f64>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct ConvergeDoc<'a> {
    data: &'a str,
    n: usize,
    seed: u64,
    #[serde(flatten)]
    report: &'a crate::nonparam::ConvergenceReport,
}

fn cmd_converge(ctx: &Ctx) -> CliResult<Artifacts> {
    let (v, base) = ctx.load_value()?;
    let c: ConvergeConfig = parse_config(v, ctx.config_path()?)?;
    let data = load_single_load_csv(resolve(&base, &c.data))?;
    let seed = ctx.seed(c.seed);
    let report = convergence_diagnostic(
        &data.lifetimes,
        c.shuffles.unwrap_or(DEFAULT_SHUFFLES),
        c.tail_fraction.unwrap_or(DEFAULT_TAIL_FRACTION),
        c.threshold.unwrap_or(DEFAULT_THRESHOLD),
        seed,
    )?;
    let doc = ConvergeDoc {
        data: &c.data,
        n: data.lifetimes.len(),
        seed,
        report: &report,
    };
    let mut out = Artifacts::primary("convergence.json", pretty(&doc));
    if ctx.wants_svg() {
        let mut plot = Plot::new("Running standard deviation", "samples", "std");
        for (k, t) in report.trajectories.iter().enumerate() {
            let pts = t.iter().enumerate().skip(1).map(|(i, s)| ((i + 1) as f64, *s)).collect();
            plot.series.push(Series::new(format!("shuffle {}", k + 1), pts, Style::Line));
        }
        out.svg("running_std.svg", &plot);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LifeSource {
    Value(f64),
    File(String),
}

impl LifeSource {
    fn mean(&self, base: &Path) -> CliResult<f64> {
        match self {
            LifeSource::Value(v) if *v > 0.0 && v.is_finite() => Ok(*v),
            LifeSource::Value(v) => Err(CliError::user("config", format!("life must be positive, got {v}"))),
            LifeSource::File(p) => {
                let d = load_single_load_csv(resolve(base, p))?;
                Ok(d.lifetimes.iter().sum::<f64>() / d.lifetimes.len() as f64)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FitParamsConfig {
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    model: ModelKind,
    two_load: String,
    life_high: LifeSource,
    life_low: LifeSource,
    alpha_box: Option<[f64; 2]>,
    b_box: Option<[f64; 2]>,
    n_e: Option<f64>,
}

fn cmd_fit_params(ctx: &Ctx) -> CliResult<Artifacts> {
    let (v, base) = ctx.load_value()?;
    let c: FitParamsConfig = parse_config(v, ctx.config_path()?)?;
    let data = load_two_load_csv(resolve(&base, &c.two_load))?;
    let l1 = c.life_high.mean(&base)?;
    let l2 = c.life_low.mean(&base)?;
    let means = data.mean_points();
    let ratios: Vec<(f64, f64)> = means.iter().map(|&(n1, n2)| (n1 / l1, n2 / l2)).collect();
    let mut warnings = Vec::new();
    let doc = match c.model {
        ModelKind::Dldr => {
            let [a0, a1] = c.alpha_box.unwrap_or([-1.0, 1.0]);
            let [b0, b1] = c.b_box.unwrap_or([0.0, 1.0]);
            let fit = fit_dldr(&ratios, l1 / l2, Interval::new(a0, a1)?, Interval::new(b0, b1)?)?;
            if fit.flat_alpha {
                warnings.push("objective is flat in alpha at the optimum; alpha is not identified by these points".to_string());
            }
            if fit.flat_b {
                warnings.push("objective is flat in B at the optimum; B is not identified by these points".to_string());
            }
            let knee = knee_from_power(fit.params.b, (l1 / l2).powf(fit.params.alpha));
            serde_json::json!({
                "model": "dldr",
                "alpha": fit.params.alpha,
                "b": fit.params.b,
                "knee": knee,
                "sse": fit.sse,
                "flat_alpha": fit.flat_alpha,
                "flat_b": fit.flat_b,
                "life_high": l1,
                "life_low": l2,
                "points": ratios,
                "warnings": warnings,
            })
        }
        ModelKind::Nonlinear => {
            let n_e = c.n_e.ok_or_else(|| CliError::user("config", "nonlinear fitting needs n_e"))?;
            let q = fit_qratio(&means, l1, l2, n_e)?;
            serde_json::json!({
                "model": "nonlinear",
                "q_ratio": q,
                "n_e": n_e,
                "life_high": l1,
                "life_low": l2,
                "points": ratios,
                "warnings": warnings,
            })
        }
        ModelKind::Ldr => return Err(CliError::user("config", "the linear rule has no parameters to fit")),
    };
    let mut out = Artifacts::primary("fit_params.json", pretty(&doc));
    if ctx.wants_svg() {
        let curve: Vec<(f64, f64)> = match c.model {
            ModelKind::Dldr => {
                let k = knee_from_power(doc["b"].as_f64().unwrap_or(0.0), (l1 / l2).powf(doc["alpha"].as_f64().unwrap_or(0.0)));
                if k.inside_unit_square {
                    vec![(0.0, 1.0), (k.beta1_knee, k.beta2_knee), (1.0, 0.0)]
                } else {
                    Vec::new()
                }
            }
            _ => {
                let q = doc["q_ratio"].as_f64().unwrap_or(1.0);
                let p = crate::damage::NonlinearParams::new(c.n_e.unwrap_or(f64::NAN), q)?;
                (1..100)
                    .filter_map(|i| {
                        let b1 = i as f64 / 100.0;
                        crate::damage::nonlinear_remaining(b1 * l1, l1, l2, p).ok().map(|n2| (b1, n2 / l2))
                    })
                    .collect()
            }
        };
        let plot = Plot::new("Fitted damage curve", "beta1", "beta2")
            .with(Series::new("fit", curve, Style::Line))
            .with(Series::new("linear rule", vec![(0.0, 1.0), (1.0, 0.0)], Style::Dashed))
            .with(Series::new("group means", ratios, Style::Points));
        out.svg("fit_params.svg", &plot);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridSpec {
    List(Vec<f64>),
    Range { from: f64, to: f64, points: usize },
}

impl GridSpec {
    fn values(&self) -> CliResult<Vec<f64>> {
        match self {
            GridSpec::List(v) if !v.is_empty() => Ok(v.clone()),
            GridSpec::List(_) => Err(CliError::user("config", "n1_grid is empty")),
            GridSpec::Range { from, to, points } => {
                if *points < 2 || !(to > from) {
                    return Err(CliError::user("config", "n1_grid range needs points >= 2 and to > from"));
                }
                Ok((0..*points).map(|i| from + (to - from) * i as f64 / (*points - 1) as f64).collect())
            }
        }
    }
}

/// Propagation config shared by `propagate`, `knee-prob` and `band`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub description: Option<String>,
    pub model: ModelKind,
    pub params: BTreeMap<String, MarginalSpec>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub n1_values: Vec<f64>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default = "default_beta1")]
    pub beta1: Vec<f64>,
    pub window: Option<f64>,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default)]
    n1_grid: Option<GridSpec>,
    #[serde(default)]
    pub two_load: Option<String>,
}

fn default_beta1() -> Vec<f64> {
    DEFAULT_BETA1.to_vec()
}

fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}

/// Replaces `kde-from-file` marginals with `kde-from-data` read from disk.
fn inline_files(v: &mut Value, base: &Path) -> CliResult<()> {
    let Some(params) = v.get_mut("params").and_then(Value::as_object_mut) else {
        return Ok(());
    };
    for (name, spec) in params.iter_mut() {
        let Some(obj) = spec.as_object_mut() else { continue };
        if obj.get("kind").and_then(Value::as_str) != Some("kde-from-file") {
            continue;
        }
        let path = obj
            .get("path")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::user("config", format!("{name}: kde-from-file needs a path")))?;
        if let Some(k) = obj.keys().find(|k| !["kind", "path", "reflect_lo", "reflect_hi"].contains(&k.as_str())) {
            return Err(CliError::user("config", format!("{name}: unknown field '{k}' in kde-from-file")));
        }
        let data = load_single_load_csv(resolve(base, path))?;
        obj.insert("kind".into(), "kde-from-data".into());
        obj.remove("path");
        obj.insert("data".into(), data.lifetimes.into());
    }
    Ok(())
}

impl RunConfig {
    fn load(ctx: &Ctx) -> CliResult<(Self, PathBuf)> {
        let (mut v, base) = ctx.load_value()?;
        inline_files(&mut v, &base)?;
        Ok((parse_config(v, ctx.config_path()?)?, base))
    }

    fn model(&self) -> CliResult<InputJointModel> {
        Ok(build_input_model(&self.params, self.model, &self.fixed)?)
    }
}

fn knee_plot(r: &PropagationResult) -> CliResult<Plot> {
    let joint = knee_joint_density(r)?;
    let g = joint.grid(80, 80);
    let mut plot = Plot::new("Joint knee density", "beta1 knee", "beta2 knee")
        .with(Series::new("linear rule", vec![(0.0, 1.0), (1.0, 0.0)], Style::Dashed));
    let lo = g.xs[0].max(0.0);
    let hi = g.xs[g.xs.len() - 1].min(1.0);
    plot.series[0].points = vec![(lo, 1.0 - lo), (hi, 1.0 - hi)];
    plot.heatmap = Some(Heatmap {
        xs: g.xs,
        ys: g.ys,
        values: g.values,
    });
    Ok(plot)
}

fn cmd_propagate(ctx: &Ctx) -> CliResult<Artifacts> {
    let (c, _) = RunConfig::load(ctx)?;
    let model = c.model()?;
    let r = run(&model, &c.n1_values, ctx.samples(c.n_samples), ctx.seed(c.seed))?;
    let beta1: &[f64] = if c.model == ModelKind::Dldr { &c.beta1 } else { &[] };
    let summary = summarize(&r, &model, beta1)?;
    let mut out = Artifacts::primary("summary.json", pretty(&summary));
    out.file("draws.csv", r.to_csv());
    if ctx.wants_svg() {
        let mut plot = Plot::new("Remaining-life densities", "n2", "density");
        for &n1 in &c.n1_values {
            if let Ok(d) = n2_distribution(&r, n1) {
                plot.series.push(Series::new(format!("n1 = {n1}"), d.density.grid(200), Style::Line));
            }
        }
        out.svg("n2_density.svg", &plot);
        if c.model == ModelKind::Dldr {
            if let Ok(p) = knee_plot(&r) {
                out.svg("knee_density.svg", &p);
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct KneeDoc {
    model_kind: ModelKind,
    seed: u64,
    n_samples: usize,
    excluded_fraction: f64,
    estimates: Vec<ConditionalSummary>,
}

fn cmd_knee_prob(ctx: &Ctx) -> CliResult<Artifacts> {
    let (c, _) = RunConfig::load(ctx)?;
    if c.model != ModelKind::Dldr {
        return Err(CliError::user("config", "knee-prob needs model \"dldr\""));
    }
    if c.beta1.is_empty() {
        return Err(CliError::user("config", "beta1 is empty"));
    }
    let model = c.model()?;
    let r = run(&model, &[], ctx.samples(c.n_samples), ctx.seed(c.seed))?;
    let mut estimates = Vec::new();
    for &b in &c.beta1 {
        if !(b > 0.0 && b < 1.0) {
            return Err(CliError::user("config", format!("beta1 values must lie in (0, 1), got {b}")));
        }
        estimates.push(conditional_summary(&r, &model, b, c.window));
    }
    let doc = KneeDoc {
        model_kind: r.model_kind,
        seed: r.seed,
        n_samples: r.n_samples,
        excluded_fraction: r.excluded_fraction(),
        estimates,
    };
    let mut out = Artifacts::primary("knee_prob.json", pretty(&doc));
    if ctx.wants_svg() {
        if let Ok(p) = knee_plot(&r) {
            out.svg("knee_density.svg", &p);
        }
    }
    Ok(out)
}

fn observations(d: &TwoLoadDataset) -> Vec<(f64, f64)> {
    d.groups
        .iter()
        .flat_map(|g| g.observations.iter().map(move |&v| (g.n1, v)))
        .collect()
}

fn cmd_band(ctx: &Ctx) -> CliResult<Artifacts> {
    let (c, base) = RunConfig::load(ctx)?;
    let grid = c
        .n1_grid
        .as_ref()
        .ok_or_else(|| CliError::user("config", "band needs n1_grid"))?
        .values()?;
    let overlay = c.two_load.as_deref().map(|p| load_two_load_csv(resolve(&base, p))).transpose()?;
    let model = c.model()?;
    let r = run(&model, &grid, ctx.samples(c.n_samples), ctx.seed(c.seed))?;
    let band = band_from_result(&r, &c.levels)?;
    let mut out = Artifacts::primary("band.csv", band.to_csv());
    if ctx.wants_svg() {
        let mut plot = Plot::new(format!("Remaining-life band ({})", c.model.name()), "n1", "n2");
        for (l, level) in band.levels.iter().enumerate() {
            let pts = band.n1.iter().zip(&band.quantiles).map(|(n1, q)| (*n1, q[l])).collect();
            let style = if (*level - 0.5).abs() < 1e-12 { Style::Line } else { Style::Dashed };
            plot.series.push(Series::new(format!("q{level}"), pts, style));
        }
        if let Some(d) = &overlay {
            plot.series.push(Series::new("observations", observations(d), Style::Points));
        }
        out.svg("band.svg", &plot);
    }
    Ok(out)
}

fn cmd_datasets(name: Option<&str>) -> CliResult<Artifacts> {
    let ids: Vec<DatasetId> = match name {
        Some(n) => vec![DatasetId::parse(n)?],
        None => DatasetId::ALL.to_vec(),
    };
    let tables: Vec<_> = ids.into_iter().map(builtin_constraints).collect();
    let body = if tables.len() == 1 { pretty(&tables[0]) } else { pretty(&tables) };
    Ok(Artifacts::primary("datasets.json", body))
}

fn dispatch(cli: &Cli) -> CliResult<Artifacts> {
    let ctx = Ctx { opts: cli.opts.clone() };
    match &cli.command {
        Command::FitMaxent => cmd_fit_maxent(&ctx),
        Command::Converge => cmd_converge(&ctx),
        Command::FitParams => cmd_fit_params(&ctx),
        Command::Propagate => cmd_propagate(&ctx),
        Command::KneeProb => cmd_knee_prob(&ctx),
        Command::Band => cmd_band(&ctx),
        Command::Datasets { name } => cmd_datasets(name.as_deref()),
    }
}

fn emit(opts: &GlobalOpts, a: Artifacts, stdout: &mut dyn Write) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::user("io", e.to_string());
    match &opts.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::user("io", format!("{}: {e}", dir.display())))?;
            let mut written = Vec::new();
            for (name, body) in a.files.iter().chain(&a.svgs) {
                let p = dir.join(name);
                std::fs::write(&p, body).map_err(|e| CliError::user("io", format!("{}: {e}", p.display())))?;
                written.push(p.display().to_string());
            }
            stdout
                .write_all(pretty(&serde_json::json!({ "written": written })).as_bytes())
                .map_err(io)
        }
        None => stdout.write_all(a.files[0].1.as_bytes()).map_err(io),
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<()> {
    if cli.opts.svg && cli.opts.out.is_none() {
        return Err(CliError::user("usage", "--svg needs --out <dir>"));
    }
    if cli.opts.samples == Some(0) {
        return Err(CliError::user("usage", "--samples must be at least 1"));
    }
    let artifacts = match cli.opts.threads {
        Some(0) => return Err(CliError::user("usage", "--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::internal(e.to_string()))?
            .install(|| dispatch(cli))?,
        None => dispatch(cli)?,
    };
    emit(&cli.opts, artifacts, stdout)
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.exit_code() == 0 => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let err = CliError::user("usage", e.to_string().trim_end());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.code;
        }
    };
    let result = catch_unwind(AssertUnwindSafe(|| execute(&cli, stdout)))
        .unwrap_or_else(|p| Err(CliError::internal(panic_message(p.as_ref()))));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with(std::iter::once("dldr").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn datasets_and_usage_errors() {
        let (code, out, _) = call(&["datasets", "xie045"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["alpha"]["mean"], 0.34);
        let (code, _, err) = call(&["datasets", "nope"]);
        assert_eq!(code, 2);
        let v: Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"]["kind"], "invalid_input");
        let (code, _, err) = call(&["frobnicate"]);
        assert_eq!(code, 2);
        assert!(err.contains("\"usage\""));
        assert_eq!(call(&["propagate"]).0, 2);
        assert_eq!(call(&["datasets", "--svg"]).0, 2);
        assert_eq!(call(&["datasets", "--threads", "0"]).0, 2);
    }

    #[test]
    fn help_documents_defaults() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("20190601") && out.contains("[0.01, 0.5, 0.99]"));
    }

    #[test]
    fn error_mapping() {
        assert_eq!(CliError::from(Error::NoConvergence("x".into())).code, 1);
        assert_eq!(CliError::from(Error::Infeasible("x".into())).code, 2);
        assert_eq!(CliError::from(Error::Io(std::io::Error::other("x"))).code, 2);
    }
}
