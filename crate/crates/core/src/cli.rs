//! Command-line front end. Every output starts with the fully resolved
//! configuration, which is itself a valid `--config` file.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::deterministic::{
    captured_top_mass, choose_truncation, compute_waiting_time, compute_werner_profile,
    mean_bounds, three_over_two_estimate, WernerProfile,
};
use crate::error::Error;
use crate::montecarlo::{dkw_epsilon, required_samples, run_campaign_with, CampaignConfig, DEFAULT_Z};
use crate::params::{nesting_level, parse_coherence_time, ProtocolParams};
use crate::werner::werner_from_fidelity;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_COVERAGE: i32 = 2;
pub const EXIT_COMPARE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "repchain", version, about = "Waiting time and fidelity of nested quantum repeater chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CommandKind {
    Deterministic,
    Montecarlo,
    MeanBounds,
    Compare,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact waiting-time distribution per level, optionally with Werner profiles.
    Deterministic(Settings),
    /// Monte Carlo campaign with DKW confidence bands.
    Montecarlo(Settings),
    /// Bounds on the mean waiting time against the 3-over-2 estimate; sweeps allowed.
    MeanBounds(Settings),
    /// Runs both engines and checks the ECDF against the exact CDF.
    Compare(Settings),
}

impl Command {
    fn split(self) -> (CommandKind, Settings) {
        match self {
            Command::Deterministic(s) => (CommandKind::Deterministic, s),
            Command::Montecarlo(s) => (CommandKind::Montecarlo, s),
            Command::MeanBounds(s) => (CommandKind::MeanBounds, s),
            Command::Compare(s) => (CommandKind::Compare, s),
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Deterministic => "deterministic",
            CommandKind::Montecarlo => "montecarlo",
            CommandKind::MeanBounds => "mean-bounds",
            CommandKind::Compare => "compare",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Coherence time accepting `inf`; serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceTime(pub f64);

impl FromStr for CoherenceTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_coherence_time(s).map(CoherenceTime)
    }
}

impl Serialize for CoherenceTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        crate::params::coherence_time::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for CoherenceTime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::params::coherence_time::deserialize(d).map(CoherenceTime)
    }
}

/// Run settings. Flags override values from `--config`; JSON keys are the
/// long flag names.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct Settings {
    /// Elementary link generation probability; a comma-separated list sweeps (mean-bounds).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub pgen: Vec<f64>,
    /// Sweep p_gen over k / COUNT for k = 1..=COUNT (mean-bounds).
    #[arg(long, value_name = "COUNT")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgen_grid: Option<u32>,
    /// Swap success probability.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pswap: Option<f64>,
    /// Werner parameter of elementary links.
    #[arg(long, conflicts_with = "f0")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    /// Fidelity of elementary links, alternative to --w0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    /// Memory coherence time in time steps, or `inf`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tcoh: Option<CoherenceTime>,
    /// Number of segments, a power of two; a comma-separated list sweeps (mean-bounds).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(deserialize_with = "one_or_many", skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<u64>,
    /// Distillation rounds before every swap.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distill: Option<u32>,
    /// Account for the heralding delay of every swap.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comm_time: Option<bool>,
    /// Truncation time.
    #[arg(long, conflicts_with = "coverage")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ttrunc: Option<usize>,
    /// Choose the truncation time guaranteeing this captured mass.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<f64>,
    /// Compute the time-conditioned Werner parameter and fidelity.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub werner: Option<bool>,
    /// Monte Carlo sample count.
    #[arg(long, conflicts_with = "eps")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// Target DKW band half-width; sets the sample count together with --z.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// DKW confidence parameter.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Monte Carlo worker threads; all cores by default.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Largest time listed in Monte Carlo output; later samples are counted as overflow.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub display_cap: Option<u64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output file; standard output if absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// JSON file with settings; explicit flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

impl Settings {
    /// `self` where set, `base` otherwise.
    fn overlay(self, base: Settings) -> Settings {
        fn vec_or<T>(a: Vec<T>, b: Vec<T>) -> Vec<T> {
            if a.is_empty() {
                b
            } else {
                a
            }
        }
        // An explicit --w0 or --f0 replaces either from the file.
        let (w0, f0) = if self.w0.is_some() || self.f0.is_some() {
            (self.w0, self.f0)
        } else {
            (base.w0, base.f0)
        };
        let (ttrunc, coverage) = if self.ttrunc.is_some() || self.coverage.is_some() {
            (self.ttrunc, self.coverage)
        } else {
            (base.ttrunc, base.coverage)
        };
        let (samples, eps) = if self.samples.is_some() || self.eps.is_some() {
            (self.samples, self.eps)
        } else {
            (base.samples, base.eps)
        };
        Settings {
            pgen: vec_or(self.pgen, base.pgen),
            pgen_grid: self.pgen_grid.or(base.pgen_grid),
            pswap: self.pswap.or(base.pswap),
            w0,
            f0,
            tcoh: self.tcoh.or(base.tcoh),
            segments: vec_or(self.segments, base.segments),
            distill: self.distill.or(base.distill),
            comm_time: self.comm_time.or(base.comm_time),
            ttrunc,
            coverage,
            werner: self.werner.or(base.werner),
            samples,
            eps,
            z: self.z.or(base.z),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            display_cap: self.display_cap.or(base.display_cap),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
            config: None,
        }
    }
}

/// CLI failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::invalid(format!("i/o error: {e}"))
    }
}

type CliResult<T> = Result<T, Failure>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Output goes to `--out` or `stdout`; diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let (kind, settings) = cli.command.split();
    match execute(kind, settings, stdout, stderr) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(
    kind: CommandKind,
    cli: Settings,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<i32> {
    let settings = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
            let file: Settings = serde_json::from_str(&text)
                .map_err(|e| Failure::invalid(format!("invalid config {}: {e}", path.display())))?;
            cli.overlay(file)
        }
        None => cli,
    };
    let (code, body) = match kind {
        CommandKind::Deterministic => cmd_deterministic(settings.clone())?,
        CommandKind::Montecarlo => cmd_montecarlo(settings.clone())?,
        CommandKind::MeanBounds => cmd_mean_bounds(settings.clone())?,
        CommandKind::Compare => cmd_compare(settings.clone())?,
    };
    let rendered = render(kind, &body);
    match &settings.out {
        Some(path) => fs::write(path, rendered)?,
        None => stdout.write_all(rendered.as_bytes())?,
    }
    if let Some(msg) = body.warning {
        writeln!(stderr, "warning: {msg}")?;
    }
    Ok(code)
}

/// Command output before formatting.
struct Output {
    format: Format,
    config: Settings,
    /// Scalar results, in order.
    summary: Vec<(&'static str, Value)>,
    columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
    /// JSON layout of the table, if it differs from a list of row objects.
    json_table: Option<(&'static str, Value)>,
    warning: Option<String>,
}

enum Cell {
    Int(u64),
    Num(f64),
    Missing,
}

impl Cell {
    fn opt(x: Option<f64>) -> Cell {
        x.map_or(Cell::Missing, Cell::Num)
    }

    fn csv(&self) -> String {
        match *self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format_number(x),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match *self {
            Cell::Int(i) => json!(i),
            Cell::Num(x) => json!(x),
            Cell::Missing => Value::Null,
        }
    }
}

/// Shortest round-trip representation, in exponent form for very small or
/// large magnitudes.
fn format_number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn render(kind: CommandKind, out: &Output) -> String {
    let config = serde_json::to_value(&out.config).expect("settings serialize");
    match out.format {
        Format::Csv => {
            let mut s = format!("# repchain {kind}\n# config: {config}\n");
            for (k, v) in &out.summary {
                s.push_str(&format!("# {k}: {}\n", scalar_text(v)));
            }
            s.push_str(&out.columns.join(","));
            s.push('\n');
            for row in &out.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("command".into(), json!(kind.to_string()));
            obj.insert("config".into(), config);
            for (k, v) in &out.summary {
                obj.insert((*k).into(), v.clone());
            }
            match &out.json_table {
                Some((name, table)) => {
                    obj.insert((*name).into(), table.clone());
                }
                None => {
                    let rows: Vec<Value> = out
                        .rows
                        .iter()
                        .map(|row| {
                            Value::Object(
                                out.columns
                                    .iter()
                                    .zip(row)
                                    .map(|(c, v)| ((*c).to_string(), v.json()))
                                    .collect(),
                            )
                        })
                        .collect();
                    obj.insert("rows".into(), Value::Array(rows));
                }
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("json");
            s.push('\n');
            s
        }
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format_number(x),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn single<T: Copy>(values: &[T], name: &str) -> CliResult<T> {
    match values {
        [x] => Ok(*x),
        [] => Err(Failure::invalid(format!("--{name} is required"))),
        _ => Err(Failure::invalid(format!("--{name} takes a single value for this command"))),
    }
}

/// Protocol parameters with every default filled in; `settings` is updated
/// to the resolved values.
fn resolve_params(settings: &mut Settings, pgen: f64, segments: u64) -> CliResult<ProtocolParams> {
    let pswap = settings
        .pswap
        .ok_or_else(|| Failure::invalid("--pswap is required"))?;
    let n = nesting_level(segments)?;
    let w0 = match (settings.w0, settings.f0) {
        (Some(_), Some(_)) => return Err(Failure::invalid("give either --w0 or --f0, not both")),
        (Some(w), None) => w,
        (None, Some(f)) => werner_from_fidelity(f)?.value(),
        (None, None) => 1.0,
    };
    if settings.f0.is_none() {
        settings.w0 = Some(w0);
    }
    let t_coh = settings.tcoh.get_or_insert(CoherenceTime(f64::INFINITY)).0;
    let d = *settings.distill.get_or_insert(0);
    let comm = *settings.comm_time.get_or_insert(false);
    let params = ProtocolParams::new(pgen, pswap, n)
        .with_w0(w0)
        .with_t_coh(t_coh)
        .with_distillation(d)
        .with_comm_time(comm);
    params.validate_physics()?;
    Ok(params)
}

fn resolve_truncation(settings: &Settings, params: &ProtocolParams) -> CliResult<usize> {
    match (settings.ttrunc, settings.coverage) {
        (Some(t), None) => Ok(t),
        (None, Some(c)) => Ok(choose_truncation(params, c)?),
        (Some(_), Some(_)) => Err(Failure::invalid("give either --ttrunc or --coverage, not both")),
        (None, None) => Err(Failure::invalid("one of --ttrunc or --coverage is required")),
    }
}

fn resolve_samples(settings: &mut Settings) -> CliResult<(u64, f64)> {
    let z = *settings.z.get_or_insert(DEFAULT_Z);
    let m = match (settings.samples, settings.eps) {
        (Some(m), None) => m,
        (None, Some(eps)) => required_samples(eps, z)?,
        (Some(_), Some(_)) => return Err(Failure::invalid("give either --samples or --eps, not both")),
        (None, None) => return Err(Failure::invalid("one of --samples or --eps is required")),
    };
    if m == 0 {
        return Err(Failure::invalid("--samples must be at least 1"));
    }
    Ok((m, z))
}

fn cmd_deterministic(mut settings: Settings) -> CliResult<(i32, Output)> {
    let pgen = single(&settings.pgen, "pgen")?;
    let segments = single(&settings.segments, "segments")?;
    let mut params = resolve_params(&mut settings, pgen, segments)?;
    params.t_trunc = resolve_truncation(&settings, &params)?;
    let with_werner = *settings.werner.get_or_insert(false);
    let format = *settings.format.get_or_insert(Format::Csv);

    let dists = compute_waiting_time(&params)?;
    let profile: Option<WernerProfile> = if with_werner {
        Some(compute_werner_profile(&params, &dists)?)
    } else {
        None
    };
    let mass = captured_top_mass(&dists);

    let mut rows = Vec::with_capacity(dists.levels() * (params.t_trunc + 1));
    let mut levels_json = Vec::new();
    for level in 0..dists.levels() {
        let pmf = dists.pmf(level).probs();
        let cdf = dists.cdf(level).cum();
        let werner = |t: usize| profile.as_ref().and_then(|p| p.get(level, t));
        let fidelity = |t: usize| profile.as_ref().and_then(|p| p.fidelity(level, t));
        for t in 0..=params.t_trunc {
            rows.push(vec![
                Cell::Int(level as u64),
                Cell::Int(t as u64),
                Cell::Num(pmf[t]),
                Cell::Num(cdf[t]),
                Cell::opt(werner(t)),
                Cell::opt(fidelity(t)),
            ]);
        }
        let mut entry = json!({ "level": level, "pmf": pmf, "cdf": cdf });
        if profile.is_some() {
            entry["werner"] = json!((0..=params.t_trunc).map(werner).collect::<Vec<_>>());
            entry["fidelity"] = json!((0..=params.t_trunc).map(fidelity).collect::<Vec<_>>());
        }
        levels_json.push(entry);
    }

    let (code, warning) = match settings.coverage {
        Some(c) if mass < c => (
            EXIT_COVERAGE,
            Some(format!("captured mass {mass} below requested coverage {c}")),
        ),
        _ => (EXIT_OK, None),
    };
    Ok((
        code,
        Output {
            format,
            config: settings,
            summary: vec![
                ("n", json!(params.n)),
                ("t_trunc", json!(params.t_trunc)),
                ("captured_mass", json!(mass)),
            ],
            columns: &["level", "t", "pmf", "cdf", "werner", "fidelity"],
            rows,
            json_table: Some(("levels", Value::Array(levels_json))),
            warning,
        },
    ))
}

fn campaign_config(settings: &Settings, z: f64) -> CampaignConfig {
    CampaignConfig {
        z,
        display_cap: settings.display_cap,
        threads: settings.threads,
    }
}

fn cmd_montecarlo(mut settings: Settings) -> CliResult<(i32, Output)> {
    let pgen = single(&settings.pgen, "pgen")?;
    let segments = single(&settings.segments, "segments")?;
    let params = resolve_params(&mut settings, pgen, segments)?;
    let (m, z) = resolve_samples(&mut settings)?;
    let seed = *settings.seed.get_or_insert(0);
    let format = *settings.format.get_or_insert(Format::Csv);

    let result = run_campaign_with(&params, m, seed, &campaign_config(&settings, z))?;
    let eps = result.dkw_eps;
    let mut counts = vec![0u64; result.ecdf.t_trunc() + 1];
    for t in result.times() {
        if let Some(c) = counts.get_mut(t as usize) {
            *c += 1;
        }
    }
    let rows = result
        .ecdf
        .cum()
        .iter()
        .enumerate()
        .map(|(t, &e)| {
            let werner = result.werner_by_time.get(&(t as u64)).map(|v| v.0);
            vec![
                Cell::Int(t as u64),
                Cell::Num(e),
                Cell::Num((e - eps).max(0.0)),
                Cell::Num((e + eps).min(1.0)),
                Cell::opt(werner),
                Cell::Int(counts[t]),
            ]
        })
        .collect();
    Ok((
        EXIT_OK,
        Output {
            format,
            config: settings,
            summary: vec![
                ("n", json!(params.n)),
                ("seed", json!(seed)),
                ("samples", json!(m)),
                ("z", json!(z)),
                ("dkw_eps", json!(eps)),
                ("sample_mean_time", json!(result.sample_mean_time)),
                ("standard_error", json!(result.standard_error)),
                ("mean_werner", json!(result.mean_werner())),
                ("mean_fidelity", json!(result.mean_fidelity())),
                ("overflow", json!(result.overflow)),
            ],
            columns: &["t", "ecdf", "ecdf_lo", "ecdf_hi", "werner_mean", "count"],
            rows,
            json_table: None,
            warning: None,
        },
    ))
}

fn cmd_mean_bounds(mut settings: Settings) -> CliResult<(i32, Output)> {
    let pgens: Vec<f64> = match (settings.pgen_grid, settings.pgen.is_empty()) {
        (Some(_), false) => return Err(Failure::invalid("give either --pgen or --pgen-grid, not both")),
        (Some(0), true) => return Err(Failure::invalid("--pgen-grid must be at least 1")),
        (Some(k), true) => (1..=k).map(|i| i as f64 / k as f64).collect(),
        (None, false) => settings.pgen.clone(),
        (None, true) => return Err(Failure::invalid("--pgen or --pgen-grid is required")),
    };
    if settings.segments.is_empty() {
        return Err(Failure::invalid("--segments is required"));
    }
    let segment_list = settings.segments.clone();
    let format = *settings.format.get_or_insert(Format::Csv);

    let mut rows = Vec::new();
    for &segments in &segment_list {
        for &pgen in &pgens {
            let mut params = resolve_params(&mut settings, pgen, segments)?;
            params.t_trunc = resolve_truncation(&settings, &params)?;
            let bounds = mean_bounds(&params)?;
            let estimate = three_over_two_estimate(&params);
            rows.push(vec![
                Cell::Int(segments),
                Cell::Int(params.n as u64),
                Cell::Num(pgen),
                Cell::Num(params.p_swap),
                Cell::Int(params.t_trunc as u64),
                Cell::Num(bounds.lower),
                Cell::Num(bounds.upper),
                Cell::Num(estimate),
                Cell::Num(bounds.lower / estimate),
                Cell::Num(bounds.upper / estimate),
            ]);
        }
    }
    Ok((
        EXIT_OK,
        Output {
            format,
            config: settings,
            summary: vec![],
            columns: &[
                "segments",
                "n",
                "pgen",
                "pswap",
                "ttrunc",
                "lower",
                "upper",
                "three_over_two",
                "ratio_lower",
                "ratio_upper",
            ],
            rows,
            json_table: None,
            warning: None,
        },
    ))
}

fn cmd_compare(mut settings: Settings) -> CliResult<(i32, Output)> {
    let pgen = single(&settings.pgen, "pgen")?;
    let segments = single(&settings.segments, "segments")?;
    let mut params = resolve_params(&mut settings, pgen, segments)?;
    if params.d > 0 {
        return Err(Error::DistillationUnsupported(params.d).into());
    }
    params.t_trunc = resolve_truncation(&settings, &params)?;
    let (m, z) = resolve_samples(&mut settings)?;
    let seed = *settings.seed.get_or_insert(0);
    let format = *settings.format.get_or_insert(Format::Csv);

    let dists = compute_waiting_time(&params)?;
    let campaign = run_campaign_with(&params, m, seed, &campaign_config(&settings, z))?;
    let distance = campaign.sup_distance(dists.top_cdf());
    let threshold = dkw_epsilon(m, z)?;
    let pass = distance <= threshold;
    let code = if pass { EXIT_OK } else { EXIT_COMPARE };
    Ok((
        code,
        Output {
            format,
            config: settings,
            summary: vec![
                ("n", json!(params.n)),
                ("t_trunc", json!(params.t_trunc)),
                ("samples", json!(m)),
                ("seed", json!(seed)),
                ("z", json!(z)),
                ("distance", json!(distance)),
                ("threshold", json!(threshold)),
                ("pass", json!(pass)),
            ],
            columns: &["t", "cdf", "ecdf", "abs_diff"],
            rows: dists
                .top_cdf()
                .cum()
                .iter()
                .enumerate()
                .map(|(t, &c)| {
                    let e = campaign
                        .ecdf
                        .cum()
                        .get(t)
                        .copied()
                        .unwrap_or(1.0 - campaign.overflow as f64 / m as f64);
                    vec![Cell::Int(t as u64), Cell::Num(c), Cell::Num(e), Cell::Num((e - c).abs())]
                })
                .collect(),
            json_table: None,
            warning: (!pass).then(|| format!("distance {distance} exceeds DKW threshold {threshold}")),
        },
    ))
}
