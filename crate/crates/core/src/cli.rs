//! Command-line surface: CSV ingestion and output, the Superior Set report,
//! run manifests and the command pipeline behind the `mcs` binary.
//!
//! Every command writes its result to `--out` (or stdout) and a JSON
//! manifest to `<out>.manifest.json` (or stderr). `mcs replay <manifest>`
//! reruns a recorded command.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{self, VarBacktestReport};
use crate::error::{Error, Result};
use crate::garch::{self, Dynamics, GarchSpec, Innovation, RollForecast};
use crate::losses::{self, LevelLossKind, LossMatrix, LossVarConfig, ModelOutputs, VarLossVariant, VolLossKind};
use crate::mcs::{self, McsConfig, SsmResult, Statistic};

const RULE_WIDTH: usize = 78;
const REPORT_TITLE: &str = "-                            Superior Set of Models                          -";
const TEXT_DIGITS: usize = 7;

/// Raw CSV contents with the header row split off.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    label: String,
    headers: Vec<String>,
    /// `(line number, cells)` of every data row.
    rows: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn parse_error(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.label.clone(),
            line,
            msg: msg.into(),
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| self.parse_error(1, format!("no column named {name:?}")))
    }

    /// Parses column `j` as finite numbers.
    pub fn numeric_column(&self, j: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, (line, cells))| {
                let cell = &cells[j];
                let v: f64 = cell.parse().map_err(|_| {
                    self.parse_error(
                        *line,
                        format!("row {}, column {:?}: cannot parse {cell:?} as a number", r + 1, self.headers[j]),
                    )
                })?;
                if !v.is_finite() {
                    return Err(self.parse_error(
                        *line,
                        format!("row {}, column {:?}: non-finite value {cell:?}", r + 1, self.headers[j]),
                    ));
                }
                Ok(v)
            })
            .collect()
    }

    pub fn numeric_columns(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.headers.len()).map(|j| self.numeric_column(j)).collect()
    }

    /// The named column, or the only column when `name` is `None`.
    pub fn series(&self, name: Option<&str>) -> Result<Vec<f64>> {
        let j = match name {
            Some(name) => self.column_index(name)?,
            None if self.headers.len() == 1 => 0,
            None => {
                return Err(self.parse_error(
                    1,
                    format!("expected a single column, found {}; pick one with --column", self.headers.len()),
                ))
            }
        };
        self.numeric_column(j)
    }
}

/// Reads a CSV with a mandatory header row of unique names.
pub fn read_table_from<R: Read>(reader: R, label: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_error = |line: usize, msg: String| Error::Parse {
        path: label.to_string(),
        line,
        msg,
    };
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(rec)) => rec,
        Some(Err(e)) => return Err(parse_error(csv_line(&e), e.to_string())),
        None => return Err(parse_error(1, "missing header row".into())),
    };
    let headers: Vec<String> = header.iter().map(str::to_string).collect();
    for (j, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(parse_error(1, format!("column {} has an empty name", j + 1)));
        }
        if headers[..j].contains(h) {
            return Err(parse_error(1, format!("duplicate column name {h:?}")));
        }
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_error(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != headers.len() {
            return Err(parse_error(
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(parse_error(2, "no data rows".into()));
    }
    Ok(Table {
        label: label.to_string(),
        headers,
        rows,
    })
}

fn csv_line(e: &csv::Error) -> usize {
    e.position().map_or(0, |p| p.line() as usize)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table_from(io::BufReader::new(file), &path.display().to_string())
}

/// Reads a loss matrix: one column per model, one row per period.
pub fn read_loss_csv(path: &Path) -> Result<LossMatrix> {
    loss_from_table(&read_table(path)?)
}

pub fn loss_from_table(table: &Table) -> Result<LossMatrix> {
    LossMatrix::from_columns(table.headers.clone(), &table.numeric_columns()?)
}

/// CSV bytes with full-precision (round-trip) numbers.
pub fn columns_to_csv(names: &[String], columns: &[Vec<f64>]) -> Result<Vec<u8>> {
    let n = columns.first().map_or(0, Vec::len);
    if columns.len() != names.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::DimensionMismatch("columns and names do not line up".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numeric(format!("csv encoding failed: {e}"));
    w.write_record(names).map_err(csv_err)?;
    for t in 0..n {
        w.write_record(columns.iter().map(|c| format_full(c[t]))).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Numeric(format!("csv encoding failed: {e}")))
}

pub fn write_loss_csv(loss: &LossMatrix, path: &Path) -> Result<()> {
    let cols: Vec<Vec<f64>> = (0..loss.m()).map(|i| loss.column(i).to_vec()).collect();
    let bytes = columns_to_csv(loss.names(), &cols)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn format_full(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else if x.is_infinite() {
        if x > 0.0 { "Inf" } else { "-Inf" }.into()
    } else {
        format!("{x}")
    }
}

fn format_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), format_full)
}

// Decimal places that give `digits` significant digits for `x`.
fn sig_decimals(x: f64, digits: usize) -> usize {
    if x == 0.0 || !x.is_finite() {
        return 0;
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    (digits as i32 - 1 - exp).clamp(0, 15) as usize
}

// Formats a column with a shared number of decimals, like a printed table.
fn format_column(values: &[Option<f64>], digits: usize) -> Vec<String> {
    let decimals = values
        .iter()
        .flatten()
        .map(|&x| sig_decimals(x, digits))
        .max()
        .unwrap_or(0);
    values
        .iter()
        .map(|v| match v {
            None => "NA".to_string(),
            Some(x) if x.is_nan() => "NaN".to_string(),
            Some(x) if x.is_infinite() => if *x > 0.0 { "Inf" } else { "-Inf" }.to_string(),
            Some(x) => format!("{x:.decimals$}"),
        })
        .collect()
}

fn trim_decimal(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Elapsed time as `X secs`, `X mins`, `X hours` or `X days`.
pub fn format_elapsed(d: Duration) -> String {
    let secs = d.as_secs_f64();
    let (v, unit) = if secs < 60.0 {
        (secs, "secs")
    } else if secs < 3600.0 {
        (secs / 60.0, "mins")
    } else if secs < 86400.0 {
        (secs / 3600.0, "hours")
    } else {
        (secs / 86400.0, "days")
    };
    let dec = sig_decimals(v, 7);
    format!("{} {unit}", trim_decimal(format!("{v:.dec$}")))
}

/// Text report in the classic Superior Set layout.
pub fn render_text(result: &SsmResult) -> String {
    let rows = &result.superior;
    let headers = ["Rank_M", "v_M", "MCS_M", "Rank_R", "v_R", "MCS_R", "Loss"];
    let pv = |x: f64| format!("{x:.4}");
    let v_m: Vec<Option<f64>> = rows.iter().map(|r| r.v_m).collect();
    let v_r: Vec<Option<f64>> = rows.iter().map(|r| r.v_r).collect();
    let loss: Vec<Option<f64>> = rows.iter().map(|r| Some(r.loss)).collect();
    let columns: Vec<Vec<String>> = vec![
        rows.iter().map(|r| r.rank_m.to_string()).collect(),
        format_column(&v_m, TEXT_DIGITS),
        rows.iter().map(|r| pv(r.mcs_m)).collect(),
        rows.iter().map(|r| r.rank_r.to_string()).collect(),
        format_column(&v_r, TEXT_DIGITS),
        rows.iter().map(|r| pv(r.mcs_r)).collect(),
        format_column(&loss, TEXT_DIGITS),
    ];
    let name_width = rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = headers
        .iter()
        .zip(&columns)
        .map(|(h, c)| c.iter().map(String::len).chain([h.len()]).max().unwrap_or(0))
        .collect();

    let rule = "-".repeat(RULE_WIDTH);
    let mut out = String::new();
    out.push_str(&rule);
    out.push('\n');
    out.push_str(REPORT_TITLE);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    out.push_str(&" ".repeat(name_width));
    for (h, w) in headers.iter().zip(&widths) {
        out.push_str(&format!(" {h:>w$}"));
    }
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!("{:<name_width$}", r.name));
        for (c, w) in columns.iter().zip(&widths) {
            out.push_str(&format!(" {:>w$}", c[i]));
        }
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    out.push_str("Details\n");
    out.push_str(&format!("Number of eliminated models : {}\n", result.eliminated.len()));
    out.push_str(&format!("Statistic : {}\n", result.statistic));
    out.push_str(&format!("Elapsed Time : Time difference of {}\n", format_elapsed(result.elapsed)));
    out
}

/// Machine-readable report: one row per surviving model, full precision.
pub fn render_csv(result: &SsmResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numeric(format!("csv encoding failed: {e}"));
    w.write_record([
        "model", "rank_m", "v_m", "mcs_m", "rank_r", "v_r", "mcs_r", "loss", "statistic", "eliminated",
    ])
    .map_err(csv_err)?;
    let statistic = result.statistic.to_string();
    let eliminated = result.eliminated.len().to_string();
    for r in &result.superior {
        w.write_record([
            r.name.clone(),
            r.rank_m.to_string(),
            format_opt(r.v_m),
            format_full(r.mcs_m),
            r.rank_r.to_string(),
            format_opt(r.v_r),
            format_full(r.mcs_r),
            format_full(r.loss),
            statistic.clone(),
            eliminated.clone(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numeric(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Writes the report to `path`, or to stdout when `path` is `None`.
pub fn write_ssm_report(result: &SsmResult, path: Option<&Path>, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Text => render_text(result),
        ReportFormat::Csv => render_csv(result)?,
    };
    emit(path, text.as_bytes())
}

/// Loss family selected by `loss --kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Var,
    Vol(VolLossKind),
    Level(LevelLossKind),
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Var => f.write_str("VaR"),
            LossKind::Vol(k) => k.fmt(f),
            LossKind::Level(k) => k.fmt(f),
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("var") {
            return Ok(LossKind::Var);
        }
        if let Ok(k) = s.parse() {
            return Ok(LossKind::Vol(k));
        }
        if let Ok(k) = s.parse() {
            return Ok(LossKind::Level(k));
        }
        Err(Error::invalid(format!(
            "unknown loss kind {s:?}; expected VaR, SE1, SE2, QLIKE, R2LOG, AE1, AE2, SE or AE"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Normal,
    Differentiable,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LossArgs {
    /// VaR, SE1, SE2, QLIKE, R2LOG, AE1, AE2, SE or AE.
    #[arg(long)]
    pub kind: LossKind,
    /// VaR level; required for `--kind VaR`.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Smoothing parameter of the differentiable VaR loss.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Normal)]
    pub variant: VariantArg,
    /// Realized values (returns, volatility proxy or levels).
    #[arg(long)]
    pub realized: PathBuf,
    /// Column of the realized file to use when it has several.
    #[arg(long)]
    pub column: Option<String>,
    /// Model outputs, one column per model.
    #[arg(long)]
    pub evaluated: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct McsArgs {
    /// Loss matrix CSV, one column per model.
    pub input: PathBuf,
    #[arg(long, default_value_t = mcs::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Number of bootstrap resamples.
    #[arg(long = "B", visible_alias = "resamples", value_name = "B", default_value_t = mcs::DEFAULT_RESAMPLES)]
    pub resamples: usize,
    /// Tmax or TR.
    #[arg(long, default_value_t = Statistic::Tmax)]
    pub statistic: Statistic,
    /// Bootstrap block length; chosen from AR fits when omitted.
    #[arg(long)]
    pub block_len: Option<usize>,
    /// AR order cap for automatic block length selection.
    #[arg(long)]
    pub max_lag: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, 0 for all available.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GarchRollArgs {
    /// Returns CSV.
    pub input: PathBuf,
    #[arg(long)]
    pub column: Option<String>,
    /// garch, gjr or egarch; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',', default_value = "garch")]
    pub dynamics: Vec<Dynamics>,
    /// norm or std; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',', default_value = "norm")]
    pub innovation: Vec<Innovation>,
    /// Number of one-step forecasts at the end of the sample.
    #[arg(long)]
    pub forecast_length: usize,
    /// Refit the model every this many forecasts.
    #[arg(long)]
    pub refit_every: usize,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BacktestArgs {
    /// Realized returns CSV.
    #[arg(long)]
    pub returns: PathBuf,
    #[arg(long)]
    pub column: Option<String>,
    /// VaR forecasts, one column per series.
    #[arg(long)]
    pub var: PathBuf,
    #[arg(long)]
    pub tau: f64,
    /// Add a row for the cross-series average VaR.
    #[arg(long)]
    pub average: bool,
    /// Use the last returns when the returns series is longer than the VaR series.
    #[arg(long)]
    pub tail: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Compute a loss matrix from realized values and model outputs.
    Loss(LossArgs),
    /// Run the Model Confidence Set procedure on a loss matrix.
    Mcs(McsArgs),
    /// Rolling one-step VaR forecasts from GARCH-type models.
    GarchRoll(GarchRollArgs),
    /// Backtest VaR forecasts (AE, ADmean, ADmax).
    Backtest(BacktestArgs),
    /// Rerun the command recorded in a manifest.
    Replay(ReplayArgs),
}

impl Command {
    fn out(&self) -> Option<&Path> {
        match self {
            Command::Loss(a) => a.out.as_deref(),
            Command::Mcs(a) => a.out.as_deref(),
            Command::GarchRoll(a) => a.out.as_deref(),
            Command::Backtest(a) => a.out.as_deref(),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mcs", version, about = "Model Confidence Set toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Everything needed to rerun a command bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        Self {
            tool: "mcs".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            msg: e.to_string(),
        })
    }

    /// Checks flag values before any input is read.
    pub fn validate(&self) -> Result<()> {
        match &self.command {
            Command::Loss(a) => loss_config(a).map(|_| ()),
            Command::Mcs(a) => mcs_config(a).validate(),
            Command::GarchRoll(a) => {
                if a.dynamics.is_empty() || a.innovation.is_empty() {
                    return Err(Error::invalid("need at least one dynamics and one innovation"));
                }
                if a.refit_every == 0 {
                    return Err(Error::invalid("--refit-every must be at least 1"));
                }
                if a.forecast_length == 0 {
                    return Err(Error::invalid("--forecast-length must be at least 1"));
                }
                check_tau(a.tau)
            }
            Command::Backtest(a) => check_tau(a.tau),
            Command::Replay(_) => Err(Error::invalid("a manifest cannot record a replay")),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")))
    }
}

fn loss_config(a: &LossArgs) -> Result<Option<LossVarConfig>> {
    match a.kind {
        LossKind::Var => {
            let tau = a.tau.ok_or_else(|| Error::invalid("--kind VaR requires --tau"))?;
            let cfg = match a.variant {
                VariantArg::Normal => {
                    if a.delta.is_some() {
                        return Err(Error::invalid("--delta only applies to --variant differentiable"));
                    }
                    LossVarConfig::new(tau, VarLossVariant::Normal)
                }
                VariantArg::Differentiable => {
                    let cfg = LossVarConfig::new(tau, VarLossVariant::Differentiable);
                    match a.delta {
                        Some(d) => cfg.with_delta(d),
                        None => cfg,
                    }
                }
            };
            cfg.validate()?;
            Ok(Some(cfg))
        }
        _ => {
            if a.tau.is_some() || a.delta.is_some() || a.variant != VariantArg::Normal {
                return Err(Error::invalid(format!(
                    "--tau, --delta and --variant only apply to --kind VaR, not {}",
                    a.kind
                )));
            }
            Ok(None)
        }
    }
}

fn mcs_config(a: &McsArgs) -> McsConfig {
    McsConfig {
        alpha: a.alpha,
        resamples: a.resamples,
        statistic: a.statistic,
        block_len: a.block_len,
        seed: a.seed,
        max_lag: a.max_lag,
        ..McsConfig::default()
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Runs the Model Confidence Set command and returns the result.
pub fn run_mcs(a: &McsArgs) -> Result<SsmResult> {
    let cfg = mcs_config(a);
    cfg.validate()?;
    let loss = read_loss_csv(&a.input)?;
    with_threads(a.threads, || mcs::mcs_procedure(&loss, &cfg))?
}

/// Computes the loss matrix requested by `a`.
pub fn run_loss(a: &LossArgs) -> Result<LossMatrix> {
    let var_cfg = loss_config(a)?;
    let realized = read_table(&a.realized)?.series(a.column.as_deref())?;
    let table = read_table(&a.evaluated)?;
    let evaluated = ModelOutputs::from_columns(table.headers().to_vec(), &table.numeric_columns()?)?;
    match (a.kind, var_cfg) {
        (LossKind::Var, Some(cfg)) => losses::loss_var(&realized, &evaluated, &cfg),
        (LossKind::Vol(k), _) => losses::loss_vol(&realized, &evaluated, k),
        (LossKind::Level(k), _) => losses::loss_level(&realized, &evaluated, k),
        (LossKind::Var, None) => unreachable!("VaR config is always built"),
    }
}

/// Rolling forecasts for every dynamics x innovation combination.
pub fn run_garch_roll(a: &GarchRollArgs) -> Result<Vec<RollForecast>> {
    let returns = read_table(&a.input)?.series(a.column.as_deref())?;
    let mut specs: Vec<GarchSpec> = Vec::new();
    for &d in &a.dynamics {
        for &i in &a.innovation {
            let s = GarchSpec::new(d, i);
            if !specs.contains(&s) {
                specs.push(s);
            }
        }
    }
    let results: Vec<Result<RollForecast>> = with_threads(a.threads, || {
        specs
            .par_iter()
            .map(|s| garch::roll_var_forecast(s, &returns, a.forecast_length, a.refit_every, a.tau))
            .collect()
    })?;
    results.into_iter().collect()
}

/// One report per VaR column, plus the average when requested.
pub fn run_backtest(a: &BacktestArgs) -> Result<Vec<(String, VarBacktestReport)>> {
    check_tau(a.tau)?;
    let returns = read_table(&a.returns)?.series(a.column.as_deref())?;
    let table = read_table(&a.var)?;
    let cols = table.numeric_columns()?;
    let n = table.n_rows();
    let returns = if a.tail && returns.len() > n {
        &returns[returns.len() - n..]
    } else {
        &returns[..]
    };
    let mut reports = Vec::new();
    for (name, col) in table.headers().iter().zip(&cols) {
        reports.push((name.clone(), backtest::backtest(returns, col, a.tau)?));
    }
    if a.average {
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let avg = backtest::average_var(&refs)?;
        reports.push(("average".into(), backtest::backtest(returns, &avg, a.tau)?));
    }
    Ok(reports)
}

pub fn render_backtest_csv(reports: &[(String, VarBacktestReport)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Numeric(format!("csv encoding failed: {e}"));
    w.write_record(["series", "n", "tau", "violations", "AE", "ADmean", "ADmax"])
        .map_err(csv_err)?;
    for (name, r) in reports {
        w.write_record([
            name.clone(),
            r.n.to_string(),
            format_full(r.tau),
            r.violations.to_string(),
            format_full(r.ae),
            format_opt(r.ad_mean),
            format_opt(r.ad_max),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Numeric(format!("csv encoding failed: {e}")))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Validates and executes the manifest's command, then writes the manifest
/// next to the output.
pub fn run_pipeline(manifest: &RunManifest) -> Result<()> {
    if let Command::Replay(r) = &manifest.command {
        let inner = RunManifest::load(&r.manifest)?;
        return run_pipeline(&inner);
    }
    manifest.validate()?;
    let out = manifest.command.out();
    match &manifest.command {
        Command::Loss(a) => {
            let loss = run_loss(a)?;
            let cols: Vec<Vec<f64>> = (0..loss.m()).map(|i| loss.column(i).to_vec()).collect();
            emit(out, &columns_to_csv(loss.names(), &cols)?)?;
        }
        Command::Mcs(a) => {
            let result = run_mcs(a)?;
            write_ssm_report(&result, out, a.format)?;
        }
        Command::GarchRoll(a) => {
            let forecasts = run_garch_roll(a)?;
            for f in &forecasts {
                for r in f.refits.iter().filter(|r| r.error.is_some()) {
                    eprintln!(
                        "warning: {} refit at forecast {} kept previous parameters: {}",
                        f.spec.label(),
                        r.at,
                        r.error.as_deref().unwrap_or_default()
                    );
                }
            }
            let names: Vec<String> = forecasts.iter().map(|f| f.spec.label()).collect();
            let cols: Vec<Vec<f64>> = forecasts.into_iter().map(|f| f.var).collect();
            emit(out, &columns_to_csv(&names, &cols)?)?;
        }
        Command::Backtest(a) => {
            let reports = run_backtest(a)?;
            emit(out, &render_backtest_csv(&reports)?)?;
        }
        Command::Replay(_) => unreachable!("handled above"),
    }
    let json = manifest.to_json();
    match out {
        Some(path) => {
            let mp = manifest_path(path);
            fs::write(&mp, json).map_err(|e| Error::io(mp, e))?;
        }
        None => eprint!("{json}"),
    }
    Ok(())
}

/// Exit status for an error: 1 for validation, 2 for runtime failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

/// Parses arguments, runs the command and returns the process exit code.
/// Diagnostics go to stderr as a single line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return 1;
        }
    };
    match run_pipeline(&RunManifest::new(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}
