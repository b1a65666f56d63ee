//! Loss functions and the loss matrix consumed by the MCS procedure.
//!
//! All matrices are stored time-major: row `t` holds period `t`, column `i`
//! holds model `i`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothness used by the differentiable VaR loss when none is given.
pub const DEFAULT_DELTA: f64 = 25.0;

/// Per-period losses of `m` models over `n` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    values: Array2<f64>,
    names: Vec<String>,
}

impl LossMatrix {
    /// Builds a loss matrix from an `n x m` array and `m` unique model names.
    ///
    /// Requires `n >= 2`, `m >= 1` and finite entries.
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        validate_panel(&values, &names, "loss matrix")?;
        if values.nrows() < 2 {
            return Err(Error::invalid(format!(
                "loss matrix needs at least 2 periods, got {}",
                values.nrows()
            )));
        }
        Ok(Self { values, names })
    }

    /// Builds a loss matrix from per-model columns of equal length.
    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let values = columns_to_array(columns)?;
        Self::new(values, names)
    }

    /// Number of periods.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of models.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn column(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.column(i)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Arithmetic mean loss of every model.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.values
            .axis_iter(Axis(1))
            .map(|c| c.iter().sum::<f64>() / n)
            .collect()
    }

    /// New matrix holding the given columns in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::invalid("column selection is empty"));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.m()) {
            return Err(Error::invalid(format!("column {bad} out of range")));
        }
        let values = self.values.select(Axis(1), columns);
        let names = columns.iter().map(|&c| self.names[c].clone()).collect();
        Self::new(values, names)
    }

    /// Adds the same per-period value to every column.
    pub fn shifted_by(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "shift has length {}, loss matrix has {} periods",
                shift.len(),
                self.n()
            )));
        }
        let mut values = self.values.clone();
        for (mut row, &s) in values.axis_iter_mut(Axis(0)).zip(shift) {
            row.mapv_inplace(|v| v + s);
        }
        Self::new(values, self.names.clone())
    }

    pub fn into_parts(self) -> (Array2<f64>, Vec<String>) {
        (self.values, self.names)
    }
}

/// Model outputs (forecasts, VaR levels, fitted values) to be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutputs {
    values: Array2<f64>,
    names: Vec<String>,
}

impl ModelOutputs {
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        validate_panel(&values, &names, "evaluated")?;
        Ok(Self { values, names })
    }

    pub fn from_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        Self::new(columns_to_array(columns)?, names)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }
}

fn columns_to_array(columns: &[Vec<f64>]) -> Result<Array2<f64>> {
    let m = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "column {i} has length {}, expected {n}",
            c.len()
        )));
    }
    Ok(Array2::from_shape_fn((n, m), |(t, i)| columns[i][t]))
}

fn validate_panel(values: &Array2<f64>, names: &[String], what: &'static str) -> Result<()> {
    if values.ncols() == 0 {
        return Err(Error::invalid(format!("{what}: at least one model is required")));
    }
    if values.nrows() == 0 {
        return Err(Error::invalid(format!("{what}: no periods")));
    }
    if names.len() != values.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {} names for {} columns",
            names.len(),
            values.ncols()
        )));
    }
    let mut seen = HashSet::with_capacity(names.len());
    for name in names {
        if !seen.insert(name.as_str()) {
            return Err(Error::invalid(format!("{what}: duplicate model name {name:?}")));
        }
    }
    check_finite_matrix(values.view(), what)
}

fn check_finite_matrix(values: ArrayView2<'_, f64>, what: &'static str) -> Result<()> {
    for ((row, col), v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what, row, col });
        }
    }
    Ok(())
}

fn check_finite_vec(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(Error::NonFinite { what, row, col: 0 }),
        None => Ok(()),
    }
}

fn check_lengths(realized: &[f64], evaluated: &ModelOutputs) -> Result<()> {
    if realized.len() != evaluated.n() {
        return Err(Error::DimensionMismatch(format!(
            "realized has {} periods, evaluated has {}",
            realized.len(),
            evaluated.n()
        )));
    }
    Ok(())
}

/// Which form of the asymmetric quantile loss to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarLossVariant {
    /// Hard violation indicator.
    Normal,
    /// Logistic smoothing of the indicator with parameter `delta`.
    Differentiable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossVarConfig {
    pub tau: f64,
    pub variant: VarLossVariant,
    pub delta: f64,
}

impl LossVarConfig {
    pub fn new(tau: f64, variant: VarLossVariant) -> Self {
        Self {
            tau,
            variant,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Smoothed violation indicator `1 / (1 + exp(delta * (a - b)))`.
pub fn smooth_indicator(a: f64, b: f64, delta: f64) -> f64 {
    let x = delta * (a - b);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Asymmetric quantile loss of a single VaR forecast.
pub fn var_loss(y: f64, var: f64, cfg: &LossVarConfig) -> f64 {
    let hit = match cfg.variant {
        VarLossVariant::Normal => {
            if y < var {
                1.0
            } else {
                0.0
            }
        }
        VarLossVariant::Differentiable => smooth_indicator(y, var, cfg.delta),
    };
    (cfg.tau - hit) * (y - var)
}

/// Scores VaR forecasts (one column per model) against realized returns.
pub fn loss_var(realized: &[f64], evaluated: &ModelOutputs, cfg: &LossVarConfig) -> Result<LossMatrix> {
    cfg.validate()?;
    check_lengths(realized, evaluated)?;
    check_finite_vec(realized, "realized")?;
    let values = Array2::from_shape_fn((evaluated.n(), evaluated.m()), |(t, i)| {
        var_loss(realized[t], evaluated.values[[t, i]], cfg)
    });
    LossMatrix::new(values, evaluated.names.clone())
}

/// Volatility losses. Inputs are standard deviations, not variances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VolLossKind {
    SE1,
    SE2,
    QLIKE,
    R2LOG,
    AE1,
    AE2,
}

impl VolLossKind {
    pub const ALL: [VolLossKind; 6] = [
        VolLossKind::SE1,
        VolLossKind::SE2,
        VolLossKind::QLIKE,
        VolLossKind::R2LOG,
        VolLossKind::AE1,
        VolLossKind::AE2,
    ];
}

impl fmt::Display for VolLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VolLossKind::SE1 => "SE1",
            VolLossKind::SE2 => "SE2",
            VolLossKind::QLIKE => "QLIKE",
            VolLossKind::R2LOG => "R2LOG",
            VolLossKind::AE1 => "AE1",
            VolLossKind::AE2 => "AE2",
        };
        f.write_str(s)
    }
}

impl FromStr for VolLossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VolLossKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown volatility loss {s:?}")))
    }
}

/// Volatility loss for a realized proxy `realized` and forecast `forecast`.
pub fn vol_loss(kind: VolLossKind, realized: f64, forecast: f64) -> f64 {
    let (r2, f2) = (realized * realized, forecast * forecast);
    match kind {
        VolLossKind::SE1 => (realized - forecast).powi(2),
        VolLossKind::SE2 => (r2 - f2).powi(2),
        VolLossKind::QLIKE => f2.ln() + r2 / f2,
        VolLossKind::R2LOG => (r2 / f2).ln().powi(2),
        VolLossKind::AE1 => (realized - forecast).abs(),
        VolLossKind::AE2 => (r2 - f2).abs(),
    }
}

/// Scores volatility forecasts. Every sigma, realized or forecast, must be
/// strictly positive.
pub fn loss_vol(realized_sigma: &[f64], evaluated_sigma: &ModelOutputs, kind: VolLossKind) -> Result<LossMatrix> {
    check_lengths(realized_sigma, evaluated_sigma)?;
    check_finite_vec(realized_sigma, "realized")?;
    if let Some(t) = realized_sigma.iter().position(|&s| s <= 0.0) {
        return Err(Error::invalid(format!(
            "realized volatility must be positive, got {} at row {t}",
            realized_sigma[t]
        )));
    }
    if let Some(((t, i), s)) = evaluated_sigma.values.indexed_iter().find(|(_, &s)| s <= 0.0) {
        return Err(Error::invalid(format!(
            "volatility forecast must be positive, got {s} at row {t}, column {i}"
        )));
    }
    let values = Array2::from_shape_fn((evaluated_sigma.n(), evaluated_sigma.m()), |(t, i)| {
        vol_loss(kind, realized_sigma[t], evaluated_sigma.values[[t, i]])
    });
    LossMatrix::new(values, evaluated_sigma.names.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LevelLossKind {
    SE,
    AE,
}

impl fmt::Display for LevelLossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LevelLossKind::SE => "SE",
            LevelLossKind::AE => "AE",
        })
    }
}

impl FromStr for LevelLossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SE" => Ok(LevelLossKind::SE),
            "AE" => Ok(LevelLossKind::AE),
            _ => Err(Error::invalid(format!("unknown level loss {s:?}"))),
        }
    }
}

pub fn level_loss(kind: LevelLossKind, y: f64, yhat: f64) -> f64 {
    match kind {
        LevelLossKind::SE => (y - yhat).powi(2),
        LevelLossKind::AE => (y - yhat).abs(),
    }
}

/// Scores point forecasts with squared or absolute error.
pub fn loss_level(realized: &[f64], evaluated: &ModelOutputs, kind: LevelLossKind) -> Result<LossMatrix> {
    check_lengths(realized, evaluated)?;
    check_finite_vec(realized, "realized")?;
    let values = Array2::from_shape_fn((evaluated.n(), evaluated.m()), |(t, i)| {
        level_loss(kind, realized[t], evaluated.values[[t, i]])
    });
    LossMatrix::new(values, evaluated.names.clone())
}
