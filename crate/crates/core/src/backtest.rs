//! VaR backtesting: violation ratio and absolute deviation of violations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBacktestReport {
    pub n: usize,
    pub tau: f64,
    /// Number of dates with `y_t < VaR_t`.
    pub violations: usize,
    /// Actual over expected violations, `violations / (tau * n)`.
    pub ae: f64,
    /// Mean of `|y_t - VaR_t|` over violation dates, `None` without violations.
    pub ad_mean: Option<f64>,
    pub ad_max: Option<f64>,
}

fn check_inputs(returns: &[f64], var: &[f64], tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    if returns.len() != var.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} returns against {} VaR forecasts",
            returns.len(),
            var.len()
        )));
    }
    if returns.is_empty() {
        return Err(Error::invalid("backtest needs at least one observation"));
    }
    if let Some(i) = returns.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "returns",
            row: i,
            col: 0,
        });
    }
    if let Some(i) = var.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "VaR",
            row: i,
            col: 0,
        });
    }
    Ok(())
}

/// Ratio of actual to expected violations.
pub fn ae_ratio(returns: &[f64], var: &[f64], tau: f64) -> Result<f64> {
    check_inputs(returns, var, tau)?;
    let hits = returns.iter().zip(var).filter(|(y, v)| y < v).count();
    Ok(hits as f64 / (tau * returns.len() as f64))
}

/// Mean and maximum absolute deviation on violation dates.
pub fn ad_stats(returns: &[f64], var: &[f64]) -> Result<(Option<f64>, Option<f64>)> {
    check_inputs(returns, var, 0.5)?;
    let devs: Vec<f64> = returns
        .iter()
        .zip(var)
        .filter(|(y, v)| y < v)
        .map(|(y, v)| (y - v).abs())
        .collect();
    if devs.is_empty() {
        return Ok((None, None));
    }
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    let max = devs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((Some(mean), Some(max)))
}

pub fn backtest(returns: &[f64], var: &[f64], tau: f64) -> Result<VarBacktestReport> {
    check_inputs(returns, var, tau)?;
    let violations = returns.iter().zip(var).filter(|(y, v)| y < v).count();
    let (ad_mean, ad_max) = ad_stats(returns, var)?;
    Ok(VarBacktestReport {
        n: returns.len(),
        tau,
        violations,
        ae: violations as f64 / (tau * returns.len() as f64),
        ad_mean,
        ad_max,
    })
}

/// Row-wise mean of several VaR forecast series.
pub fn average_var(series: &[&[f64]]) -> Result<Vec<f64>> {
    let first = series
        .first()
        .ok_or_else(|| Error::invalid("no VaR series to average"))?;
    if let Some(s) = series.iter().find(|s| s.len() != first.len()) {
        return Err(Error::DimensionMismatch(format!(
            "VaR series of lengths {} and {}",
            first.len(),
            s.len()
        )));
    }
    if let Some(i) = series.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
        let row = series[i].iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::NonFinite {
            what: "VaR",
            row,
            col: i,
        });
    }
    let k = series.len() as f64;
    // summing each row in sorted order makes the result independent of column order
    let mut row = Vec::with_capacity(series.len());
    Ok((0..first.len())
        .map(|t| {
            row.clear();
            row.extend(series.iter().map(|s| s[t]));
            row.sort_by(f64::total_cmp);
            row.iter().sum::<f64>() / k
        })
        .collect())
}
