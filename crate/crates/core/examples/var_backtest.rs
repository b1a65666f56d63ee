//! End-to-end VaR study: rolling forecasts, AE and AD backtests including
//! the averaged forecast, then the MCS on the asymmetric VaR loss.
//!
//! ```text
//! cargo run --release --example var_backtest
//! ```

use mcs_core::backtest::{average_var, backtest};
use mcs_core::cli::render_text;
use mcs_core::garch::{roll_var_forecast, simulate, Dynamics, GarchParams, GarchSpec, Innovation};
use mcs_core::losses::{loss_var, LossVarConfig, ModelOutputs, VarLossVariant};
use mcs_core::{mcs_procedure, McsConfig, Result, Statistic};
use rayon::prelude::*;

fn main() -> Result<()> {
    let tau = 0.01;
    let horizon = 1000;
    let dgp = GarchSpec::new(Dynamics::Gjr11, Innovation::StudentT);
    let params = GarchParams::garch(0.04, 0.03, 0.02, 0.9).with_gamma(0.1).with_nu(5.0);
    let returns = simulate(&dgp, &params, 2000, 500, 99)?;
    let realized = &returns[returns.len() - horizon..];

    let specs: Vec<GarchSpec> = [Dynamics::Garch11, Dynamics::Gjr11, Dynamics::Egarch11]
        .into_iter()
        .flat_map(|d| [Innovation::Gaussian, Innovation::StudentT].map(|i| GarchSpec::new(d, i)))
        .collect();
    let forecasts = specs
        .par_iter()
        .map(|s| roll_var_forecast(s, &returns, horizon, 100, tau))
        .collect::<Result<Vec<_>>>()?;

    let mut names: Vec<String> = forecasts.iter().map(|f| f.spec.label()).collect();
    let mut columns: Vec<Vec<f64>> = forecasts.iter().map(|f| f.var.clone()).collect();
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    let average = average_var(&refs)?;
    names.push("average".into());
    columns.push(average);

    println!("{:<11} {:>5} {:>8} {:>8}", "model", "AE", "ADmean", "ADmax");
    for (name, var) in names.iter().zip(&columns) {
        let r = backtest(realized, var, tau)?;
        let fmt = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.4}"));
        println!("{name:<11} {:>5.2} {:>8} {:>8}", r.ae, fmt(r.ad_mean), fmt(r.ad_max));
    }

    let outputs = ModelOutputs::from_columns(names, &columns)?;
    let loss = loss_var(realized, &outputs, &LossVarConfig::new(tau, VarLossVariant::Normal))?;
    let config = McsConfig {
        alpha: 0.2,
        resamples: 5000,
        statistic: Statistic::Tmax,
        seed: 1,
        ..McsConfig::default()
    };
    print!("\n{}", render_text(&mcs_procedure(&loss, &config)?));
    Ok(())
}
