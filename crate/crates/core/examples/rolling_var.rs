//! Produces rolling one-step 1% VaR forecasts from several specifications
//! and writes them as a CSV with one column per model.
//!
//! ```text
//! cargo run --release --example rolling_var -- [out.csv]
//! ```

use std::path::PathBuf;

use mcs_core::cli::columns_to_csv;
use mcs_core::garch::{roll_var_forecast, simulate, Dynamics, GarchParams, GarchSpec, Innovation};
use mcs_core::Result;
use rayon::prelude::*;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let dgp = GarchSpec::new(Dynamics::Egarch11, Innovation::StudentT);
    let params = GarchParams::garch(0.03, 0.0, -0.1, 0.97).with_gamma(0.15).with_nu(7.0);
    let returns = simulate(&dgp, &params, 1500, 500, 5)?;

    let specs: Vec<GarchSpec> = [Dynamics::Garch11, Dynamics::Gjr11, Dynamics::Egarch11]
        .into_iter()
        .flat_map(|d| [Innovation::Gaussian, Innovation::StudentT].map(|i| GarchSpec::new(d, i)))
        .collect();
    let forecasts = specs
        .par_iter()
        .map(|spec| roll_var_forecast(spec, &returns, 500, 50, 0.01))
        .collect::<Result<Vec<_>>>()?;

    let tail = &returns[returns.len() - 500..];
    for f in &forecasts {
        let hits = tail.iter().zip(&f.var).filter(|(y, v)| y < v).count();
        let failed = f.refits.iter().filter(|r| r.error.is_some()).count();
        println!(
            "{:<11} refits {:>2} (carried forward {failed})  violations {hits:>2}/500  last VaR {:.4}",
            f.spec.label(),
            f.refits.len(),
            f.var.last().copied().unwrap_or(f64::NAN)
        );
    }

    if let Some(path) = out {
        let names: Vec<String> = forecasts.iter().map(|f| f.spec.label()).collect();
        let cols: Vec<Vec<f64>> = forecasts.iter().map(|f| f.var.clone()).collect();
        std::fs::write(&path, columns_to_csv(&names, &cols)?).map_err(|e| mcs_core::Error::Numeric(e.to_string()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
