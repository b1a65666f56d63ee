//! Simulates a GJR-GARCH(1,1) with Student-t innovations, fits every
//! specification and prints estimates, standard errors and forecasts.
//!
//! ```text
//! cargo run --release --example garch_fit
//! ```

use mcs_core::garch::{fit, forecast_sigma, simulate, std_errors, Dynamics, GarchParams, GarchSpec, Innovation};
use mcs_core::Result;

fn main() -> Result<()> {
    let truth_spec = GarchSpec::new(Dynamics::Gjr11, Innovation::StudentT);
    let truth = GarchParams::garch(0.05, 0.05, 0.03, 0.88).with_gamma(0.12).with_nu(6.0);
    let returns = simulate(&truth_spec, &truth, 3000, 500, 11)?;
    println!("true {}: {:?}\n", truth_spec.label(), truth.to_vec(&truth_spec));

    for dynamics in [Dynamics::Garch11, Dynamics::Gjr11, Dynamics::Egarch11] {
        for innovation in [Innovation::Gaussian, Innovation::StudentT] {
            let spec = GarchSpec::new(dynamics, innovation);
            let f = fit(&spec, &returns, None)?;
            let se = std_errors(&spec, &f.params, &returns).ok();
            println!("{:<11} loglik {:>10.2}  converged {}", spec.label(), f.loglik, f.converged);
            for (k, (name, value)) in spec.param_names().iter().zip(f.params.to_vec(&spec)).enumerate() {
                match &se {
                    Some(se) => println!("    {name:<6} {value:>9.4}  ({:.4})", se[k]),
                    None => println!("    {name:<6} {value:>9.4}"),
                }
            }
            if f.converged {
                println!("    next-day sigma {:.4}", forecast_sigma(&f)?);
            }
        }
    }
    Ok(())
}
