//! Runs the MCS procedure with both statistics on synthetic losses and
//! prints the Superior Set report.
//!
//! ```text
//! cargo run --release --example model_confidence_set
//! ```

use mcs_core::cli::render_text;
use mcs_core::{mcs_procedure, LossMatrix, McsConfig, Result, Statistic};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<()> {
    let n = 1000;
    let excess = [0.0, 0.01, 0.02, 0.03, 0.05, 0.1, 0.2, 0.4];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let common: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let columns: Vec<Vec<f64>> = excess
        .iter()
        .map(|&e| {
            common
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    1.0 + c + 0.5 * z + e
                })
                .collect()
        })
        .collect();
    let names = (0..excess.len()).map(|i| format!("model-{i}")).collect();
    let loss = LossMatrix::from_columns(names, &columns)?;

    for statistic in [Statistic::Tmax, Statistic::TR] {
        let config = McsConfig {
            alpha: 0.2,
            resamples: 5000,
            statistic,
            seed: 42,
            ..McsConfig::default()
        };
        let result = mcs_procedure(&loss, &config)?;
        print!("{}", render_text(&result));
        for e in &result.eliminated {
            println!("eliminated {} (step p {:.4}, MCS p {:.4})", e.name, e.step_pvalue, e.mcs_pvalue);
        }
        println!("block length {}\n", result.block_len);
    }
    Ok(())
}
