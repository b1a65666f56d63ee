//! Picks a block length from AR fits and compares block and iid bootstrap
//! variances of the mean of a persistent series.
//!
//! ```text
//! cargo run --example block_bootstrap
//! ```

use mcs_core::tsboot::{boot_mean_variance, default_max_lag, gen_block_indices, select_block_length};
use mcs_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<()> {
    let n = 2000;
    let phi = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut x = 0.0;
    let series: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut rng);
            x = phi * x + e;
            x
        })
        .collect();

    let p_max = default_max_lag(n);
    let p = select_block_length(std::slice::from_ref(&series), p_max, 1.96)?;
    println!("AR(1) with phi = {phi}: selected block length {p} (max lag {p_max})");

    // long-run variance of the mean for an AR(1) with unit innovations
    let analytic = 1.0 / ((1.0 - phi) * (1.0 - phi)) / n as f64;
    for block in [1, p.max(2), 20, 50] {
        let plan = gen_block_indices(n, block, 2000, 7)?;
        let stats = boot_mean_variance(&series, &plan)?;
        println!("block {block:>3}: var of mean {:.3e}  (long-run value {analytic:.3e})", stats.var_hat);
    }
    Ok(())
}
