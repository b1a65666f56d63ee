//! Scores VaR, volatility and point forecasts with every loss in the crate.
//!
//! ```text
//! cargo run --example loss_functions
//! ```

use mcs_core::losses::{
    loss_level, loss_var, loss_vol, LevelLossKind, LossVarConfig, ModelOutputs, VarLossVariant, VolLossKind,
};
use mcs_core::Result;

fn main() -> Result<()> {
    let returns = [-0.021, 0.004, 0.012, -0.035, 0.007, -0.002];
    let var = ModelOutputs::from_columns(
        vec!["tight".into(), "loose".into()],
        &[vec![-0.015; 6], vec![-0.040; 6]],
    )?;
    for variant in [VarLossVariant::Normal, VarLossVariant::Differentiable] {
        let loss = loss_var(&returns, &var, &LossVarConfig::new(0.05, variant))?;
        println!("{variant:?} VaR loss, mean per model: {:?}", loss.column_means());
    }

    let realized_sigma = [1.1, 0.9, 1.4, 2.0, 1.2, 0.8];
    let sigma = ModelOutputs::from_columns(
        vec!["smooth".into(), "reactive".into()],
        &[vec![1.2; 6], vec![1.0, 1.0, 1.3, 1.8, 1.3, 0.9]],
    )?;
    for kind in VolLossKind::ALL {
        let loss = loss_vol(&realized_sigma, &sigma, kind)?;
        let m = loss.column_means();
        println!("{kind:>5}: smooth {:.5}  reactive {:.5}", m[0], m[1]);
    }

    let y = [3.0, 1.0, -2.0];
    let points = ModelOutputs::from_columns(vec!["naive".into()], &[vec![0.0, 0.0, 0.0]])?;
    for kind in [LevelLossKind::SE, LevelLossKind::AE] {
        println!("{kind}: {:?}", loss_level(&y, &points, kind)?.column(0).to_vec());
    }
    Ok(())
}
