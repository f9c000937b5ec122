//! Simulate a trend panel, tune the bandwidths and print the joint 95% band.

use monoband::kernels::KernelSpec;
use monoband::simgen::{simulate, DgpSpec, Model};
use monoband::tuning::tune_trend;
use monoband::{run_scb_trend, Result};

fn main() -> Result<()> {
    let data = simulate::<f64>(&DgpSpec::new(Model::TrendA, 500, 3, 7))?;
    let tuned = tune_trend(KernelSpec::Epanechnikov, &data.panel)?;
    let mut cfg = tuned.config(data.p);
    cfg.seed = 1;
    let scb = run_scb_trend(&data.panel, &cfg)?;
    let band = scb.band(0.05).expect("default levels include 0.05");
    println!("hr = {:.3}, hd = {:.3}, L = {}, q_hat = {:.4}", tuned.hr, tuned.hd, tuned.block, band.q_hat);
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "t", "lower", "estimate", "upper", "truth");
    for g in (0..scb.eval_grid.len()).step_by(25) {
        let t = scb.eval_grid[g];
        println!(
            "{t:>6.3} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            band.lower[[g, 0]],
            scb.estimate[[g, 0]],
            band.upper[[g, 0]],
            data.truth(t)[0]
        );
    }
    Ok(())
}
