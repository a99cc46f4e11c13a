//! Regret growth of ExpCommit on the scalar benchmark: Monte-Carlo ensembles
//! at several horizons and a log-log fit of the final median regret.
//!
//! Radii are scaled per horizon to the smallest factor that keeps the true
//! system inside the set on `1 - delta` of independent calibration seeds.
//! Pass a fixed scale as the second argument to override.
//!
//! cargo run --release --example regret_sweep -- [trials] [radius_scale]

use ofu_lqg::harness::{calibrate_radius_scale, fit_regret_exponent, monte_carlo, ExpCommitConfig};
use ofu_lqg::sysid::RadiiMode;
use ofu_lqg::system::LqgSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let trials: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(16);
    let fixed: Option<f64> = args.get(2).map(|s| s.parse()).transpose()?;
    let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?;

    let mut points = Vec::new();
    for t in [30_000usize, 100_000, 300_000, 1_000_000] {
        let mut cfg = ExpCommitConfig::new(t, 1);
        cfg.radii_mode = RadiiMode::Oracle;
        cfg.master_seed = 1;
        cfg.radius_scale = match fixed {
            Some(s) => s,
            None => calibrate_radius_scale(&sys, &cfg, 100, 1.0 - cfg.delta, 1 << 32)?.scale,
        };
        let ens = monte_carlo(&sys, &cfg, trials)?;
        let last = ens.median.len() - 1;
        println!(
            "T={t:>8}  scale {:.5}  median regret {:>10.1}  (q10 {:>10.1}, q90 {:>10.1})  failed {}",
            cfg.radius_scale,
            ens.median[last],
            ens.q10[last],
            ens.q90[last],
            ens.failures.len()
        );
        points.push((t as f64, ens.final_median()));
    }
    let fit = fit_regret_exponent(&points)?;
    println!(
        "slope {:.3}  intercept {:.3}  r^2 {:.4}",
        fit.slope, fit.intercept, fit.r_squared
    );
    Ok(())
}
