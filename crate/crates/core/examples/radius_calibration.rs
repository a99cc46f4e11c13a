//! Empirical coverage of the confidence balls on the scalar benchmark:
//! how often the (aligned) true realization lies inside the radii scaled by
//! various factors, and how large the literal radii are compared with the
//! actual estimation errors.
//!
//! cargo run --release --example radius_calibration -- [T_exp] [seeds]

use ofu_lqg::harness::{aligned_truth, explore_phase, identify, ExpCommitConfig};
use ofu_lqg::linalg::spectral_norm;
use ofu_lqg::sysid::RadiiMode;
use ofu_lqg::system::{markov_parameters, LqgSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let t_exp: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(10_000);
    let seeds: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(50);
    let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?;
    let g_true = markov_parameters(&sys, 3)?;

    let mut ratios = Vec::new();
    let mut g_cover = 0;
    for seed in 0..seeds {
        let mut cfg = ExpCommitConfig::new(t_exp + 1, 1);
        cfg.t_exp = Some(t_exp);
        cfg.radii_mode = RadiiMode::Oracle;
        cfg.master_seed = seed;
        let cfg = cfg.resolve(&sys)?;
        let traj = explore_phase(&sys, &cfg)?;
        let id = identify(&traj, &cfg, sys.sigma_w(), sys.sigma_z(), Some(&sys))?;
        let truth = aligned_truth(&sys, &id.model, &cfg)?;
        let g_err = spectral_norm(&(&id.g_hat.g - &g_true.g));
        if g_err <= id.raw_radii.g_radius {
            g_cover += 1;
        }
        let ea = spectral_norm(&(&id.model.a_hat - truth.a())) / id.raw_radii.beta_a;
        let eb = spectral_norm(&(&id.model.b_hat - truth.b())) / id.raw_radii.beta_b;
        let ec = spectral_norm(&(&id.model.c_hat - truth.c())) / id.raw_radii.beta_c;
        ratios.push(ea.max(eb).max(ec));
        if seed == 0 {
            println!(
                "literal radii: g={:.4} beta_A={:.4} beta_B=beta_C={:.4} (||G_hat-G||={g_err:.4})",
                id.raw_radii.g_radius, id.raw_radii.beta_a, id.raw_radii.beta_b
            );
        }
    }
    println!("g-ball coverage with literal radii: {g_cover}/{seeds}");
    ratios.sort_by(f64::total_cmp);
    for q in [0.5, 0.9, 0.95, 1.0] {
        let idx = ((q * (ratios.len() - 1) as f64).round()) as usize;
        println!("smallest radius scale covering {:>3.0}% of seeds: {:.4}", q * 100.0, ratios[idx]);
    }
    Ok(())
}
