//! Minimum exploration lengths for the scalar benchmark, with per-model
//! stand-ins for the constants that are suprema over the admissible set.
//!
//! cargo run --release --example exploration_thresholds

use ofu_lqg::harness::{exploration_thresholds, ThresholdInputs};
use ofu_lqg::sysid::{noise_terms, NoiseTermConfig, SystemStatistics};
use ofu_lqg::system::{CostParams, LqgSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?;
    let h = 3;
    let t_exp = 10_000;
    let stats = SystemStatistics::from_system(&sys, h, 1.0)?;
    let terms = noise_terms(
        &stats,
        &NoiseTermConfig {
            horizon: h,
            n_samples: t_exp - h + 1,
            t_exp,
            m: 1,
            p: 1,
            n: 1,
            delta: 0.05,
            sigma_w: 1.0,
            sigma_z: 1.0,
            c: 1.0,
            c_prime: 1.0,
        },
    )?;
    println!("R_w = {:.3}, R_e = {:.3}, R_z = {:.3}", terms.r_w, terms.r_e, terms.r_z);
    let rep = exploration_thresholds(&sys, &CostParams::identity(1, 1), &terms, &ThresholdInputs::stand_in(1.0, 1.0), 1.0, h)?;
    for (name, v) in [
        ("T_G", rep.T_G),
        ("T_B", rep.T_B),
        ("T_A", rep.T_A),
        ("T_N", rep.T_N),
        ("T_M", rep.T_M),
        ("T_L", rep.T_L),
        ("T_alpha", rep.T_alpha),
        ("T_beta", rep.T_beta),
        ("T_gamma", rep.T_gamma),
        ("T_0", rep.T_0),
    ] {
        println!("{name:>8} = {v:.3e}");
    }
    println!("stand-ins: {}", rep.stand_ins.join(", "));
    println!("constants: {:?}", rep.user_constants);
    Ok(())
}
