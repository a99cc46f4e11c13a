//! Identification from exploration data: least-squares Markov parameters,
//! Ho-Kalman realization and the confidence radii, at several exploration
//! lengths.
//!
//! cargo run --release --example markov_identification

use ofu_lqg::harness::{explore_phase, identify, ExpCommitConfig};
use ofu_lqg::linalg::spectral_norm;
use ofu_lqg::sysid::RadiiMode;
use ofu_lqg::system::{markov_parameters, LqgSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?;
    let g = markov_parameters(&sys, 3)?;
    println!("{:>8} {:>10} {:>10} {:>8} {:>8} {:>8} {:>10}", "T_exp", "|G^-G|", "g_radius", "a_hat", "b_hat", "c_hat", "beta_A");
    for t_exp in [1_000usize, 4_000, 16_000, 64_000] {
        let mut cfg = ExpCommitConfig::new(t_exp + 1, 1);
        cfg.t_exp = Some(t_exp);
        cfg.radii_mode = RadiiMode::Oracle;
        let cfg = cfg.resolve(&sys)?;
        let traj = explore_phase(&sys, &cfg)?;
        let id = identify(&traj, &cfg, 1.0, 1.0, Some(&sys))?;
        println!(
            "{t_exp:>8} {:>10.5} {:>10.5} {:>8.4} {:>8.4} {:>8.4} {:>10.4}",
            spectral_norm(&(&id.g_hat.g - &g.g)),
            id.radii.g_radius,
            id.model.a_hat[(0, 0)],
            id.model.b_hat[(0, 0)],
            id.model.c_hat[(0, 0)],
            id.radii.beta_a
        );
    }
    Ok(())
}
