//! Build a confidence set around an identified model and search it for the
//! model with the lowest optimal cost.
//!
//! cargo run --release --example optimistic_selection -- [budget]

use ofu_lqg::harness::{aligned_truth, calibrate_radius_scale, explore_phase, identify, ExpCommitConfig};
use ofu_lqg::ofu::{membership, optimistic_select, ConfidenceSet};
use ofu_lqg::riccati::synthesize;
use ofu_lqg::sysid::RadiiMode;
use ofu_lqg::system::LqgSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let budget: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(500);
    let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?;
    let mut config = ExpCommitConfig::new(1_000_000, 1);
    config.radii_mode = RadiiMode::Oracle;
    config.radius_scale = calibrate_radius_scale(&sys, &config, 100, 0.95, 1 << 32)?.scale;
    let cfg = config.resolve(&sys)?;

    let traj = explore_phase(&sys, &cfg)?;
    let id = identify(&traj, &cfg, 1.0, 1.0, Some(&sys))?;
    let set = ConfidenceSet::new(id.model.clone(), id.radii, config.kappa, config.contractibility_margin, cfg.horizon, 1.0, 1.0)?;
    println!(
        "radius scale {:.5}: beta_A {:.4}, beta_B {:.4}, beta_C {:.4}",
        config.radius_scale, id.radii.beta_a, id.radii.beta_b, id.radii.beta_c
    );

    let truth = aligned_truth(&sys, &id.model, &cfg)?;
    let member = membership(&truth, &set, &cfg.cost)?;
    println!("true system in set: {} ({:?})", member.feasible, member.rejection_reason);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sel = optimistic_select(&set, &cfg.cost, budget, cfg.slack, &mut rng)?;
    let j_true = synthesize(&sys, &cfg.cost)?.J_star;
    println!(
        "selected J {:.5} (true J* {:.5}, slack {:.4}) from {}/{} feasible candidates, index {}",
        sel.j_tilde, j_true, sel.slack, sel.feasible_count, sel.evaluated, sel.selected_index
    );
    println!("rejections: {:?}", sel.rejections);
    println!(
        "optimistic model: a = {:.4}, b = {:.4}, c = {:.4}",
        sel.model.a()[(0, 0)],
        sel.model.b()[(0, 0)],
        sel.model.c()[(0, 0)]
    );
    Ok(())
}
