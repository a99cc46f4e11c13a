//! Steady-state Kalman filtering and LQG control on the true model, plus a
//! Monte-Carlo check of the Bellman optimality equation at one filter state.
//!
//! cargo run --release --example kalman_filtering

use nalgebra::DVector;
use ofu_lqg::estimator::{bellman_estimate, ModelController};
use ofu_lqg::harness::commit_phase;
use ofu_lqg::riccati::synthesize;
use ofu_lqg::system::{CostParams, LqgSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?;
    let cost = CostParams::identity(1, 1);
    let s = synthesize(&sys, &cost)?;

    let mut ctl = ModelController::new(sys.clone(), s.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let out = commit_phase(&sys, &cost, &mut ctl, 100_000, DVector::zeros(1), &mut rng)?;
    let avg = out.costs.iter().sum::<f64>() / out.costs.len() as f64;
    println!("closed-loop average cost {avg:.4} vs J* {:.4}", s.J_star);

    let x_pred = DVector::from_element(1, 0.8);
    let y = DVector::from_element(1, -0.4);
    let opt = bellman_estimate(&sys, &cost, &s, &x_pred, &y, None, 100_000, &mut rng)?;
    println!(
        "Bellman at optimal action: lhs {:.4}, rhs {:.4}, residual {:.4} +- {:.4}",
        opt.lhs, opt.rhs, opt.residual, opt.std_error
    );
    let other = DVector::from_element(1, 1.0);
    let sub = bellman_estimate(&sys, &cost, &s, &x_pred, &y, Some(&other), 100_000, &mut rng)?;
    println!("at u = 1: rhs {:.4} (residual {:.4})", sub.rhs, sub.residual);
    Ok(())
}
