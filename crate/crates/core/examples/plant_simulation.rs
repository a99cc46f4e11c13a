//! Simulate a two-state plant under Gaussian excitation, print its structural
//! quantities and impulse response, and write the trajectory as CSV.
//!
//! cargo run --release --example plant_simulation -- [out.csv]

use nalgebra::DMatrix;
use ofu_lqg::io::write_trajectory_csv;
use ofu_lqg::system::{build_hankel, check_structural, gaussian_policy, markov_parameters, rollout, steady_state_covariance, LqgSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = LqgSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.6, 0.3, -0.2, 0.5]),
        DMatrix::from_column_slice(2, 1, &[1.0, 0.4]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        0.5,
        0.3,
    )?;
    let h = 2 * sys.n() + 1;
    let report = check_structural(&sys, h)?;
    println!(
        "rho(A) = {:.4}, Phi(A) = {:.4}, controllable = {}, observable = {}, ||G||_F = {:.4}",
        report.rho, report.phi, report.controllable, report.observable, report.kappa
    );

    let g = markov_parameters(&sys, h)?;
    for i in 1..=h {
        println!("G_{i} = {:.5}", g.block(i)[(0, 0)]);
    }
    println!("Hankel singular values: {:?}", build_hankel(&g, sys.n(), sys.n())?.singular_values());
    println!("steady-state covariance under unit excitation:\n{}", steady_state_covariance(&sys, 1.0)?);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let traj = rollout(&sys, gaussian_policy(sys.p(), 1.0), 1000, &mut rng)?;
    let mean_sq = traj.outputs.iter().map(|y| y.norm_squared()).sum::<f64>() / traj.len() as f64;
    println!("empirical E|y|^2 over {} steps: {mean_sq:.4}", traj.len());

    if let Some(path) = std::env::args().nth(1) {
        write_trajectory_csv(path.as_ref(), &traj)?;
        println!("wrote {path}");
    }
    Ok(())
}
