//! Optimal controller and filter for a known plant: both Riccati solutions,
//! gains, closed-loop spectral radii and the optimal average cost.
//!
//! cargo run --release --example riccati_synthesis -- [system.json]

use ofu_lqg::io::read_json;
use ofu_lqg::riccati::synthesize;
use ofu_lqg::system::{CostParams, LqgSystem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys: LqgSystem = match std::env::args().nth(1) {
        Some(path) => read_json(path.as_ref())?,
        None => LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?,
    };
    let cost = CostParams::identity(sys.m(), sys.p());
    let s = synthesize(&sys, &cost)?;
    println!("P =\n{}", s.P);
    println!("K =\n{}", s.K);
    println!("Sigma =\n{}", s.Sigma);
    println!("L =\n{}", s.L);
    println!("J* = {:.10}", s.J_star);
    println!(
        "rho(A - BK) = {:.4}, rho(A - ALC) = {:.4}, residuals {:.1e} / {:.1e}",
        s.closed_loop_control_radius, s.closed_loop_filter_radius, s.control_residual, s.filter_residual
    );
    Ok(())
}
