//! One ExpCommit run on the scalar benchmark; prints the regret at a few
//! checkpoints and optionally writes `regret.csv`.
//!
//! cargo run --release --example expcommit_run -- [T] [out.csv]

use ofu_lqg::harness::{run_expcommit, ExpCommitConfig};
use ofu_lqg::io::write_regret_csv;
use ofu_lqg::system::LqgSystem;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let t: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(100_000);
    let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0)?;
    let mut cfg = ExpCommitConfig::new(t, 1);
    cfg.radius_scale = 0.0025;
    cfg.master_seed = 42;

    let run = run_expcommit(&sys, &cfg)?;
    println!("T = {t}, T_exp = {}, J* = {:.5}, selected J = {:.5}", run.t_exp, run.J_star_true, run.selected_J);
    println!(
        "identified a = {:.4}, b = {:.4}, c = {:.4}",
        run.identified.a_hat[(0, 0)],
        run.identified.b_hat[(0, 0)],
        run.identified.c_hat[(0, 0)]
    );
    for frac in [0.01, 0.1, 0.5, 1.0] {
        let idx = ((t as f64 * frac) as usize).clamp(1, t) - 1;
        println!("regret after {:>8} steps: {:>10.1}", idx + 1, run.cumulative_regret[idx]);
    }
    println!(
        "max |x_hat| = {:.3}, max |y| = {:.3}",
        run.diagnostics.max_state_estimate_norm, run.diagnostics.max_output_norm
    );
    if let Some(path) = args.get(2) {
        write_regret_csv(path.as_ref(), &run.costs, &run.cumulative_regret)?;
        println!("wrote {path}");
    }
    Ok(())
}
