//! Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.
//! Runs as a plain binary (`harness = false`) so the lines are always shown.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ofu_lqg::estimator::{bellman_estimate, ModelController};
use ofu_lqg::harness::{
    self, calibrate_radius_scale, commit_phase, explore_phase, fit_regret_exponent, identify,
    monte_carlo_with_threads, run_expcommit, ExpCommitConfig,
};
use ofu_lqg::linalg::{gaussian_vector, spectral_norm, spectral_radius};
use ofu_lqg::ofu::{membership, optimistic_select, ConfidenceSet};
use ofu_lqg::riccati::{control_dare_residual, filter_dare_residual, synthesize};
use ofu_lqg::sysid::{self, RadiiMode};
use ofu_lqg::system::{self, markov_parameters, observe, transition, CostParams, LqgSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn bench() -> LqgSystem {
    LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap()
}

fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, p: usize) -> LqgSystem {
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let rho = spectral_radius(&raw).unwrap().max(1e-3);
    let target = rng.random_range(0.1..0.95);
    let a = raw * (target / rho);
    let b = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let c = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let sw = rng.random_range(0.3..1.5);
    let sz = rng.random_range(0.3..1.5);
    LqgSystem::new(a, b, c, sw, sz).unwrap()
}

/// Plain Riccati value iteration from zero, stopping early only at an exact
/// fixed point.
fn value_iteration(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(a.nrows(), a.nrows());
    for _ in 0..steps {
        let gain = (r + b.transpose() * &x * b).try_inverse().unwrap();
        let mut next = a.transpose() * &x * a + q - a.transpose() * &x * b * gain * b.transpose() * &x * a;
        next = (&next + next.transpose()) * 0.5;
        if next == x {
            break;
        }
        x = next;
    }
    x
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_res: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut count = 0;
    let mut attempts = 0;
    while count < 100 && attempts < 10_000 {
        attempts += 1;
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let p = rng.random_range(1..=3);
        let sys = random_system(&mut rng, n, m, p);
        let cost = CostParams::identity(m, p);
        let Ok(s) = synthesize(&sys, &cost) else { continue };
        count += 1;
        worst_res = worst_res
            .max(control_dare_residual(&sys, &cost, &s.P).unwrap())
            .max(filter_dare_residual(&sys, &s.Sigma).unwrap());
        let ctqc = sys.c().transpose() * cost.q() * sys.c();
        let p_vi = value_iteration(sys.a(), sys.b(), &ctqc, cost.r(), 10_000);
        let noise_w = DMatrix::identity(n, n) * sys.sigma_w().powi(2);
        let noise_z = DMatrix::identity(m, m) * sys.sigma_z().powi(2);
        let s_vi = value_iteration(&sys.a().transpose(), &sys.c().transpose(), &noise_w, &noise_z, 10_000);
        worst_gap = worst_gap
            .max(spectral_norm(&(&s.P - p_vi)))
            .max(spectral_norm(&(&s.Sigma - s_vi)));
    }
    outcome(
        count == 100 && worst_res <= 1e-10 && worst_gap <= 1e-8,
        format!("{count} systems, max residual {worst_res:.2e}, max gap to value iteration {worst_gap:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let s = synthesize(&bench(), &CostParams::identity(1, 1)).unwrap();
    let root = (0.25 + 4.0625f64.sqrt()) / 2.0;
    let l = root / (root + 1.0);
    let k = l * 0.5;
    // J* = (Q + L^T P L - L^T C^T Q C L)(C Sigma C^T + sigma_z^2)
    let j = (1.0 + l * l * root - l * l) * (root + 1.0);
    let errs = [
        (s.P[(0, 0)] - root).abs(),
        (s.Sigma[(0, 0)] - root).abs(),
        (s.L[(0, 0)] - l).abs(),
        (s.K[(0, 0)] - k).abs(),
        (s.J_star - j).abs(),
    ];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(worst <= 1e-9, format!("P={:.10} L={:.10} K={:.10} J*={:.10}, max error {worst:.1e}", s.P[(0, 0)], s.L[(0, 0)], s.K[(0, 0)], s.J_star))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 50 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let p = rng.random_range(1..=3);
        let sys = random_system(&mut rng, n, m, p);
        if !system::is_controllable(&sys, 1e-6) || !system::is_observable(&sys, 1e-6) {
            continue;
        }
        let h = 2 * n + 1;
        let g = markov_parameters(&sys, h).unwrap();
        let Ok(model) = sysid::ho_kalman(&g, n, n, n) else { continue };
        count += 1;
        let regen = sysid::regenerate_markov(&model, h).unwrap();
        worst = worst.max((regen.g - &g.g).abs().max());
    }
    outcome(worst <= 1e-8, format!("{count} systems, max Markov error {worst:.2e}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn g_error(sys: &LqgSystem, t_exp: usize, seed: u64) -> f64 {
    let mut cfg = ExpCommitConfig::new(t_exp + 1, 1);
    cfg.t_exp = Some(t_exp);
    cfg.master_seed = seed;
    let cfg = cfg.resolve(sys).unwrap();
    let traj = explore_phase(sys, &cfg).unwrap();
    let g_hat = sysid::least_squares_markov(&sysid::assemble_regression(&traj, 3).unwrap()).unwrap();
    spectral_norm(&(g_hat.g - markov_parameters(sys, 3).unwrap().g))
}

fn criterion_4() -> Outcome {
    let sys = bench();
    let short = median((0..20).map(|s| g_error(&sys, 10_000, 4000 + s)).collect());
    let long = median((0..20).map(|s| g_error(&sys, 40_000, 5000 + s)).collect());
    let ratio = long / short;
    outcome(
        (0.3..=0.8).contains(&ratio),
        format!("median error {short:.4} at 1e4, {long:.4} at 4e4, ratio {ratio:.3}"),
    )
}

fn filter_check(sys: &LqgSystem, steps: usize, seed: u64) -> (f64, f64) {
    let cost = CostParams::identity(sys.m(), sys.p());
    let s = synthesize(sys, &cost).unwrap();
    let mut ctl = ModelController::new(sys.clone(), s.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sys.n();
    let m = sys.m();
    let mut x = DVector::zeros(n);
    let burn = 1000;
    let mut cov = DMatrix::zeros(n, n);
    let mut innov: Vec<DVector<f64>> = Vec::with_capacity(steps);
    for t in 0..steps + burn {
        let x_pred = ctl.filter().x_pred.clone();
        let y = observe(sys, &x, &mut rng);
        if t >= burn {
            let e = &x - &x_pred;
            cov += &e * e.transpose();
            innov.push(&y - sys.c() * &x_pred);
        }
        ctl.filter_correct(&y).unwrap();
        let u = gaussian_vector(&mut rng, sys.p(), 1.0);
        x = transition(sys, &x, &u, &mut rng);
        ctl.filter_predict(&u).unwrap();
    }
    cov /= steps as f64;
    let rel = spectral_norm(&(&cov - &s.Sigma)) / spectral_norm(&s.Sigma);
    let mut worst_ac: f64 = 0.0;
    for j in 0..m {
        let v: Vec<f64> = innov.iter().map(|e| e[j]).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var: f64 = v.iter().map(|a| (a - mean).powi(2)).sum();
        let lag: f64 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        worst_ac = worst_ac.max((lag / var).abs());
    }
    (rel, worst_ac)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut systems = vec![bench()];
    while systems.len() < 3 {
        let s = random_system(&mut rng, 3, 2, 2);
        if synthesize(&s, &CostParams::identity(2, 2)).is_ok() {
            systems.push(s);
        }
    }
    let mut worst_rel: f64 = 0.0;
    let mut worst_ac: f64 = 0.0;
    for (i, sys) in systems.iter().enumerate() {
        let (rel, ac) = filter_check(sys, 100_000, 50 + i as u64);
        worst_rel = worst_rel.max(rel);
        worst_ac = worst_ac.max(ac);
    }
    outcome(
        worst_rel <= 0.10 && worst_ac <= 0.02,
        format!("{} systems, max covariance error {worst_rel:.4}, max lag-1 autocorrelation {worst_ac:.4}", systems.len()),
    )
}

fn criterion_6() -> Outcome {
    let sys = bench();
    let cost = CostParams::identity(1, 1);
    let s = synthesize(&sys, &cost).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for _ in 0..10 {
        let x_pred = gaussian_vector(&mut rng, 1, 2.0);
        let y = gaussian_vector(&mut rng, 1, 2.0);
        let opt = bellman_estimate(&sys, &cost, &s, &x_pred, &y, None, 100_000, &mut rng).unwrap();
        let x_post = (DMatrix::identity(1, 1) - &s.L * sys.c()) * &x_pred + &s.L * &y;
        let u_star = -(&s.K * &x_post);
        let perturbed = u_star.add_scalar(1.0);
        let pert = bellman_estimate(&sys, &cost, &s, &x_pred, &y, Some(&perturbed), 100_000, &mut rng).unwrap();
        let z = opt.residual.abs() / opt.std_error;
        worst_z = worst_z.max(z);
        min_gap = min_gap.min(pert.rhs - opt.rhs);
        ok &= z <= 3.0 && pert.rhs > opt.rhs && pert.residual.abs() > opt.residual.abs();
    }
    outcome(
        ok,
        format!("max |residual|/SE at optimum {worst_z:.2}, min cost increase at perturbed action {min_gap:.3}"),
    )
}

fn criterion_7() -> Outcome {
    let sys = bench();
    let t = 1_000_000;
    let mut base = ExpCommitConfig::new(t, 1);
    base.radii_mode = RadiiMode::Oracle;
    let scale = calibrate_radius_scale(&sys, &base, 100, 1.0 - base.delta, 1 << 40).unwrap().scale;
    base.radius_scale = scale;
    let j_true = synthesize(&sys, &CostParams::identity(1, 1)).unwrap().J_star;
    let mut considered = 0;
    let mut satisfied = 0;
    let mut seed = 0u64;
    let mut worst_excess = f64::NEG_INFINITY;
    while considered < 50 && seed < 1000 {
        let mut c = base.clone();
        c.master_seed = 7000 + seed;
        seed += 1;
        let cfg = c.resolve(&sys).unwrap();
        let traj = explore_phase(&sys, &cfg).unwrap();
        let id = identify(&traj, &cfg, 1.0, 1.0, Some(&sys)).unwrap();
        let set = ConfidenceSet::new(id.model.clone(), id.radii, c.kappa, c.contractibility_margin, cfg.horizon, 1.0, 1.0).unwrap();
        let truth = harness::aligned_truth(&sys, &id.model, &cfg).unwrap();
        if !membership(&truth, &set, &cfg.cost).unwrap().feasible {
            continue;
        }
        considered += 1;
        let j500 = optimistic_select(&set, &cfg.cost, 500, cfg.slack, &mut ChaCha8Rng::seed_from_u64(c.master_seed)).unwrap().j_tilde;
        let j5000 = optimistic_select(&set, &cfg.cost, 5000, cfg.slack, &mut ChaCha8Rng::seed_from_u64(c.master_seed)).unwrap().j_tilde;
        let gap = j500 - j5000;
        let excess = j500 - (j_true + cfg.slack + gap);
        worst_excess = worst_excess.max(excess);
        if excess <= 0.0 {
            satisfied += 1;
        }
    }
    let frac = satisfied as f64 / considered.max(1) as f64;
    outcome(
        considered == 50 && frac >= 0.95,
        format!(
            "radius scale {scale:.5}; {satisfied}/{considered} seeds optimistic (after {seed} tried), worst excess {worst_excess:.4}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let sys = bench();
    let mut points = Vec::new();
    let mut parts = Vec::new();
    for t in [30_000usize, 100_000, 300_000, 1_000_000] {
        let mut cfg = ExpCommitConfig::new(t, 1);
        cfg.radii_mode = RadiiMode::Oracle;
        cfg.master_seed = 8000;
        cfg.radius_scale = calibrate_radius_scale(&sys, &cfg, 100, 1.0 - cfg.delta, 1 << 32).unwrap().scale;
        let ens = monte_carlo_with_threads(&sys, &cfg, 16, None).unwrap();
        parts.push(format!("T={t}: {:.0}", ens.final_median()));
        points.push((t as f64, ens.final_median()));
        if ens.n_succeeded != 16 {
            return outcome(false, format!("{} trials failed at T={t}", 16 - ens.n_succeeded));
        }
    }
    let fit = fit_regret_exponent(&points).unwrap();
    outcome(
        (0.55..=0.85).contains(&fit.slope) && fit.r_squared >= 0.9,
        format!("slope {:.3}, r^2 {:.4}; median regret {}", fit.slope, fit.r_squared, parts.join(", ")),
    )
}

fn criterion_9() -> Outcome {
    let sys = bench();
    let cost = CostParams::identity(1, 1);
    let s = synthesize(&sys, &cost).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..3 {
        let mut ctl = ModelController::new(sys.clone(), s.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let out = commit_phase(&sys, &cost, &mut ctl, 100_000, DVector::zeros(1), &mut rng).unwrap();
        let avg = out.costs.iter().sum::<f64>() / out.costs.len() as f64;
        worst = worst.max((avg - s.J_star).abs() / s.J_star);
    }
    outcome(worst <= 0.05, format!("max relative deviation of average cost from J* {worst:.4}"))
}

fn criterion_10() -> Outcome {
    let sys = bench();
    let mut cfg = ExpCommitConfig::new(20_000, 1);
    cfg.radius_scale = 0.0025;
    cfg.master_seed = 10;
    let a = serde_json::to_string(&run_expcommit(&sys, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_expcommit(&sys, &cfg).unwrap()).unwrap();
    let e1 = serde_json::to_string(&monte_carlo_with_threads(&sys, &cfg, 6, Some(1)).unwrap()).unwrap();
    let e2 = serde_json::to_string(&monte_carlo_with_threads(&sys, &cfg, 6, Some(4)).unwrap()).unwrap();
    let e3 = serde_json::to_string(&monte_carlo_with_threads(&sys, &cfg, 6, Some(1)).unwrap()).unwrap();
    let ok = a == b && e1 == e2 && e1 == e3;
    outcome(ok, format!("run bytes equal: {}, ensemble bytes equal across 1/4 threads and reruns: {}", a == b, e1 == e2 && e1 == e3))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("Riccati correctness", criterion_1, Duration::from_secs(10)),
        ("scalar closed forms", criterion_2, Duration::from_secs(1)),
        ("Ho-Kalman exactness", criterion_3, Duration::from_secs(5)),
        ("estimation rate", criterion_4, Duration::from_secs(60)),
        ("filter consistency", criterion_5, Duration::from_secs(30)),
        ("Bellman optimality", criterion_6, Duration::from_secs(60)),
        ("optimism", criterion_7, Duration::from_secs(300)),
        ("regret sublinearity", criterion_8, Duration::from_secs(1800)),
        ("certainty equivalence", criterion_9, Duration::from_secs(30)),
        ("determinism", criterion_10, Duration::from_secs(60)),
    ];
    let mut failures = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let pass = out.pass && elapsed <= *budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} [{}] {name}: {} ({:.2}s of {}s budget)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {}/10 passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
