//! ExpCommit end to end: explore with Gaussian inputs, identify, pick an
//! optimistic model from the confidence set, then commit to its controller.
//! Also Monte-Carlo ensembles, regret-exponent fits and the exploration
//! threshold diagnostics.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LqgError, Result};
use crate::estimator::ModelController;
use crate::linalg::{gaussian_vector, quad_form, spectral_norm};
use crate::ofu::{self, ConfidenceSet};
use crate::riccati;
use crate::sysid::{
    self, ConfidenceRadii, HankelStats, IdentifiedModel, NoiseBoundTerms, NoiseTermConfig,
    RadiiMode, SystemStatistics,
};
use crate::system::{self, observe, transition, CostParams, LqgSystem, MarkovParams, Trajectory};

/// Norm above which the closed loop is declared divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// Environment variable capping the number of parallel trials.
pub const THREADS_ENV: &str = "OFU_LQG_THREADS";

const STREAM_EXPLORE: u64 = 0;
const STREAM_SELECT: u64 = 1;
const STREAM_COMMIT: u64 = 2;

fn default_sigma_u() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    0.05
}
fn default_kappa() -> f64 {
    10.0
}
fn default_margin() -> f64 {
    0.99
}
fn default_budget() -> usize {
    200
}
fn default_one() -> f64 {
    1.0
}

/// Run configuration. Optional fields fall back to their documented defaults
/// once the plant dimensions are known (see [`ExpCommitConfig::resolve`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpCommitConfig {
    #[serde(rename = "T")]
    pub t: usize,
    /// Default `floor(T^{2/3})`.
    #[serde(rename = "T_exp", default)]
    pub t_exp: Option<usize>,
    /// Default `2n + 1`.
    #[serde(rename = "H", default)]
    pub horizon: Option<usize>,
    /// Hankel block split, `d1 + d2 + 1 = H`. Default `d1 = (H-1)/2`.
    #[serde(default)]
    pub d1: Option<usize>,
    #[serde(default)]
    pub d2: Option<usize>,
    #[serde(default = "default_sigma_u")]
    pub sigma_u: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub n_declared: usize,
    /// Default identity weights.
    #[serde(default)]
    pub cost: Option<CostParams>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_margin")]
    pub contractibility_margin: f64,
    #[serde(default = "default_budget")]
    pub search_budget: usize,
    /// Default `T^{-1/3}`.
    #[serde(default)]
    pub slack: Option<f64>,
    #[serde(default = "default_radii_mode")]
    pub radii_mode: RadiiMode,
    #[serde(default = "default_one")]
    pub c: f64,
    #[serde(default = "default_one")]
    pub c_prime: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Multiplier applied to every confidence radius.
    #[serde(default = "default_one")]
    pub radius_scale: f64,
    /// Accepted for compatibility with the algorithm statement; unused.
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// When present, threshold diagnostics are evaluated with these constants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdInputs>,
}

fn default_radii_mode() -> RadiiMode {
    RadiiMode::PlugIn
}

impl ExpCommitConfig {
    pub fn new(t: usize, n_declared: usize) -> Self {
        ExpCommitConfig {
            t,
            t_exp: None,
            horizon: None,
            d1: None,
            d2: None,
            sigma_u: default_sigma_u(),
            delta: default_delta(),
            n_declared,
            cost: None,
            kappa: default_kappa(),
            contractibility_margin: default_margin(),
            search_budget: default_budget(),
            slack: None,
            radii_mode: default_radii_mode(),
            c: 1.0,
            c_prime: 1.0,
            master_seed: 0,
            radius_scale: 1.0,
            s: None,
            thresholds: None,
        }
    }

    /// Fills defaults and validates against the plant dimensions.
    pub fn resolve(&self, sys: &LqgSystem) -> Result<ResolvedConfig> {
        let n = self.n_declared;
        if n == 0 {
            return Err(LqgError::Parameter("n_declared must be >= 1".into()));
        }
        let horizon = self.horizon.unwrap_or(2 * n + 1);
        if horizon < 2 {
            return Err(LqgError::Parameter("H must be >= 2".into()));
        }
        let d1 = self.d1.unwrap_or((horizon - 1) / 2);
        let d2 = self.d2.unwrap_or(horizon - 1 - d1.min(horizon - 1));
        if d1 + d2 + 1 != horizon || d1 == 0 || d2 == 0 {
            return Err(LqgError::Parameter(format!(
                "Hankel split d1={d1}, d2={d2} must be positive with d1 + d2 + 1 = H = {horizon}"
            )));
        }
        let t_exp = self.t_exp.unwrap_or_else(|| default_t_exp(self.t));
        if !(horizon <= t_exp && t_exp < self.t) {
            return Err(LqgError::Parameter(format!(
                "need H <= T_exp < T, got H={horizon}, T_exp={t_exp}, T={}",
                self.t
            )));
        }
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return Err(LqgError::Parameter("sigma_u must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(LqgError::Parameter("delta must lie in (0, 1)".into()));
        }
        if self.search_budget == 0 {
            return Err(LqgError::Parameter("search_budget must be >= 1".into()));
        }
        if !(self.radius_scale >= 0.0 && self.radius_scale.is_finite()) {
            return Err(LqgError::Parameter("radius_scale must be finite and nonnegative".into()));
        }
        let cost = match &self.cost {
            Some(c) => c.clone(),
            None => CostParams::identity(sys.m(), sys.p()),
        };
        cost.check_dims(sys)?;
        let slack = self.slack.unwrap_or_else(|| (self.t as f64).powf(-1.0 / 3.0));
        Ok(ResolvedConfig {
            t: self.t,
            t_exp,
            horizon,
            d1,
            d2,
            cost,
            slack,
            cfg: self.clone(),
        })
    }
}

/// `floor(T^{2/3})`, guarded against floating-point undershoot at perfect cubes.
pub fn default_t_exp(t: usize) -> usize {
    let mut v = (t as f64).powf(2.0 / 3.0).floor() as usize;
    while ((v + 1) as u128).pow(3) <= (t as u128).pow(2) {
        v += 1;
    }
    while v > 0 && (v as u128).pow(3) > (t as u128).pow(2) {
        v -= 1;
    }
    v
}

/// Configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub t: usize,
    pub t_exp: usize,
    pub horizon: usize,
    pub d1: usize,
    pub d2: usize,
    pub cost: CostParams,
    pub slack: f64,
    pub cfg: ExpCommitConfig,
}

fn phase_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Exploration rollout from `x_0 = 0`; also returns the state after the last step.
fn explore_rollout(
    sys: &LqgSystem,
    steps: usize,
    sigma_u: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Trajectory, DVector<f64>)> {
    if steps == 0 {
        return Err(LqgError::Parameter("exploration length must be >= 1".into()));
    }
    let mut traj = Trajectory {
        inputs: Vec::with_capacity(steps),
        outputs: Vec::with_capacity(steps),
        states: Some(Vec::with_capacity(steps)),
    };
    let mut x = DVector::zeros(sys.n());
    for _ in 0..steps {
        let y = observe(sys, &x, rng);
        let u = gaussian_vector(rng, sys.p(), sigma_u);
        let x_next = transition(sys, &x, &u, rng);
        traj.outputs.push(y);
        traj.inputs.push(u);
        if let Some(states) = traj.states.as_mut() {
            states.push(std::mem::replace(&mut x, x_next));
        }
    }
    Ok((traj, x))
}

/// Rollout of length `T_exp` with i.i.d. `N(0, sigma_u^2 I)` inputs, seeded
/// from the config's exploration stream.
pub fn explore_phase(sys: &LqgSystem, cfg: &ResolvedConfig) -> Result<Trajectory> {
    let mut rng = phase_rng(cfg.cfg.master_seed, STREAM_EXPLORE);
    explore_rollout(sys, cfg.t_exp, cfg.cfg.sigma_u, &mut rng).map(|(traj, _)| traj)
}

/// Everything produced by the identification step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub model: IdentifiedModel,
    /// Radii after `radius_scale` has been applied.
    pub radii: ConfidenceRadii,
    /// Radii as given by the bounds, before scaling.
    pub raw_radii: ConfidenceRadii,
    pub terms: NoiseBoundTerms,
    pub hankel: HankelStats,
    pub g_hat: MarkovParams,
}

/// Regression, Ho-Kalman and confidence radii. The noise scales are treated
/// as known. In oracle mode `oracle_sys` supplies `||F||`, `sigma_e`, `rho`
/// and the Hankel statistics; in plug-in mode they come from the estimate.
pub fn identify(
    traj: &Trajectory,
    cfg: &ResolvedConfig,
    sigma_w: f64,
    sigma_z: f64,
    oracle_sys: Option<&LqgSystem>,
) -> Result<Identification> {
    let n = cfg.cfg.n_declared;
    let data = sysid::assemble_regression(traj, cfg.horizon)?;
    let n_samples = data.n_samples;
    let g_hat = sysid::least_squares_markov(&data)?;
    let model = sysid::ho_kalman(&g_hat, n, cfg.d1, cfg.d2)?;
    let (m, p) = (g_hat.m, g_hat.p);

    let (stats, hankel) = match (cfg.cfg.radii_mode, oracle_sys) {
        (RadiiMode::Oracle, Some(truth)) => {
            let g_true = system::markov_parameters(truth, cfg.horizon)?;
            (
                SystemStatistics::from_system(truth, cfg.horizon, cfg.cfg.sigma_u)?,
                HankelStats::from_markov(&g_true, n, cfg.d1, cfg.d2)?,
            )
        }
        (RadiiMode::Oracle, None) => {
            return Err(LqgError::Parameter("oracle radii need the true system".into()))
        }
        (RadiiMode::PlugIn, _) => {
            let center = model.to_system(sigma_w, sigma_z)?;
            (
                SystemStatistics::from_system(&center, cfg.horizon, cfg.cfg.sigma_u)?,
                HankelStats::from_markov(&g_hat, n, cfg.d1, cfg.d2)?,
            )
        }
    };
    let terms = sysid::noise_terms(
        &stats,
        &NoiseTermConfig {
            horizon: cfg.horizon,
            n_samples,
            t_exp: cfg.t_exp,
            m,
            p,
            n,
            delta: cfg.cfg.delta,
            sigma_w,
            sigma_z,
            c: cfg.cfg.c,
            c_prime: cfg.cfg.c_prime,
        },
    )?;
    let raw_radii = sysid::confidence_radii(
        &terms,
        &hankel,
        n,
        cfg.t_exp,
        cfg.horizon,
        cfg.cfg.sigma_u,
        cfg.cfg.radii_mode,
    )?;
    Ok(Identification {
        model,
        radii: raw_radii.scaled(cfg.cfg.radius_scale),
        raw_radii,
        terms,
        hankel,
        g_hat,
    })
}

/// Result of running a committed controller on the true plant.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitOutcome {
    pub costs: Vec<f64>,
    /// `sup_t ||x_{t|t}||` of the agent's filter.
    pub max_state_estimate_norm: f64,
    /// `sup_t ||y_t||`
    pub max_output_norm: f64,
    pub final_state: DVector<f64>,
}

/// Per step: observe `y_t` from the true plant, correct with the agent's
/// model, play `u_t = -K x_{t|t}`, advance the true plant, predict.
pub fn commit_phase<R: rand::Rng + ?Sized>(
    sys: &LqgSystem,
    cost: &CostParams,
    controller: &mut ModelController,
    t_commit: usize,
    x0: DVector<f64>,
    rng: &mut R,
) -> Result<CommitOutcome> {
    if controller.model().m() != sys.m() || controller.model().p() != sys.p() {
        return Err(LqgError::Dimension("controller does not match plant I/O".into()));
    }
    if x0.len() != sys.n() {
        return Err(LqgError::Dimension("initial state length".into()));
    }
    let mut costs = Vec::with_capacity(t_commit);
    let mut max_est = 0.0f64;
    let mut max_out = 0.0f64;
    let mut x = x0;
    for step in 0..t_commit {
        let y = observe(sys, &x, rng);
        let est_norm = controller.filter_correct(&y)?.norm();
        let u = controller.control_action()?;
        let y_norm = y.norm();
        let worst = est_norm.max(y_norm).max(x.norm());
        if !worst.is_finite() || worst > DIVERGENCE_NORM {
            return Err(LqgError::Divergence { step, norm: worst });
        }
        max_est = max_est.max(est_norm);
        max_out = max_out.max(y_norm);
        costs.push(quad_form(cost.q(), &y) + quad_form(cost.r(), &u));
        x = transition(sys, &x, &u, rng);
        controller.filter_predict(&u)?;
    }
    Ok(CommitOutcome {
        costs,
        max_state_estimate_norm: max_est,
        max_output_norm: max_out,
        final_state: x,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_state_estimate_norm: f64,
    pub max_output_norm: f64,
    /// Oracle mode only: whether the aligned true realization passes membership.
    pub true_in_set: Option<bool>,
    pub selection_rejections: BTreeMap<String, usize>,
    pub selection_evaluated: usize,
    pub selection_feasible: usize,
    pub selected_index: usize,
    pub thresholds: Option<ThresholdReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RunResult {
    pub costs: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    pub J_star_true: f64,
    pub identified: IdentifiedModel,
    pub radii: ConfidenceRadii,
    pub selected_model: LqgSystem,
    pub selected_J: f64,
    pub slack: f64,
    pub t_exp: usize,
    pub diagnostics: Diagnostics,
}

impl RunResult {
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// Running `sum_{s <= t} (c_s - J*)`.
pub fn regret_curve(costs: &[f64], j_star: f64) -> Vec<f64> {
    let mut acc = 0.0;
    costs
        .iter()
        .map(|c| {
            acc += c - j_star;
            acc
        })
        .collect()
}

/// Ho-Kalman realization of the true Markov parameters in the basis of the
/// identified center. Balanced realizations of nearby Markov parameters are
/// related by an orthogonal map, which the alignment removes.
pub fn aligned_truth(sys: &LqgSystem, center: &IdentifiedModel, cfg: &ResolvedConfig) -> Result<LqgSystem> {
    let g = system::markov_parameters(sys, cfg.horizon)?;
    let bal = sysid::ho_kalman(&g, cfg.cfg.n_declared, cfg.d1, cfg.d2)?;
    let bal = bal.to_system(sys.sigma_w(), sys.sigma_z())?;
    ofu::align_to_center(center, &bal)
}

/// Full ExpCommit run; a pure function of `(sys, config)`.
pub fn run_expcommit(sys: &LqgSystem, config: &ExpCommitConfig) -> Result<RunResult> {
    let cfg = config.resolve(sys)?;
    let truth = riccati::synthesize(sys, &cfg.cost)?;

    let mut rng = phase_rng(config.master_seed, STREAM_EXPLORE);
    let (traj, x_after) = explore_rollout(sys, cfg.t_exp, config.sigma_u, &mut rng)?;
    let ident = identify(&traj, &cfg, sys.sigma_w(), sys.sigma_z(), Some(sys))?;

    let set = ConfidenceSet::new(
        ident.model.clone(),
        ident.radii,
        config.kappa,
        config.contractibility_margin,
        cfg.horizon,
        sys.sigma_w(),
        sys.sigma_z(),
    )?;
    let true_in_set = match config.radii_mode {
        RadiiMode::Oracle => Some(match aligned_truth(sys, &ident.model, &cfg) {
            Ok(t) => ofu::membership(&t, &set, &cfg.cost)?.feasible,
            Err(_) => false,
        }),
        RadiiMode::PlugIn => None,
    };
    let mut select_rng = phase_rng(config.master_seed, STREAM_SELECT);
    let selection = ofu::optimistic_select(&set, &cfg.cost, config.search_budget, cfg.slack, &mut select_rng)?;

    let mut controller = ModelController::new(selection.model.clone(), selection.synth.clone())?;
    let mut commit_rng = phase_rng(config.master_seed, STREAM_COMMIT);
    let commit = commit_phase(
        sys,
        &cfg.cost,
        &mut controller,
        cfg.t - cfg.t_exp,
        x_after,
        &mut commit_rng,
    )?;

    let mut costs = traj.costs(&cfg.cost);
    costs.extend_from_slice(&commit.costs);
    let cumulative_regret = regret_curve(&costs, truth.J_star);

    let thresholds = match &config.thresholds {
        Some(inputs) => Some(exploration_thresholds(
            sys,
            &cfg.cost,
            &ident.terms,
            inputs,
            config.sigma_u,
            cfg.horizon,
        )?),
        None => None,
    };

    Ok(RunResult {
        costs,
        cumulative_regret,
        J_star_true: truth.J_star,
        identified: ident.model,
        radii: ident.radii,
        selected_model: selection.model,
        selected_J: selection.j_tilde,
        slack: cfg.slack,
        t_exp: cfg.t_exp,
        diagnostics: Diagnostics {
            max_state_estimate_norm: commit.max_state_estimate_norm,
            max_output_norm: commit.max_output_norm,
            true_in_set,
            selection_rejections: selection.rejections,
            selection_evaluated: selection.evaluated,
            selection_feasible: selection.feasible_count,
            selected_index: selection.selected_index,
            thresholds,
        },
    })
}

/// Empirical coverage calibration of the confidence radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusCalibration {
    /// Smallest `radius_scale` covering the requested fraction of seeds.
    pub scale: f64,
    pub coverage: f64,
    /// Per seed, `max_X ||X_hat - X_true|| / beta_X` over `X in {A, B, C}`
    /// with unscaled radii, sorted ascending.
    pub ratios: Vec<f64>,
}

/// Runs `n_seeds` explorations (seeds `master_seed + offset + i`) and returns
/// the smallest multiplier of the unscaled radii under which the aligned true
/// realization lies in all three balls for at least a `coverage` fraction of
/// them.
pub fn calibrate_radius_scale(
    sys: &LqgSystem,
    config: &ExpCommitConfig,
    n_seeds: usize,
    coverage: f64,
    seed_offset: u64,
) -> Result<RadiusCalibration> {
    if n_seeds == 0 || !(coverage > 0.0 && coverage <= 1.0) {
        return Err(LqgError::Parameter("need n_seeds >= 1 and coverage in (0, 1]".into()));
    }
    let mut ratios = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.master_seed = config.master_seed.wrapping_add(seed_offset).wrapping_add(i as u64);
            let cfg = c.resolve(sys)?;
            let traj = explore_phase(sys, &cfg)?;
            let id = identify(&traj, &cfg, sys.sigma_w(), sys.sigma_z(), Some(sys))?;
            let truth = aligned_truth(sys, &id.model, &cfg)?;
            let r = &id.raw_radii;
            let ea = spectral_norm(&(&id.model.a_hat - truth.a())) / r.beta_a;
            let eb = spectral_norm(&(&id.model.b_hat - truth.b())) / r.beta_b;
            let ec = spectral_norm(&(&id.model.c_hat - truth.c())) / r.beta_c;
            Ok(ea.max(eb).max(ec))
        })
        .collect::<Result<Vec<f64>>>()?;
    ratios.sort_by(f64::total_cmp);
    let rank = ((coverage * n_seeds as f64).ceil() as usize).clamp(1, n_seeds);
    Ok(RadiusCalibration {
        scale: ratios[rank - 1],
        coverage,
        ratios,
    })
}

/// Per-step statistics of cumulative regret across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
    pub n_trials: usize,
    pub n_succeeded: usize,
    /// `(trial index, error)` for every failed trial.
    pub failures: Vec<(usize, String)>,
    /// Per successful trial, in trial order.
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    pub final_regret: f64,
    pub selected_j: f64,
    pub true_in_set: Option<bool>,
    pub max_state_estimate_norm: f64,
    pub max_output_norm: f64,
}

impl EnsembleSummary {
    pub fn final_median(&self) -> f64 {
        self.median.last().copied().unwrap_or(f64::NAN)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Thread count from `OFU_LQG_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Monte-Carlo ensemble with trial seeds `master_seed + index`, using the
/// thread cap from the environment.
pub fn monte_carlo(sys: &LqgSystem, config: &ExpCommitConfig, n_trials: usize) -> Result<EnsembleSummary> {
    monte_carlo_with_threads(sys, config, n_trials, threads_from_env())
}

/// As [`monte_carlo`] with an explicit thread count (`None` = rayon default).
/// The result does not depend on the thread count.
pub fn monte_carlo_with_threads(
    sys: &LqgSystem,
    config: &ExpCommitConfig,
    n_trials: usize,
    threads: Option<usize>,
) -> Result<EnsembleSummary> {
    if n_trials == 0 {
        return Err(LqgError::Parameter("n_trials must be >= 1".into()));
    }
    config.resolve(sys)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| LqgError::Ensemble(format!("thread pool: {e}")))?;

    let outcomes: Vec<(u64, Result<RunResult>)> = pool.install(|| {
        (0..n_trials)
            .into_par_iter()
            .map(|i| {
                let mut c = config.clone();
                c.master_seed = config.master_seed.wrapping_add(i as u64);
                let seed = c.master_seed;
                (seed, run_expcommit(sys, &c))
            })
            .collect()
    });

    let mut curves = Vec::new();
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (index, (seed, outcome)) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(run) => {
                trials.push(TrialRecord {
                    index,
                    seed,
                    final_regret: run.final_regret(),
                    selected_j: run.selected_J,
                    true_in_set: run.diagnostics.true_in_set,
                    max_state_estimate_norm: run.diagnostics.max_state_estimate_norm,
                    max_output_norm: run.diagnostics.max_output_norm,
                });
                curves.push(run.cumulative_regret);
            }
            Err(e) => {
                log::warn!("trial {index} (seed {seed}) failed: {e}");
                failures.push((index, e.to_string()));
            }
        }
    }
    if curves.is_empty() {
        return Err(LqgError::Ensemble(format!(
            "all {n_trials} trials failed; first error: {}",
            failures.first().map(|f| f.1.as_str()).unwrap_or("")
        )));
    }
    let len = curves[0].len();
    let k = curves.len();
    let mut mean = Vec::with_capacity(len);
    let mut median = Vec::with_capacity(len);
    let mut q10 = Vec::with_capacity(len);
    let mut q90 = Vec::with_capacity(len);
    let mut column = vec![0.0; k];
    for t in 0..len {
        for (slot, curve) in column.iter_mut().zip(&curves) {
            *slot = curve[t];
        }
        mean.push(column.iter().sum::<f64>() / k as f64);
        column.sort_by(f64::total_cmp);
        median.push(quantile_sorted(&column, 0.5));
        q10.push(quantile_sorted(&column, 0.1));
        q90.push(quantile_sorted(&column, 0.9));
    }
    Ok(EnsembleSummary {
        mean,
        median,
        q10,
        q90,
        n_trials,
        n_succeeded: k,
        failures,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `log(regret)` on `log(T)`.
pub fn fit_regret_exponent(points: &[(f64, f64)]) -> Result<RegretFit> {
    if points.len() < 3 {
        return Err(LqgError::Parameter(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some((t, r)) = points.iter().find(|(t, r)| !(*t > 0.0 && *r > 0.0)) {
        return Err(LqgError::LogDomain(format!(
            "T = {t}, regret = {r}: both must be positive"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, r)| r.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LqgError::Parameter("all T values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RegretFit {
        slope,
        intercept,
        r_squared,
    })
}

/// User-supplied constants for the threshold diagnostics. Missing set-level
/// constants are replaced by the plant's own values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ThresholdInputs {
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub D: Option<f64>,
    #[serde(default)]
    pub Gamma_sup: Option<f64>,
    #[serde(default)]
    pub zeta_sup: Option<f64>,
    #[serde(default)]
    pub rho_sup: Option<f64>,
    #[serde(default)]
    pub upsilon_sup: Option<f64>,
    #[serde(default)]
    pub sigma_margin: Option<f64>,
}

impl ThresholdInputs {
    pub fn stand_in(c1: f64, c2: f64) -> Self {
        ThresholdInputs {
            c1,
            c2,
            D: None,
            Gamma_sup: None,
            zeta_sup: None,
            rho_sup: None,
            upsilon_sup: None,
            sigma_margin: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ThresholdConstants {
    pub c1: f64,
    pub c2: f64,
    pub D: f64,
    pub Gamma_sup: f64,
    pub zeta_sup: f64,
    pub rho_sup: f64,
    pub upsilon_sup: f64,
    pub sigma_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ThresholdReport {
    pub T_G: f64,
    pub T_B: f64,
    pub T_A: f64,
    pub T_N: f64,
    pub T_M: f64,
    pub T_L: f64,
    pub T_alpha: f64,
    pub T_beta: f64,
    pub T_gamma: f64,
    pub T_0: f64,
    pub user_constants: ThresholdConstants,
    /// Names of constants that were replaced by per-model stand-ins.
    pub stand_ins: Vec<String>,
}

/// Minimum exploration intervals. Per-model stand-ins: `D = ||P||`,
/// `Gamma = ||K||`, `zeta = ||L||`, `rho = ||A - BK||`, `upsilon = ||A - ALC||`,
/// `sigma = (1 + max(rho, upsilon)) / 2`.
pub fn exploration_thresholds(
    sys: &LqgSystem,
    cost: &CostParams,
    terms: &NoiseBoundTerms,
    inputs: &ThresholdInputs,
    sigma_u: f64,
    horizon: usize,
) -> Result<ThresholdReport> {
    if !(sigma_u > 0.0) {
        return Err(LqgError::Parameter("sigma_u must be positive".into()));
    }
    if horizon < 3 {
        return Err(LqgError::Parameter("H must be >= 3".into()));
    }
    let synth = riccati::synthesize(sys, cost)?;
    let n = sys.n();
    let nf = n as f64;
    let d1 = (horizon - 1) / 2;
    let d2 = horizon - 1 - d1;
    let g = system::markov_parameters(sys, horizon)?;
    let hk = HankelStats::from_markov(&g, n, d1, d2)?;
    if !(hk.sigma_n > 0.0) {
        return Err(LqgError::Rank("Hankel sigma_n is zero".into()));
    }
    let phi = system::phi_of_a(sys.a(), system::DEFAULT_TAU_MAX)?;
    let c_norm = spectral_norm(sys.c());
    let b_norm = spectral_norm(sys.b());

    let mut stand_ins = Vec::new();
    let mut pick = |v: Option<f64>, name: &str, model: f64| {
        v.unwrap_or_else(|| {
            stand_ins.push(name.to_string());
            model
        })
    };
    let d = pick(inputs.D, "D", spectral_norm(&synth.P));
    let gamma = pick(inputs.Gamma_sup, "Gamma_sup", spectral_norm(&synth.K));
    let zeta = pick(inputs.zeta_sup, "zeta_sup", spectral_norm(&synth.L));
    let rho = pick(
        inputs.rho_sup,
        "rho_sup",
        spectral_norm(&(sys.a() - sys.b() * &synth.K)),
    );
    let upsilon = pick(
        inputs.upsilon_sup,
        "upsilon_sup",
        spectral_norm(&(sys.a() - sys.a() * &synth.L * sys.c())),
    );
    let sigma = pick(inputs.sigma_margin, "sigma_margin", (1.0 + rho.max(upsilon)) / 2.0);
    if !(sigma > rho.max(upsilon) && sigma < 1.0) {
        return Err(LqgError::Feasibility(format!(
            "margin sigma = {sigma} must lie in (max(rho, upsilon), 1) = ({}, 1)",
            rho.max(upsilon)
        )));
    }

    let sn = hk.sigma_n;
    let t_g = (terms.total() / sigma_u).powi(2);
    let t_b = t_g * (7.0 * nf / sn.sqrt()).powi(2);
    let t_a = t_g * ((31.0 * nf * hk.norm + 7.0 * nf * sn) / (sn * sn)).powi(2);
    let t_m = t_b * (2.0 * zeta * rho / (1.0 - rho)).powi(2);
    let t_n = t_g * (4.0 * nf.sqrt() / sn).powi(2);
    let t_ab = t_a.max(t_b);
    let t_l = t_ab
        * ((inputs.c1 * (2.0 * c_norm + 1.0) * phi * phi + inputs.c2 * (2.0 * phi + 1.0))
            / (1.0 - upsilon * upsilon))
            .powi(2);
    let t_alpha = t_b * (gamma * (1.0 + zeta * (1.0 + c_norm)) / (sigma - upsilon)).powi(2);
    let t_beta = t_ab
        * (gamma * b_norm * (1.0 + zeta + zeta * c_norm) * (phi * zeta + (1.0 + gamma) * (1.0 + zeta))
            / (1.0 - sigma).powi(2))
        .powi(2);
    let t_gamma = t_ab * ((1.0 + gamma * (1.0 + zeta * b_norm)) / (sigma - rho)).powi(2);
    let t_0 = [t_g, t_b, t_a, t_n, t_m, t_l, t_alpha, t_beta, t_gamma]
        .into_iter()
        .fold(0.0, f64::max)
        + horizon as f64;

    Ok(ThresholdReport {
        T_G: t_g,
        T_B: t_b,
        T_A: t_a,
        T_N: t_n,
        T_M: t_m,
        T_L: t_l,
        T_alpha: t_alpha,
        T_beta: t_beta,
        T_gamma: t_gamma,
        T_0: t_0,
        user_constants: ThresholdConstants {
            c1: inputs.c1,
            c2: inputs.c2,
            D: d,
            Gamma_sup: gamma,
            zeta_sup: zeta,
            rho_sup: rho,
            upsilon_sup: upsilon,
            sigma_margin: sigma,
        },
        stand_ins,
    })
}
