//! Confidence sets around an identified model and optimistic model selection.
//!
//! The feasible family is the product of spectral-norm balls around the
//! identified `(A_hat, B_hat, C_hat)` intersected with the admissible set:
//! stable, controllable, observable, bounded Markov energy `Tr(G^T G) <= kappa^2`
//! and contractible closed loops (both closed-loop spectral radii at most the
//! configured margin). Selection is derivative-free random search over the
//! balls with the center always evaluated first.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SVD};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LqgError, Result};
use crate::linalg::{gaussian_matrix, spectral_norm, spectral_radius};
use crate::riccati::{self, ControllerSynthesis};
use crate::system::{self, controllability_matrix, observability_matrix, CostParams, LqgSystem};
use crate::sysid::{ConfidenceRadii, IdentifiedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub center: IdentifiedModel,
    pub radii: ConfidenceRadii,
    /// Bound on the Frobenius norm of the length-`horizon` Markov matrix.
    pub kappa: f64,
    /// Upper bound accepted for `rho(A - BK)` and `rho(A - ALC)`.
    pub contractibility_margin: f64,
    pub horizon: usize,
    /// Noise scales inherited by every candidate.
    pub sigma_w: f64,
    pub sigma_z: f64,
}

impl ConfidenceSet {
    pub fn new(
        center: IdentifiedModel,
        radii: ConfidenceRadii,
        kappa: f64,
        contractibility_margin: f64,
        horizon: usize,
        sigma_w: f64,
        sigma_z: f64,
    ) -> Result<Self> {
        let radii_ok = [radii.beta_a, radii.beta_b, radii.beta_c]
            .iter()
            .all(|r| r.is_finite() && *r >= 0.0);
        if !radii_ok {
            return Err(LqgError::Parameter("radii must be finite and nonnegative".into()));
        }
        if !(kappa > 0.0) {
            return Err(LqgError::Parameter("kappa must be positive".into()));
        }
        if !(contractibility_margin > 0.0 && contractibility_margin < 1.0) {
            return Err(LqgError::Parameter(
                "contractibility margin must lie in (0, 1)".into(),
            ));
        }
        if horizon == 0 {
            return Err(LqgError::Parameter("horizon must be >= 1".into()));
        }
        Ok(ConfidenceSet {
            center,
            radii,
            kappa,
            contractibility_margin,
            horizon,
            sigma_w,
            sigma_z,
        })
    }

    pub fn center_system(&self) -> Result<LqgSystem> {
        self.center.to_system(self.sigma_w, self.sigma_z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    #[serde(rename = "ball_A")]
    BallA,
    #[serde(rename = "ball_B")]
    BallB,
    #[serde(rename = "ball_C")]
    BallC,
    #[serde(rename = "unstable")]
    Unstable,
    #[serde(rename = "uncontrollable")]
    Uncontrollable,
    #[serde(rename = "unobservable")]
    Unobservable,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "synthesis_failed")]
    SynthesisFailed,
    #[serde(rename = "contractibility")]
    Contractibility,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BallA => "ball_A",
            RejectReason::BallB => "ball_B",
            RejectReason::BallC => "ball_C",
            RejectReason::Unstable => "unstable",
            RejectReason::Uncontrollable => "uncontrollable",
            RejectReason::Unobservable => "unobservable",
            RejectReason::Kappa => "kappa",
            RejectReason::SynthesisFailed => "synthesis_failed",
            RejectReason::Contractibility => "contractibility",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEvaluation {
    pub model: LqgSystem,
    pub synth: Option<ControllerSynthesis>,
    /// Present iff the candidate is feasible.
    pub j: Option<f64>,
    pub feasible: bool,
    pub rejection_reason: Option<RejectReason>,
}

impl CandidateEvaluation {
    fn rejected(model: LqgSystem, reason: RejectReason) -> Self {
        CandidateEvaluation {
            model,
            synth: None,
            j: None,
            feasible: false,
            rejection_reason: Some(reason),
        }
    }
}

/// Full feasibility test of one candidate. Never fails for a
/// dimension-compatible candidate: synthesis problems become rejections.
pub fn membership(candidate: &LqgSystem, set: &ConfidenceSet, cost: &CostParams) -> Result<CandidateEvaluation> {
    let c = &set.center;
    if candidate.a().shape() != c.a_hat.shape()
        || candidate.b().shape() != c.b_hat.shape()
        || candidate.c().shape() != c.c_hat.shape()
    {
        return Err(LqgError::Dimension("candidate does not match the set center".into()));
    }
    cost.check_dims(candidate)?;
    let model = candidate.clone();
    if spectral_norm(&(&c.a_hat - candidate.a())) > set.radii.beta_a {
        return Ok(CandidateEvaluation::rejected(model, RejectReason::BallA));
    }
    if spectral_norm(&(&c.b_hat - candidate.b())) > set.radii.beta_b {
        return Ok(CandidateEvaluation::rejected(model, RejectReason::BallB));
    }
    if spectral_norm(&(&c.c_hat - candidate.c())) > set.radii.beta_c {
        return Ok(CandidateEvaluation::rejected(model, RejectReason::BallC));
    }
    match spectral_radius(candidate.a()) {
        Ok(rho) if rho < 1.0 => {}
        _ => return Ok(CandidateEvaluation::rejected(model, RejectReason::Unstable)),
    }
    if !system::is_controllable(candidate, system::DEFAULT_RANK_TOL) {
        return Ok(CandidateEvaluation::rejected(model, RejectReason::Uncontrollable));
    }
    if !system::is_observable(candidate, system::DEFAULT_RANK_TOL) {
        return Ok(CandidateEvaluation::rejected(model, RejectReason::Unobservable));
    }
    let energy = system::markov_parameters(candidate, set.horizon)?.trace_gram();
    if energy > set.kappa * set.kappa {
        return Ok(CandidateEvaluation::rejected(model, RejectReason::Kappa));
    }
    let synth = match riccati::synthesize(candidate, cost) {
        Ok(s) => s,
        Err(LqgError::Feasibility(_)) => {
            return Ok(CandidateEvaluation::rejected(model, RejectReason::Contractibility))
        }
        Err(_) => return Ok(CandidateEvaluation::rejected(model, RejectReason::SynthesisFailed)),
    };
    if synth.closed_loop_control_radius > set.contractibility_margin
        || synth.closed_loop_filter_radius > set.contractibility_margin
    {
        return Ok(CandidateEvaluation::rejected(model, RejectReason::Contractibility));
    }
    Ok(CandidateEvaluation {
        model,
        j: Some(synth.J_star),
        synth: Some(synth),
        feasible: true,
        rejection_reason: None,
    })
}

/// Perturbation uniform in radius inside a spectral-norm ball (Gaussian direction).
fn ball_perturbation<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, radius: f64) -> DMatrix<f64> {
    let dir = gaussian_matrix(rng, rows, cols);
    let scale: f64 = rng.random::<f64>();
    let norm = spectral_norm(&dir);
    if radius == 0.0 || norm == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    dir * (radius * scale / norm)
}

/// Random candidate: the center perturbed inside each of the three balls.
/// No feasibility guarantee.
pub fn sample_candidate<R: Rng + ?Sized>(set: &ConfidenceSet, rng: &mut R) -> Result<LqgSystem> {
    let c = &set.center;
    let (n, p, m) = (c.a_hat.nrows(), c.b_hat.ncols(), c.c_hat.nrows());
    let da = ball_perturbation(rng, n, n, set.radii.beta_a);
    let db = ball_perturbation(rng, n, p, set.radii.beta_b);
    let dc = ball_perturbation(rng, m, n, set.radii.beta_c);
    LqgSystem::new(
        &c.a_hat + da,
        &c.b_hat + db,
        &c.c_hat + dc,
        set.sigma_w,
        set.sigma_z,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub model: LqgSystem,
    pub synth: ControllerSynthesis,
    pub j_tilde: f64,
    /// Allowed suboptimality recorded with the result (nominally `T^{-1/3}`).
    pub slack: f64,
    pub evaluated: usize,
    pub feasible_count: usize,
    /// Index of the winner in evaluation order (0 is the center).
    pub selected_index: usize,
    pub rejections: BTreeMap<String, usize>,
}

/// Evaluates the given candidates in order and returns the feasible one with
/// the smallest `J`, ties broken by position.
pub fn select_from_candidates(
    set: &ConfidenceSet,
    cost: &CostParams,
    candidates: Vec<LqgSystem>,
    slack: f64,
) -> Result<Selection> {
    let evaluated = candidates.len();
    let evals: Vec<CandidateEvaluation> = candidates
        .par_iter()
        .map(|c| membership(c, set, cost))
        .collect::<Result<_>>()?;

    let mut rejections = BTreeMap::new();
    let mut best: Option<(usize, f64)> = None;
    let mut feasible_count = 0;
    for (i, ev) in evals.iter().enumerate() {
        match (ev.j, ev.rejection_reason) {
            (Some(j), _) => {
                feasible_count += 1;
                if best.is_none_or(|(_, bj)| j < bj) {
                    best = Some((i, j));
                }
            }
            (None, Some(reason)) => *rejections.entry(reason.as_str().to_string()).or_insert(0) += 1,
            (None, None) => {}
        }
    }
    let Some((idx, j_tilde)) = best else {
        return Err(LqgError::SelectionFailure {
            evaluated,
            rejections,
        });
    };
    let winner = evals.into_iter().nth(idx).expect("index in range");
    Ok(Selection {
        model: winner.model,
        synth: winner.synth.expect("feasible candidates carry a synthesis"),
        j_tilde,
        slack,
        evaluated,
        feasible_count,
        selected_index: idx,
        rejections,
    })
}

/// Evaluates the center plus `budget - 1` sampled candidates and returns the
/// feasible candidate minimizing `J`.
pub fn optimistic_select<R: Rng + ?Sized>(
    set: &ConfidenceSet,
    cost: &CostParams,
    budget: usize,
    slack: f64,
    rng: &mut R,
) -> Result<Selection> {
    if budget == 0 {
        return Err(LqgError::Parameter("search budget must be >= 1".into()));
    }
    let mut candidates = Vec::with_capacity(budget);
    candidates.push(set.center_system()?);
    for _ in 1..budget {
        candidates.push(sample_candidate(set, rng)?);
    }
    select_from_candidates(set, cost, candidates, slack)
}

/// Expresses `sys` in the coordinates of `center` through the orthogonal
/// transform that best aligns their controllability and observability
/// matrices (orthogonal Procrustes). Returns `(T^T A T, T^T B, C T)`.
///
/// Orthogonal changes of basis leave `sigma_w^2 I` and therefore `J` unchanged.
pub fn align_to_center(center: &IdentifiedModel, sys: &LqgSystem) -> Result<LqgSystem> {
    let reference = center.to_system(sys.sigma_w(), sys.sigma_z())?;
    if reference.n() != sys.n() || reference.m() != sys.m() || reference.p() != sys.p() {
        return Err(LqgError::Dimension("alignment needs matching dimensions".into()));
    }
    let stack = |s: &LqgSystem| {
        let ctrl = controllability_matrix(s);
        let obs_t = observability_matrix(s).transpose();
        let mut out = DMatrix::zeros(s.n(), ctrl.ncols() + obs_t.ncols());
        out.columns_mut(0, ctrl.ncols()).copy_from(&ctrl);
        out.columns_mut(ctrl.ncols(), obs_t.ncols()).copy_from(&obs_t);
        out
    };
    let target = stack(&reference);
    let source = stack(sys);
    let svd = SVD::new(&target * source.transpose(), true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(LqgError::Numerical("alignment SVD failed".into())),
    };
    let w = u * vt; // W = T^T
    let t = w.transpose();
    sys.with_matrices(&w * sys.a() * &t, &w * sys.b(), sys.c() * &t)
}
