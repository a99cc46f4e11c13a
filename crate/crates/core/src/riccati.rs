//! Control and filter Riccati equations, the LQR and Kalman gains, and the
//! optimal average stage cost `J*` of a model.
//!
//! Both equations are instances of
//!
//! ```text
//! X = A^T X A - A^T X B (R + B^T X B)^{-1} B^T X A + Q
//! ```
//!
//! (the filter equation with `A -> A^T`, `B -> C^T`, `Q -> sigma_w^2 I`,
//! `R -> sigma_z^2 I`). The solver runs a structured doubling iteration and
//! polishes the result with plain fixed-point steps of the Riccati map; if
//! doubling breaks down it falls back to fixed-point iteration from `X_0 = Q`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LqgError, Result};
use crate::linalg::{self, serde_matrix, spectral_norm, spectral_radius};
use crate::system::{self, CostParams, LqgSystem};

/// Absolute residual accepted on return.
pub const DARE_ACCEPT_TOL: f64 = 1e-10;
const DARE_TARGET_TOL: f64 = 1e-12;
const DARE_MAX_ITER: usize = 100_000;
const DOUBLING_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ControllerSynthesis {
    #[serde(with = "serde_matrix")]
    pub P: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub K: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub Sigma: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub Sigma_bar: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub L: DMatrix<f64>,
    pub J_star: f64,
    /// `rho(A - B K)`
    pub closed_loop_control_radius: f64,
    /// `rho(A - A L C)`
    pub closed_loop_filter_radius: f64,
    pub control_residual: f64,
    pub filter_residual: f64,
}

fn invert(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = linalg::symmetrize(m);
    if let Some(ch) = sym.clone().cholesky() {
        return Ok(ch.inverse());
    }
    sym.try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| LqgError::Numerical(format!("singular {what}")))
}

/// One application of the Riccati map.
fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let at = a.transpose();
    let xb = x * b;
    let gain_inv = invert(&(r + b.transpose() * &xb), "R + B^T X B")?;
    let atxb = &at * &xb;
    let next = &at * x * a - &atxb * gain_inv * atxb.transpose() + q;
    Ok(linalg::symmetrize(&next))
}

fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Result<f64> {
    Ok(spectral_norm(&(x - riccati_map(a, b, q, r, x)?)))
}

fn doubling(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let r_inv = invert(r, "R").ok()?;
    let mut ak = a.clone();
    let mut gk = b * r_inv * b.transpose();
    let mut hk = q.clone();
    for _ in 0..DOUBLING_MAX_ITER {
        let w = (&eye + &gk * &hk).lu();
        let w_a = w.solve(&ak)?;
        let w_g = w.solve(&gk)?;
        let a_next = &ak * &w_a;
        let g_next = linalg::symmetrize(&(&gk + &ak * w_g * ak.transpose()));
        let h_next = linalg::symmetrize(&(&hk + ak.transpose() * &hk * &w_a));
        if h_next.iter().chain(a_next.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        let delta = (&h_next - &hk).norm();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if delta <= 1e-15 * hk.norm().max(1.0) {
            return Some(hk);
        }
    }
    Some(hk)
}

/// Solves `X = A^T X A - A^T X B (R + B^T X B)^{-1} B^T X A + Q` for the
/// stabilizing PSD solution. Returns the solution and its residual.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let tol = |x: &DMatrix<f64>| DARE_TARGET_TOL * spectral_norm(x).max(1.0);

    if let Some(mut x) = doubling(a, b, q, r) {
        let mut residual = dare_residual(a, b, q, r, &x)?;
        for _ in 0..50 {
            if residual <= tol(&x) {
                break;
            }
            let next = riccati_map(a, b, q, r, &x)?;
            let next_res = dare_residual(a, b, q, r, &next)?;
            if next_res >= residual {
                break;
            }
            x = next;
            residual = next_res;
        }
        if residual <= DARE_ACCEPT_TOL && linalg::min_sym_eigenvalue(&x) >= -1e-9 {
            return Ok((x, residual));
        }
    }

    let mut x = linalg::symmetrize(q);
    let mut residual = f64::INFINITY;
    for _ in 0..DARE_MAX_ITER {
        let next = riccati_map(a, b, q, r, &x)?;
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        residual = spectral_norm(&(&next - &x));
        x = next;
        if residual <= tol(&x) {
            return Ok((x, residual));
        }
    }
    if residual <= DARE_ACCEPT_TOL {
        return Ok((x, residual));
    }
    Err(LqgError::Convergence {
        what: "Riccati iteration".into(),
        iterations: DARE_MAX_ITER,
        residual,
    })
}

/// Control Riccati equation with state weight `C^T Q C`.
pub fn solve_control_dare(sys: &LqgSystem, cost: &CostParams) -> Result<DMatrix<f64>> {
    Ok(solve_control_dare_with_residual(sys, cost)?.0)
}

fn solve_control_dare_with_residual(sys: &LqgSystem, cost: &CostParams) -> Result<(DMatrix<f64>, f64)> {
    cost.check_dims(sys)?;
    let ctqc = linalg::symmetrize(&(sys.c().transpose() * cost.q() * sys.c()));
    solve_dare(sys.a(), sys.b(), &ctqc, cost.r())
}

/// `||P - (A^T P A + C^T Q C - A^T P B (R + B^T P B)^{-1} B^T P A)||_2`
pub fn control_dare_residual(sys: &LqgSystem, cost: &CostParams, p: &DMatrix<f64>) -> Result<f64> {
    let ctqc = sys.c().transpose() * cost.q() * sys.c();
    dare_residual(sys.a(), sys.b(), &ctqc, cost.r(), p)
}

/// `||Sigma - (A Sigma A^T - A Sigma C^T (C Sigma C^T + sigma_z^2 I)^{-1} C Sigma A^T + sigma_w^2 I)||_2`
pub fn filter_dare_residual(sys: &LqgSystem, sigma: &DMatrix<f64>) -> Result<f64> {
    let (q, r) = filter_weights(sys);
    dare_residual(&sys.a().transpose(), &sys.c().transpose(), &q, &r, sigma)
}

fn filter_weights(sys: &LqgSystem) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (sys.n(), sys.m());
    (
        DMatrix::identity(n, n) * sys.sigma_w().powi(2),
        DMatrix::identity(m, m) * sys.sigma_z().powi(2),
    )
}

/// `K = (R + B^T P B)^{-1} B^T P A`
pub fn lqr_gain(sys: &LqgSystem, cost: &CostParams, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cost.check_dims(sys)?;
    let bt = sys.b().transpose();
    let lhs = cost.r() + &bt * p * sys.b();
    let rhs = &bt * p * sys.a();
    lhs.lu()
        .solve(&rhs)
        .filter(|k| k.iter().all(|v| v.is_finite()))
        .ok_or_else(|| LqgError::Numerical("singular R + B^T P B".into()))
}

/// Filter Riccati solution `Sigma` (one-step predictive error covariance), the
/// posterior covariance `Sigma_bar` and the Kalman gain
/// `L = Sigma C^T (C Sigma C^T + sigma_z^2 I)^{-1}`.
pub fn solve_filter_dare(sys: &LqgSystem) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    Ok(solve_filter_dare_with_residual(sys)?.0)
}

#[allow(clippy::type_complexity)]
fn solve_filter_dare_with_residual(
    sys: &LqgSystem,
) -> Result<((DMatrix<f64>, DMatrix<f64>, DMatrix<f64>), f64)> {
    if sys.sigma_z() <= 0.0 {
        return Err(LqgError::Parameter(
            "filter synthesis needs sigma_z > 0".into(),
        ));
    }
    let (q, r) = filter_weights(sys);
    let (sigma, residual) = solve_dare(&sys.a().transpose(), &sys.c().transpose(), &q, &r)?;
    let c = sys.c();
    let innov = c * &sigma * c.transpose() + &r;
    let innov_inv = invert(&innov, "innovation covariance")?;
    let l = &sigma * c.transpose() * &innov_inv;
    let sigma_bar = linalg::symmetrize(&(&sigma - &sigma * c.transpose() * &innov_inv * c * &sigma));
    Ok(((sigma, sigma_bar, l), residual))
}

/// `J* = Tr(C^T Q C Sigma_bar) + Tr(P (Sigma - Sigma_bar)) + sigma_z^2 Tr(Q)`
pub fn average_cost(sys: &LqgSystem, cost: &CostParams, synth: &ControllerSynthesis) -> f64 {
    let ctqc = sys.c().transpose() * cost.q() * sys.c();
    (ctqc * &synth.Sigma_bar).trace()
        + (&synth.P * (&synth.Sigma - &synth.Sigma_bar)).trace()
        + sys.sigma_z().powi(2) * cost.q().trace()
}

/// Full controller for a model: both Riccati solutions, both gains, `J*`
/// and the two closed-loop spectral radii. Fails with a feasibility error if
/// the model is uncontrollable, unobservable, or either closed loop has
/// spectral radius `>= 1`.
pub fn synthesize(sys: &LqgSystem, cost: &CostParams) -> Result<ControllerSynthesis> {
    cost.check_dims(sys)?;
    if !system::is_controllable(sys, system::DEFAULT_RANK_TOL) {
        return Err(LqgError::Feasibility("model is not controllable".into()));
    }
    if !system::is_observable(sys, system::DEFAULT_RANK_TOL) {
        return Err(LqgError::Feasibility("model is not observable".into()));
    }
    let (p, control_residual) = solve_control_dare_with_residual(sys, cost)?;
    let k = lqr_gain(sys, cost, &p)?;
    let ((sigma, sigma_bar, l), filter_residual) = solve_filter_dare_with_residual(sys)?;
    let a = sys.a();
    let closed_loop_control_radius = spectral_radius(&(a - sys.b() * &k))?;
    let closed_loop_filter_radius = spectral_radius(&(a - a * &l * sys.c()))?;
    if closed_loop_control_radius >= 1.0 || closed_loop_filter_radius >= 1.0 {
        return Err(LqgError::Feasibility(format!(
            "model is not contractible (rho(A-BK) = {closed_loop_control_radius:.6}, \
             rho(A-ALC) = {closed_loop_filter_radius:.6})"
        )));
    }
    let mut synth = ControllerSynthesis {
        P: p,
        K: k,
        Sigma: sigma,
        Sigma_bar: sigma_bar,
        L: l,
        J_star: 0.0,
        closed_loop_control_radius,
        closed_loop_filter_radius,
        control_residual,
        filter_residual,
    };
    synth.J_star = average_cost(sys, cost, &synth);
    Ok(synth)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P_SCALAR: f64 = 1.132_782_218_537_318_7;

    fn scalar_cost() -> CostParams {
        CostParams::identity(1, 1)
    }

    fn p_oracle() -> f64 {
        // P^2 - 0.25 P - 1 = 0
        (0.25 + 4.0625f64.sqrt()) / 2.0
    }

    #[test]
    fn oracle_constant_is_consistent() {
        assert!((p_oracle() - P_SCALAR).abs() < 1e-15);
    }

    #[test]
    fn control_dare_scalar_cases() {
        let zero = LqgSystem::scalar(0.0, 2.0, 1.0, 1.0, 1.0).unwrap();
        let p = solve_control_dare(&zero, &scalar_cost()).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(lqr_gain(&zero, &scalar_cost(), &p).unwrap()[(0, 0)], 0.0);

        let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let p = solve_control_dare(&sys, &scalar_cost()).unwrap();
        assert!((p[(0, 0)] - p_oracle()).abs() < 1e-12);
        let k = lqr_gain(&sys, &scalar_cost(), &p).unwrap()[(0, 0)];
        let k_oracle = p_oracle() * 0.5 / (1.0 + p_oracle());
        assert!((k - k_oracle).abs() < 1e-12);
        assert!((k - 0.265_564_4).abs() < 1e-7);
        assert!((0.5 - k - 0.2344).abs() < 1e-4);
    }

    #[test]
    fn filter_dare_scalar_cases() {
        let zero = LqgSystem::scalar(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (s, sb, l) = solve_filter_dare(&zero).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((sb[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((l[(0, 0)] - 0.5).abs() < 1e-14);

        let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let (s, _, l) = solve_filter_dare(&sys).unwrap();
        assert!((s[(0, 0)] - p_oracle()).abs() < 1e-12);
        assert!((l[(0, 0)] - p_oracle() / (p_oracle() + 1.0)).abs() < 1e-12);
        assert!((l[(0, 0)] - 0.531_128_9).abs() < 1e-7);
        // duality for this parameterization
        let p = solve_control_dare(&sys, &scalar_cost()).unwrap();
        assert!((p[(0, 0)] - s[(0, 0)]).abs() < 1e-12);
    }

    #[test]
    fn average_cost_cases() {
        let zero = LqgSystem::scalar(0.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = synthesize(&zero, &scalar_cost()).unwrap();
        assert!((s.J_star - 2.0).abs() < 1e-12);
        assert_eq!(s.K[(0, 0)], 0.0);
        assert!((s.P[(0, 0)] - 1.0).abs() < 1e-14);

        let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = synthesize(&sys, &scalar_cost()).unwrap();
        let pv = p_oracle();
        let sb = pv / (pv + 1.0);
        let expected = sb + pv * (pv - sb) + 1.0;
        assert!((s.J_star - expected).abs() < 1e-12);
        assert!((s.J_star - 2.212_671_1).abs() < 1e-6);

        // sigma_z -> 0 with A = 0: Sigma_bar -> 0, J* -> P sigma_w^2 = 1
        let quiet = LqgSystem::scalar(0.0, 1.0, 1.0, 1.0, 1e-6).unwrap();
        let s = synthesize(&quiet, &scalar_cost()).unwrap();
        assert!((s.J_star - 1.0).abs() < 1e-9);
    }

    #[test]
    fn synthesize_rejects_unobservable() {
        let sys = LqgSystem::scalar(0.5, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            synthesize(&sys, &scalar_cost()),
            Err(LqgError::Feasibility(_))
        ));
    }

    #[test]
    fn synthesize_rejects_dimension_mismatch() {
        let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            synthesize(&sys, &CostParams::identity(2, 1)),
            Err(LqgError::Dimension(_))
        ));
    }

    #[test]
    fn unstable_open_loop_is_stabilized() {
        let sys = LqgSystem::scalar(1.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = synthesize(&sys, &scalar_cost()).unwrap();
        assert!(s.closed_loop_control_radius < 1.0);
        assert!(s.closed_loop_filter_radius < 1.0);
        assert!(s.control_residual <= DARE_ACCEPT_TOL);
    }

    #[test]
    fn synthesis_json_round_trip() {
        let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let s = synthesize(&sys, &scalar_cost()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: ControllerSynthesis = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
