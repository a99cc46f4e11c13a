//! Identification from an exploration trajectory: the input-output
//! regression for the Markov parameters, its least-squares solution, the
//! Ho-Kalman realization, and the high-probability error radii.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LqgError, Result};
use crate::linalg::{serde_matrix, spectral_norm};
use crate::system::{self, build_hankel, LqgSystem, MarkovParams, Trajectory};

/// Below this `sigma_n / sigma_{n+1}` the rank-`n` cut is reported as poorly separated.
pub const SEPARATION_WARN_RATIO: f64 = 10.0;

/// Stacked regressors `U` (`N x Hp`) and targets `Y` (`N x m`).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub n_samples: usize,
    pub horizon: usize,
    pub p: usize,
}

/// Row `k` holds `[u_t^T, u_{t-1}^T, ..., u_{t-H+1}^T]` with `t = H - 1 + k`
/// (0-indexed time) and the matching `y_t`.
pub fn assemble_regression(traj: &Trajectory, horizon: usize) -> Result<RegressionData> {
    if horizon == 0 {
        return Err(LqgError::Parameter("H must be >= 1".into()));
    }
    let len = traj.len();
    if traj.inputs.len() != len {
        return Err(LqgError::Dimension("trajectory inputs and outputs differ in length".into()));
    }
    if len < horizon {
        return Err(LqgError::InsufficientData {
            needed: horizon,
            got: len,
        });
    }
    let p = traj.inputs[0].len();
    let m = traj.outputs[0].len();
    let n_samples = len - horizon + 1;
    let mut u = DMatrix::zeros(n_samples, horizon * p);
    let mut y = DMatrix::zeros(n_samples, m);
    for k in 0..n_samples {
        let t = horizon - 1 + k;
        for j in 0..horizon {
            let ut = &traj.inputs[t - j];
            for c in 0..p {
                u[(k, j * p + c)] = ut[c];
            }
        }
        for c in 0..m {
            y[(k, c)] = traj.outputs[t][c];
        }
    }
    Ok(RegressionData {
        u,
        y,
        n_samples,
        horizon,
        p,
    })
}

/// `G_hat = argmin_X ||Y - U X^T||_F`, solved by a thin QR factorization of `U`.
pub fn least_squares_markov(data: &RegressionData) -> Result<MarkovParams> {
    let cols = data.u.ncols();
    if data.n_samples < cols {
        return Err(LqgError::IllPosedRegression(format!(
            "{} samples for {cols} unknowns per output",
            data.n_samples
        )));
    }
    let qr = data.u.clone().qr();
    let r = qr.r();
    let sv = r.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin <= 1e-8 * smax {
        return Err(LqgError::IllPosedRegression(format!(
            "regressor matrix is rank deficient (sigma_min = {smin:e}, sigma_max = {smax:e})"
        )));
    }
    let qty = qr.q().tr_mul(&data.y);
    let x = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| LqgError::IllPosedRegression("triangular solve failed".into()))?;
    let m = data.y.ncols();
    MarkovParams::new(x.transpose(), data.horizon, m, data.p)
}

/// Balanced order-`n` realization recovered from Markov parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedModel {
    #[serde(with = "serde_matrix")]
    pub a_hat: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub b_hat: DMatrix<f64>,
    #[serde(with = "serde_matrix")]
    pub c_hat: DMatrix<f64>,
    /// All singular values of the truncated Hankel block, descending.
    pub singular_values: Vec<f64>,
    /// `sigma_n / sigma_{n+1}`; infinite when there is no `(n+1)`-th value
    /// or it is zero.
    #[serde(with = "ratio_serde")]
    pub conditioning_ratio: f64,
}

mod ratio_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl IdentifiedModel {
    pub fn order(&self) -> usize {
        self.a_hat.nrows()
    }

    /// Plant with the identified matrices and the given noise scales.
    pub fn to_system(&self, sigma_w: f64, sigma_z: f64) -> Result<LqgSystem> {
        LqgSystem::new(
            self.a_hat.clone(),
            self.b_hat.clone(),
            self.c_hat.clone(),
            sigma_w,
            sigma_z,
        )
    }

    pub fn well_separated(&self) -> bool {
        self.conditioning_ratio >= SEPARATION_WARN_RATIO
    }
}

/// Ho-Kalman realization:
///
/// 1. Hankel matrix `H` (`d1 x (d2+1)` blocks) from `G_hat`;
/// 2. `H-` = first `p d2` columns, `H+` = last `p d2` columns;
/// 3. `N = U S V^T` truncated to rank `n`; `O = U S^{1/2}`, `Ctrl = S^{1/2} V^T`;
/// 4. `C_hat` = first `m` rows of `O`, `B_hat` = first `p` columns of `Ctrl`,
///    `A_hat = O^+ H+ Ctrl^+`.
///
/// Singular vectors are sign-normalized so that the largest-magnitude entry of
/// each left vector is positive; ties at the cut are broken by index order.
pub fn ho_kalman(g_hat: &MarkovParams, n: usize, d1: usize, d2: usize) -> Result<IdentifiedModel> {
    if n == 0 {
        return Err(LqgError::Parameter("model order must be >= 1".into()));
    }
    if g_hat.horizon < 2 * n + 1 || d1 < n || d2 < n {
        return Err(LqgError::Dimension(format!(
            "Ho-Kalman needs H >= 2n+1 and d1, d2 >= n (H={}, n={n}, d1={d1}, d2={d2})",
            g_hat.horizon
        )));
    }
    let hankel = build_hankel(g_hat, d1, d2)?;
    let (m, p) = (g_hat.m, g_hat.p);
    let width = p * d2;
    let h_minus = hankel.data.columns(0, width).into_owned();
    let h_plus = hankel.data.columns(p, width).into_owned();

    let svd = h_minus.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(LqgError::Numerical("SVD failed".into())),
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if singular_values.len() < n {
        return Err(LqgError::OrderDeficiency { order: n, sigma_n: 0.0 });
    }
    let sigma_n = singular_values[n - 1];
    if !(sigma_n >= 1e-10) {
        return Err(LqgError::OrderDeficiency { order: n, sigma_n });
    }
    let conditioning_ratio = match singular_values.get(n) {
        Some(&next) if next > 0.0 => sigma_n / next,
        _ => f64::INFINITY,
    };
    if conditioning_ratio < SEPARATION_WARN_RATIO {
        log::warn!("rank-{n} cut poorly separated: sigma_n/sigma_(n+1) = {conditioning_ratio:.3}");
    }

    let rows = u.nrows();
    let mut obs = DMatrix::zeros(rows, n);
    let mut ctrl = DMatrix::zeros(n, width);
    let mut obs_pinv = DMatrix::zeros(n, rows);
    let mut ctrl_pinv = DMatrix::zeros(width, n);
    for (k, &idx) in order.iter().take(n).enumerate() {
        let s = svd.singular_values[idx];
        let root = s.sqrt();
        let mut left: DVector<f64> = u.column(idx).into_owned();
        let mut right: DVector<f64> = vt.row(idx).transpose();
        let pivot = left.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            left = -left;
            right = -right;
        }
        obs.set_column(k, &(&left * root));
        ctrl.set_row(k, &(&right * root).transpose());
        obs_pinv.set_row(k, &(&left / root).transpose());
        ctrl_pinv.set_column(k, &(&right / root));
    }

    let c_hat = obs.rows(0, m).into_owned();
    let b_hat = ctrl.columns(0, p).into_owned();
    let a_hat = obs_pinv * h_plus * ctrl_pinv;
    Ok(IdentifiedModel {
        a_hat,
        b_hat,
        c_hat,
        singular_values,
        conditioning_ratio,
    })
}

/// Markov parameters regenerated from an identified realization.
pub fn regenerate_markov(model: &IdentifiedModel, horizon: usize) -> Result<MarkovParams> {
    let sys = model.to_system(0.0, 0.0)?;
    system::markov_parameters(&sys, horizon)
}

/// System quantities entering the noise terms. In oracle mode they come from
/// the true plant; in plug-in mode from the identified model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemStatistics {
    /// `||F||` for the process-noise Markov matrix.
    pub f_norm: f64,
    /// Effective standard deviation of the truncation term.
    pub sigma_e: f64,
    /// `rho(A)`
    pub rho_a: f64,
}

impl SystemStatistics {
    /// `sigma_e = Phi(A) ||C A^{H-1}|| sqrt(H ||Gamma_inf|| / (1 - rho(A)^{2H}))`.
    pub fn from_system(sys: &LqgSystem, horizon: usize, sigma_u: f64) -> Result<Self> {
        let f = system::noise_markov_parameters(sys, horizon)?;
        let rho_a = system::spectral_radius(sys.a())?;
        let phi = system::phi_of_a(sys.a(), system::DEFAULT_TAU_MAX)?;
        let gamma = system::steady_state_covariance(sys, sigma_u)?;
        let mut ca = sys.c().clone();
        for _ in 0..horizon.saturating_sub(1) {
            ca = ca * sys.a();
        }
        let denom = 1.0 - rho_a.powi(2 * horizon as i32);
        let sigma_e = phi * spectral_norm(&ca) * (horizon as f64 * spectral_norm(&gamma) / denom).sqrt();
        Ok(SystemStatistics {
            f_norm: spectral_norm(&f),
            sigma_e,
            rho_a,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTermConfig {
    pub horizon: usize,
    /// Regression sample count `N = T_exp - H + 1`.
    pub n_samples: usize,
    pub t_exp: usize,
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub delta: f64,
    pub sigma_w: f64,
    pub sigma_z: f64,
    pub c: f64,
    pub c_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBoundTerms {
    pub r_w: f64,
    pub r_e: f64,
    pub r_z: f64,
    pub sigma_e: f64,
    pub n_w: f64,
    pub c: f64,
    pub c_prime: f64,
}

impl NoiseBoundTerms {
    pub fn total(&self) -> f64 {
        self.r_w + self.r_e + self.r_z
    }
}

/// ```text
/// R_z = 4 sigma_z (sqrt(Hp + m) + sqrt(log(1/delta)))
/// R_w = sigma_w ||F|| max(sqrt(N_w), N_w / sqrt(N))
/// N_w = c H (p+n) log^2(2H(p+n)) log^2(2 T_exp (p+n))
/// R_e = c' sigma_e sqrt(log(H/delta) max(1, H(3m + log(H/delta)) / (N (1 - rho^H))))
/// ```
pub fn noise_terms(stats: &SystemStatistics, cfg: &NoiseTermConfig) -> Result<NoiseBoundTerms> {
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(LqgError::Parameter(format!("delta must lie in (0,1), got {}", cfg.delta)));
    }
    if cfg.n_samples == 0 || cfg.horizon == 0 {
        return Err(LqgError::Parameter("N and H must be >= 1".into()));
    }
    if !(cfg.c > 0.0 && cfg.c_prime > 0.0) {
        return Err(LqgError::Parameter("constants c, c' must be positive".into()));
    }
    let h = cfg.horizon as f64;
    let big_n = cfg.n_samples as f64;
    let pn = (cfg.p + cfg.n) as f64;
    let log_inv_delta = (1.0 / cfg.delta).ln();

    let r_z = 4.0 * cfg.sigma_z * ((h * cfg.p as f64 + cfg.m as f64).sqrt() + log_inv_delta.sqrt());

    let n_w = cfg.c * h * pn * (2.0 * h * pn).ln().powi(2) * (2.0 * cfg.t_exp as f64 * pn).ln().powi(2);
    let r_w = cfg.sigma_w * stats.f_norm * n_w.sqrt().max(n_w / big_n.sqrt());

    let log_h_delta = (h / cfg.delta).ln();
    let decay = 1.0 - stats.rho_a.powi(cfg.horizon as i32);
    let ratio = h * (3.0 * cfg.m as f64 + log_h_delta) / (big_n * decay);
    let r_e = cfg.c_prime * stats.sigma_e * (log_h_delta * ratio.max(1.0)).sqrt();

    Ok(NoiseBoundTerms {
        r_w,
        r_e,
        r_z,
        sigma_e: stats.sigma_e,
        n_w,
        c: cfg.c,
        c_prime: cfg.c_prime,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiiMode {
    /// Statistics from the true plant (controlled experiments only).
    #[default]
    Oracle,
    /// Statistics substituted from the identified model.
    PlugIn,
}

impl std::str::FromStr for RadiiMode {
    type Err = LqgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(RadiiMode::Oracle),
            "plug_in" | "plug-in" => Ok(RadiiMode::PlugIn),
            other => Err(LqgError::Parameter(format!("unknown radii mode '{other}'"))),
        }
    }
}

/// Spectral norm and `n`-th singular value of the Hankel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HankelStats {
    pub norm: f64,
    pub sigma_n: f64,
}

impl HankelStats {
    pub fn from_markov(g: &MarkovParams, n: usize, d1: usize, d2: usize) -> Result<Self> {
        let (norm, sigma_n) = build_hankel(g, d1, d2)?.norm_and_sigma_n(n);
        Ok(HankelStats { norm, sigma_n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRadii {
    /// Bound on `||G_hat - G||`.
    pub g_radius: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub beta_c: f64,
    pub mode: RadiiMode,
}

impl ConfidenceRadii {
    pub fn zero(mode: RadiiMode) -> Self {
        ConfidenceRadii {
            g_radius: 0.0,
            beta_a: 0.0,
            beta_b: 0.0,
            beta_c: 0.0,
            mode,
        }
    }

    /// Every radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ConfidenceRadii {
            g_radius: self.g_radius * factor,
            beta_a: self.beta_a * factor,
            beta_b: self.beta_b * factor,
            beta_c: self.beta_c * factor,
            mode: self.mode,
        }
    }
}

/// ```text
/// g      = (R_w + R_e + R_z) / (sigma_u sqrt(T_exp - H + 1))
/// beta_A = (31 n ||H|| + 7 n sigma_n(H)) / sigma_n(H)^2 * g
/// beta_B = beta_C = 7 n (R_w + R_e + R_z) / (sigma_u sqrt(sigma_n(H) (T_exp - H + 1)))
/// ```
pub fn confidence_radii(
    terms: &NoiseBoundTerms,
    hankel: &HankelStats,
    n: usize,
    t_exp: usize,
    horizon: usize,
    sigma_u: f64,
    mode: RadiiMode,
) -> Result<ConfidenceRadii> {
    if !(hankel.sigma_n > 0.0) {
        return Err(LqgError::Rank(format!(
            "Hankel sigma_n must be positive, got {}",
            hankel.sigma_n
        )));
    }
    if t_exp < horizon {
        return Err(LqgError::InsufficientData {
            needed: horizon,
            got: t_exp,
        });
    }
    if !(sigma_u > 0.0) {
        return Err(LqgError::Parameter("sigma_u must be positive".into()));
    }
    let samples = (t_exp - horizon + 1) as f64;
    let nf = n as f64;
    let total = terms.total();
    let g_radius = total / (sigma_u * samples.sqrt());
    let sn = hankel.sigma_n;
    let beta_a = (31.0 * nf * hankel.norm + 7.0 * nf * sn) / (sn * sn) * g_radius;
    let beta_bc = 7.0 * nf * total / (sigma_u * (sn * samples).sqrt());
    Ok(ConfidenceRadii {
        g_radius,
        beta_a,
        beta_b: beta_bc,
        beta_c: beta_bc,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn traj_from(inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Trajectory {
        Trajectory {
            inputs: inputs.into_iter().map(DVector::from_vec).collect(),
            outputs: outputs.into_iter().map(DVector::from_vec).collect(),
            states: None,
        }
    }

    #[test]
    fn regression_scalar_example() {
        let t = traj_from(vec![vec![1.0], vec![2.0], vec![3.0]], vec![vec![0.0]; 3]);
        let d = assemble_regression(&t, 2).unwrap();
        assert_eq!(d.n_samples, 2);
        assert_eq!(d.u, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 3.0, 2.0]));
        let d = assemble_regression(&t, 3).unwrap();
        assert_eq!(d.n_samples, 1);
        assert!(matches!(
            assemble_regression(&t, 4),
            Err(LqgError::InsufficientData { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn regression_block_reversal() {
        // p = 2, H = 3, T_exp = 5; u_t = [10t, 10t + 1]
        let inputs: Vec<Vec<f64>> = (0..5).map(|t| vec![10.0 * t as f64, 10.0 * t as f64 + 1.0]).collect();
        let outputs: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64]).collect();
        let d = assemble_regression(&traj_from(inputs, outputs), 3).unwrap();
        assert_eq!(d.u.shape(), (3, 6));
        let expected = DMatrix::from_row_slice(
            3,
            6,
            &[
                20.0, 21.0, 10.0, 11.0, 0.0, 1.0, //
                30.0, 31.0, 20.0, 21.0, 10.0, 11.0, //
                40.0, 41.0, 30.0, 31.0, 20.0, 21.0,
            ],
        );
        assert_eq!(d.u, expected);
        assert_eq!(d.y.as_slice(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn least_squares_rejects_underdetermined() {
        let t = traj_from(vec![vec![1.0], vec![2.0], vec![3.0]], vec![vec![0.0]; 3]);
        let d = assemble_regression(&t, 3).unwrap();
        assert!(matches!(least_squares_markov(&d), Err(LqgError::IllPosedRegression(_))));
        let flat = traj_from(vec![vec![1.0]; 6], vec![vec![0.0]; 6]);
        let d = assemble_regression(&flat, 2).unwrap();
        assert!(matches!(least_squares_markov(&d), Err(LqgError::IllPosedRegression(_))));
    }

    #[test]
    fn ho_kalman_scalar_exact() {
        let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let g = system::markov_parameters(&sys, 3).unwrap();
        let id = ho_kalman(&g, 1, 1, 1).unwrap();
        assert!((id.a_hat[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((id.b_hat[(0, 0)] * id.c_hat[(0, 0)] - 1.0).abs() < 1e-14);
        assert!(id.c_hat[(0, 0)] > 0.0);
        assert!(id.conditioning_ratio.is_infinite());
    }

    #[test]
    fn ho_kalman_order_checks() {
        let sys = LqgSystem::scalar(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let g = system::markov_parameters(&sys, 5).unwrap();
        assert!(matches!(ho_kalman(&g, 2, 2, 2), Err(LqgError::OrderDeficiency { .. })));
        assert!(matches!(ho_kalman(&g, 3, 2, 2), Err(LqgError::Dimension(_))));
    }

    #[test]
    fn noise_term_examples() {
        let stats = SystemStatistics {
            f_norm: 1.0,
            sigma_e: 0.0,
            rho_a: 0.5,
        };
        let cfg = NoiseTermConfig {
            horizon: 2,
            n_samples: 100,
            t_exp: 101,
            m: 1,
            p: 1,
            n: 1,
            delta: 0.1,
            sigma_w: 1.0,
            sigma_z: 1.0,
            c: 1.0,
            c_prime: 1.0,
        };
        let t = noise_terms(&stats, &cfg).unwrap();
        let expected = 4.0 * (3f64.sqrt() + 10f64.ln().sqrt());
        assert!((t.r_z - expected).abs() < 1e-12);
        assert!((t.r_z - 12.9979).abs() < 1e-4);
        assert_eq!(t.r_e, 0.0);

        let bad = NoiseTermConfig { delta: 1.0, ..cfg };
        assert!(matches!(noise_terms(&stats, &bad), Err(LqgError::Parameter(_))));
    }

    #[test]
    fn sigma_e_vanishes_for_nilpotent() {
        let sys = LqgSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            1.0,
            1.0,
        )
        .unwrap();
        let s = SystemStatistics::from_system(&sys, 3, 1.0).unwrap();
        assert_eq!(s.sigma_e, 0.0);
    }

    #[test]
    fn r_w_branches() {
        let stats = SystemStatistics {
            f_norm: 2.0,
            sigma_e: 1.0,
            rho_a: 0.5,
        };
        let base = NoiseTermConfig {
            horizon: 3,
            n_samples: 1,
            t_exp: 1000,
            m: 1,
            p: 1,
            n: 1,
            delta: 0.05,
            sigma_w: 1.0,
            sigma_z: 1.0,
            c: 1.0,
            c_prime: 1.0,
        };
        let nw = noise_terms(&stats, &base).unwrap().n_w;
        // N >= N_w: sqrt branch, independent of N
        let big = |n| noise_terms(&stats, &NoiseTermConfig { n_samples: n, ..base }).unwrap().r_w;
        let at = nw.ceil() as usize;
        assert!((big(at) - 2.0 * nw.sqrt()).abs() < 1e-9);
        assert!((big(2 * at) - big(at)).abs() < 1e-12);
        // N < N_w: N_w / sqrt(N) branch, continuous at the switch
        let small = big(at / 4);
        assert!((small - 2.0 * nw / ((at / 4) as f64).sqrt()).abs() < 1e-9);
        assert!(small > big(at));
    }

    #[test]
    fn radii_identities() {
        let terms = NoiseBoundTerms {
            r_w: 3.0,
            r_e: 1.0,
            r_z: 2.0,
            sigma_e: 1.0,
            n_w: 1.0,
            c: 1.0,
            c_prime: 1.0,
        };
        let hs = HankelStats {
            norm: 1.5,
            sigma_n: 1.5,
        };
        let r1 = confidence_radii(&terms, &hs, 1, 102, 3, 1.0, RadiiMode::Oracle).unwrap();
        let r4 = confidence_radii(&terms, &hs, 1, 402, 3, 1.0, RadiiMode::Oracle).unwrap();
        assert_eq!(r1.beta_b, r1.beta_c);
        for (a, b) in [
            (r1.g_radius, r4.g_radius),
            (r1.beta_a, r4.beta_a),
            (r1.beta_b, r4.beta_b),
        ] {
            assert!((a / b - 2.0).abs() < 1e-12);
        }
        assert!((r1.beta_a / r1.g_radius - 38.0 / 1.5).abs() < 1e-12);
        let bad = HankelStats { norm: 1.0, sigma_n: 0.0 };
        assert!(matches!(
            confidence_radii(&terms, &bad, 1, 102, 3, 1.0, RadiiMode::Oracle),
            Err(LqgError::Rank(_))
        ));
    }
}
