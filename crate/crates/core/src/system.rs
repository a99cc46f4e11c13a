//! The partially observable linear plant
//!
//! ```text
//! x_{t+1} = A x_t + B u_t + w_t,   w_t ~ N(0, sigma_w^2 I)
//! y_t     = C x_t + z_t,           z_t ~ N(0, sigma_z^2 I)
//! ```
//!
//! together with its impulse response (Markov parameters), block-Hankel
//! rearrangement and the structural quantities used by identification.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LqgError, Result};
use crate::linalg::{self, gaussian_vector, serde_matrix, spectral_norm};

pub use crate::linalg::spectral_radius;

/// Relative singular-value tolerance for controllability/observability rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Window used to approximate the supremum in `phi_of_a`.
pub const DEFAULT_TAU_MAX: usize = 200;

const LYAPUNOV_TOL: f64 = 1e-12;
const LYAPUNOV_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LqgSystemRepr", into = "LqgSystemRepr")]
pub struct LqgSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    sigma_w: f64,
    sigma_z: f64,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct LqgSystemRepr {
    n: usize,
    m: usize,
    p: usize,
    A: Vec<Vec<f64>>,
    B: Vec<Vec<f64>>,
    C: Vec<Vec<f64>>,
    sigma_w: f64,
    sigma_z: f64,
}

impl From<LqgSystem> for LqgSystemRepr {
    fn from(s: LqgSystem) -> Self {
        LqgSystemRepr {
            n: s.n(),
            m: s.m(),
            p: s.p(),
            A: serde_matrix::to_rows(&s.a),
            B: serde_matrix::to_rows(&s.b),
            C: serde_matrix::to_rows(&s.c),
            sigma_w: s.sigma_w,
            sigma_z: s.sigma_z,
        }
    }
}

impl TryFrom<LqgSystemRepr> for LqgSystem {
    type Error = LqgError;

    fn try_from(r: LqgSystemRepr) -> Result<Self> {
        let parse = |rows: &[Vec<f64>], name: &str, nr: usize, nc: usize| {
            let m = serde_matrix::from_rows(rows, nc)
                .map_err(|e| LqgError::Dimension(format!("{name}: {e}")))?;
            if m.nrows() != nr || m.ncols() != nc {
                return Err(LqgError::Dimension(format!(
                    "{name} is {}x{}, declared {nr}x{nc}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Ok(m)
        };
        let a = parse(&r.A, "A", r.n, r.n)?;
        let b = parse(&r.B, "B", r.n, r.p)?;
        let c = parse(&r.C, "C", r.m, r.n)?;
        LqgSystem::new(a, b, c, r.sigma_w, r.sigma_z)
    }
}

impl LqgSystem {
    /// Validates dimensions and finiteness. Noise scales must be nonnegative;
    /// zero noise is allowed for deterministic experiments, but filter
    /// synthesis needs `sigma_z > 0`.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        sigma_w: f64,
        sigma_z: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(LqgError::Dimension(format!(
                "A must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(LqgError::Dimension(format!(
                "B must be {n}xp with p >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(LqgError::Dimension(format!(
                "C must be mx{n} with m >= 1, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        for (name, mat) in [("A", &a), ("B", &b), ("C", &c)] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(LqgError::NonFinite(name.into()));
            }
        }
        if !(sigma_w.is_finite() && sigma_w >= 0.0) || !(sigma_z.is_finite() && sigma_z >= 0.0) {
            return Err(LqgError::Parameter(format!(
                "noise scales must be finite and nonnegative (sigma_w={sigma_w}, sigma_z={sigma_z})"
            )));
        }
        Ok(LqgSystem {
            a,
            b,
            c,
            sigma_w,
            sigma_z,
        })
    }

    /// Scalar plant `(a, b, c)`.
    pub fn scalar(a: f64, b: f64, c: f64, sigma_w: f64, sigma_z: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            sigma_w,
            sigma_z,
        )
    }

    /// Same noise scales, different dynamics.
    pub fn with_matrices(&self, a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        Self::new(a, b, c, self.sigma_w, self.sigma_z)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn sigma_w(&self) -> f64 {
        self.sigma_w
    }
    pub fn sigma_z(&self) -> f64 {
        self.sigma_z
    }
    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Output dimension.
    pub fn m(&self) -> usize {
        self.c.nrows()
    }
    /// Input dimension.
    pub fn p(&self) -> usize {
        self.b.ncols()
    }
}

/// Quadratic stage-cost weights `y^T Q y + u^T R u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostParamsRepr", into = "CostParamsRepr")]
pub struct CostParams {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct CostParamsRepr {
    Q: Vec<Vec<f64>>,
    R: Vec<Vec<f64>>,
}

impl From<CostParams> for CostParamsRepr {
    fn from(c: CostParams) -> Self {
        CostParamsRepr {
            Q: serde_matrix::to_rows(&c.q),
            R: serde_matrix::to_rows(&c.r),
        }
    }
}

impl TryFrom<CostParamsRepr> for CostParams {
    type Error = LqgError;
    fn try_from(r: CostParamsRepr) -> Result<Self> {
        let q = serde_matrix::from_rows(&r.Q, 0).map_err(|e| LqgError::Dimension(format!("Q: {e}")))?;
        let rr = serde_matrix::from_rows(&r.R, 0).map_err(|e| LqgError::Dimension(format!("R: {e}")))?;
        CostParams::new(q, rr)
    }
}

impl CostParams {
    /// `Q` must be PSD (min eigenvalue >= -1e-10) and `R` PD; both are symmetrized.
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        linalg::require_square(&q, "Q")?;
        linalg::require_square(&r, "R")?;
        if q.is_empty() || r.is_empty() {
            return Err(LqgError::Dimension("Q and R must be nonempty".into()));
        }
        if q.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(LqgError::NonFinite("cost matrices".into()));
        }
        let q = linalg::symmetrize(&q);
        let r = linalg::symmetrize(&r);
        if linalg::min_sym_eigenvalue(&q) < -1e-10 {
            return Err(LqgError::Parameter("Q must be positive semidefinite".into()));
        }
        if linalg::min_sym_eigenvalue(&r) <= 0.0 {
            return Err(LqgError::Parameter("R must be positive definite".into()));
        }
        Ok(CostParams { q, r })
    }

    pub fn identity(m: usize, p: usize) -> Self {
        CostParams {
            q: DMatrix::identity(m, m),
            r: DMatrix::identity(p, p),
        }
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub(crate) fn check_dims(&self, sys: &LqgSystem) -> Result<()> {
        if self.q.nrows() != sys.m() || self.r.nrows() != sys.p() {
            return Err(LqgError::Dimension(format!(
                "cost is Q {}x{}, R {}x{} but system has m={}, p={}",
                self.q.nrows(),
                self.q.ncols(),
                self.r.nrows(),
                self.r.ncols(),
                sys.m(),
                sys.p()
            )));
        }
        Ok(())
    }
}

/// Length-`H` impulse response `G = [0, CB, CAB, ..., CA^{H-2}B]`, an
/// `m x (H p)` matrix of `m x p` blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovParams {
    #[serde(with = "serde_matrix")]
    pub g: DMatrix<f64>,
    pub horizon: usize,
    pub m: usize,
    pub p: usize,
}

impl MarkovParams {
    pub fn new(g: DMatrix<f64>, horizon: usize, m: usize, p: usize) -> Result<Self> {
        if horizon == 0 || g.nrows() != m || g.ncols() != horizon * p {
            return Err(LqgError::Dimension(format!(
                "Markov matrix is {}x{}, expected {m}x{}",
                g.nrows(),
                g.ncols(),
                horizon * p
            )));
        }
        Ok(MarkovParams { g, horizon, m, p })
    }

    /// Block `i`, 1-indexed as in `G = [G_1 ... G_H]`.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        assert!(i >= 1 && i <= self.horizon, "block index {i} out of range");
        self.g.columns((i - 1) * self.p, self.p).into_owned()
    }

    /// Spectral norm of `G`.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.g)
    }

    /// `Tr(G^T G)`, i.e. the squared Frobenius norm.
    pub fn trace_gram(&self) -> f64 {
        self.g.norm_squared()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    pub data: DMatrix<f64>,
    pub d1: usize,
    pub d2: usize,
    pub m: usize,
    pub p: usize,
}

impl HankelMatrix {
    pub fn singular_values(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.data.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Spectral norm and the `n`-th largest singular value (1-indexed).
    pub fn norm_and_sigma_n(&self, n: usize) -> (f64, f64) {
        let sv = self.singular_values();
        let norm = sv.first().copied().unwrap_or(0.0);
        let sn = if n >= 1 { sv.get(n - 1).copied().unwrap_or(0.0) } else { 0.0 };
        (norm, sn)
    }
}

/// Input/output record of a rollout; states only when simulated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub inputs: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub states: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Per-step cost `y^T Q y + u^T R u`.
    pub fn costs(&self, cost: &CostParams) -> Vec<f64> {
        self.outputs
            .iter()
            .zip(&self.inputs)
            .map(|(y, u)| linalg::quad_form(cost.q(), y) + linalg::quad_form(cost.r(), u))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub rho: f64,
    pub phi: f64,
    pub controllable: bool,
    pub observable: bool,
    /// Frobenius norm of the length-`H` Markov matrix.
    pub kappa: f64,
}

/// Finite-window estimate of `sup_{tau >= 0} ||A^tau|| / rho(A)^tau` over
/// `tau in [0, tau_max]`. The true supremum may be larger for matrices with
/// slowly decaying transients; the value is only used as a diagnostic.
///
/// For nilpotent `A` (`rho = 0`) the ratio is undefined and the result is the
/// largest `||A^tau||` over the powers that are not identically zero.
pub fn phi_of_a(a: &DMatrix<f64>, tau_max: usize) -> Result<f64> {
    if tau_max == 0 {
        return Err(LqgError::Parameter("tau_max must be >= 1".into()));
    }
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(LqgError::Instability { rho });
    }
    let n = a.nrows();
    // rho below this is treated as nilpotent
    let nilpotent = rho <= 1e-12;
    let step = if nilpotent { a.clone() } else { a / rho };
    let mut pw = DMatrix::<f64>::identity(n, n);
    let mut best = 1.0f64;
    for _ in 0..tau_max {
        pw = &pw * &step;
        let norm = spectral_norm(&pw);
        if nilpotent && norm == 0.0 {
            break;
        }
        best = best.max(norm);
    }
    Ok(best)
}

/// Rank tests for controllability and observability plus `rho`, `Phi` and
/// `kappa`. `Phi` is reported as infinity for unstable `A`.
pub fn check_structural(sys: &LqgSystem, horizon: usize) -> Result<StructuralReport> {
    check_structural_with(sys, horizon, DEFAULT_RANK_TOL, DEFAULT_TAU_MAX)
}

pub fn check_structural_with(
    sys: &LqgSystem,
    horizon: usize,
    rank_tol: f64,
    tau_max: usize,
) -> Result<StructuralReport> {
    if horizon == 0 {
        return Err(LqgError::Parameter("H must be >= 1".into()));
    }
    let rho = spectral_radius(sys.a())?;
    let phi = if rho < 1.0 {
        phi_of_a(sys.a(), tau_max)?
    } else {
        f64::INFINITY
    };
    Ok(StructuralReport {
        rho,
        phi,
        controllable: is_controllable(sys, rank_tol),
        observable: is_observable(sys, rank_tol),
        kappa: markov_parameters(sys, horizon)?.g.norm(),
    })
}

pub fn controllability_matrix(sys: &LqgSystem) -> DMatrix<f64> {
    let (n, p) = (sys.n(), sys.p());
    let mut out = DMatrix::zeros(n, n * p);
    let mut blk = sys.b().clone();
    for k in 0..n {
        out.columns_mut(k * p, p).copy_from(&blk);
        blk = sys.a() * blk;
    }
    out
}

pub fn observability_matrix(sys: &LqgSystem) -> DMatrix<f64> {
    let (n, m) = (sys.n(), sys.m());
    let mut out = DMatrix::zeros(n * m, n);
    let mut blk = sys.c().clone();
    for k in 0..n {
        out.rows_mut(k * m, m).copy_from(&blk);
        blk = blk * sys.a();
    }
    out
}

pub fn is_controllable(sys: &LqgSystem, rank_tol: f64) -> bool {
    linalg::numerical_rank(&controllability_matrix(sys), rank_tol) == sys.n()
}

pub fn is_observable(sys: &LqgSystem, rank_tol: f64) -> bool {
    linalg::numerical_rank(&observability_matrix(sys), rank_tol) == sys.n()
}

/// `G = [0_{m x p}, CB, CAB, ..., CA^{H-2}B]`.
pub fn markov_parameters(sys: &LqgSystem, horizon: usize) -> Result<MarkovParams> {
    if horizon == 0 {
        return Err(LqgError::Parameter("H must be >= 1".into()));
    }
    let (m, p) = (sys.m(), sys.p());
    let mut g = DMatrix::zeros(m, horizon * p);
    let mut ab = sys.b().clone();
    for i in 1..horizon {
        g.columns_mut(i * p, p).copy_from(&(sys.c() * &ab));
        ab = sys.a() * ab;
    }
    MarkovParams::new(g, horizon, m, p)
}

/// Process-noise impulse response `F = [0_{m x n}, C, CA, ..., CA^{H-2}]`.
pub fn noise_markov_parameters(sys: &LqgSystem, horizon: usize) -> Result<DMatrix<f64>> {
    if horizon == 0 {
        return Err(LqgError::Parameter("H must be >= 1".into()));
    }
    let (m, n) = (sys.m(), sys.n());
    let mut f = DMatrix::zeros(m, horizon * n);
    let mut ca = sys.c().clone();
    for i in 1..horizon {
        f.columns_mut(i * n, n).copy_from(&ca);
        ca = ca * sys.a();
    }
    Ok(f)
}

/// `d1 x (d2+1)` block matrix whose `(i, j)` block is block `i + j` of `G`.
pub fn build_hankel(g: &MarkovParams, d1: usize, d2: usize) -> Result<HankelMatrix> {
    if d1 == 0 || d2 == 0 || d1 + d2 + 1 != g.horizon {
        return Err(LqgError::Dimension(format!(
            "Hankel needs d1 + d2 + 1 = H with d1, d2 >= 1 (d1={d1}, d2={d2}, H={})",
            g.horizon
        )));
    }
    let (m, p) = (g.m, g.p);
    let mut data = DMatrix::zeros(m * d1, p * (d2 + 1));
    for i in 1..=d1 {
        for j in 1..=d2 + 1 {
            data.view_mut(((i - 1) * m, (j - 1) * p), (m, p))
                .copy_from(&g.block(i + j));
        }
    }
    Ok(HankelMatrix { data, d1, d2, m, p })
}

/// Stationary state covariance under i.i.d. `N(0, sigma_u^2 I)` inputs,
/// the fixed point of `X <- A X A^T + sigma_w^2 I + sigma_u^2 B B^T`.
pub fn steady_state_covariance(sys: &LqgSystem, sigma_u: f64) -> Result<DMatrix<f64>> {
    if !(sigma_u.is_finite() && sigma_u >= 0.0) {
        return Err(LqgError::Parameter(format!("sigma_u must be >= 0, got {sigma_u}")));
    }
    let rho = spectral_radius(sys.a())?;
    if rho >= 1.0 {
        return Err(LqgError::Instability { rho });
    }
    let n = sys.n();
    let forcing = DMatrix::<f64>::identity(n, n) * sys.sigma_w().powi(2)
        + sys.b() * sys.b().transpose() * sigma_u.powi(2);
    let a = sys.a();
    let at = a.transpose();
    let step = |x: &DMatrix<f64>| a * x * &at + &forcing;
    let tol = |x: &DMatrix<f64>| LYAPUNOV_TOL * spectral_norm(x).max(1.0);

    // Squared-step (Smith) acceleration, then plain fixed-point polishing.
    let mut x = forcing.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let inc = &ak * &x * ak.transpose();
        let done = inc.norm() <= 1e-3 * tol(&x);
        x += inc;
        ak = &ak * &ak;
        if done {
            break;
        }
    }
    let mut residual = f64::INFINITY;
    for _ in 0..LYAPUNOV_MAX_ITER {
        let next = linalg::symmetrize(&step(&x));
        residual = spectral_norm(&(&next - &x));
        x = next;
        if residual < tol(&x) {
            return Ok(x);
        }
    }
    Err(LqgError::Convergence {
        what: "Lyapunov iteration".into(),
        iterations: LYAPUNOV_MAX_ITER,
        residual,
    })
}

/// Noisy measurement `y = C x + z`.
pub fn observe<R: Rng + ?Sized>(sys: &LqgSystem, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
    sys.c() * x + gaussian_vector(rng, sys.m(), sys.sigma_z())
}

/// State update `A x + B u + w`.
pub fn transition<R: Rng + ?Sized>(
    sys: &LqgSystem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    sys.a() * x + sys.b() * u + gaussian_vector(rng, sys.n(), sys.sigma_w())
}

/// One plant step. Returns `(x_{t+1}, y_t)`: the output is emitted from the
/// pre-transition state. Noise is drawn as `z_t` first, then `w_t`.
pub fn simulate_step<R: Rng + ?Sized>(
    sys: &LqgSystem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    rng: &mut R,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != sys.n() || u.len() != sys.p() {
        return Err(LqgError::Dimension(format!(
            "state/input lengths {}/{} do not match n={}, p={}",
            x.len(),
            u.len(),
            sys.n(),
            sys.p()
        )));
    }
    let y = observe(sys, x, rng);
    let x_next = transition(sys, x, u, rng);
    Ok((x_next, y))
}

/// Runs `policy(t, outputs[..=t], inputs[..t], rng)` for `steps` steps from
/// `x_0 = 0`, recording states, inputs and outputs.
pub fn rollout<R, F>(sys: &LqgSystem, mut policy: F, steps: usize, rng: &mut R) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &[DVector<f64>], &[DVector<f64>], &mut R) -> DVector<f64>,
{
    if steps == 0 {
        return Err(LqgError::Parameter("rollout length must be >= 1".into()));
    }
    let mut traj = Trajectory {
        inputs: Vec::with_capacity(steps),
        outputs: Vec::with_capacity(steps),
        states: Some(Vec::with_capacity(steps)),
    };
    let mut x = DVector::zeros(sys.n());
    for t in 0..steps {
        let y = observe(sys, &x, rng);
        traj.outputs.push(y);
        let u = policy(t, &traj.outputs, &traj.inputs, rng);
        if u.len() != sys.p() {
            return Err(LqgError::Dimension(format!(
                "policy returned input of length {} at step {t}, expected {}",
                u.len(),
                sys.p()
            )));
        }
        let x_next = transition(sys, &x, &u, rng);
        traj.inputs.push(u);
        if let Some(states) = traj.states.as_mut() {
            states.push(std::mem::replace(&mut x, x_next));
        }
    }
    Ok(traj)
}

/// Policy drawing i.i.d. `N(0, sigma_u^2 I)` inputs.
pub fn gaussian_policy<R: Rng + ?Sized>(
    p: usize,
    sigma_u: f64,
) -> impl FnMut(usize, &[DVector<f64>], &[DVector<f64>], &mut R) -> DVector<f64> {
    move |_, _, _, rng| gaussian_vector(rng, p, sigma_u)
}
