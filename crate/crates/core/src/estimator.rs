//! Steady-state Kalman filtering under a (possibly wrong) model, the
//! certainty-equivalent control law, and a Monte-Carlo check of the
//! average-cost Bellman equation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{LqgError, Result};
use crate::linalg::{gaussian_vector, psd_sqrt, quad_form};
use crate::riccati::ControllerSynthesis;
use crate::system::{CostParams, LqgSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterPhase {
    /// Holds `x_{t|t-1}`, waiting for `y_t`.
    Predicted,
    /// Holds `x_{t|t}`, waiting for `u_t`.
    Corrected,
}

impl FilterPhase {
    fn name(self) -> &'static str {
        match self {
            FilterPhase::Predicted => "predicted",
            FilterPhase::Corrected => "corrected",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x_pred: DVector<f64>,
    pub x_post: DVector<f64>,
    pub t: usize,
    pub phase: FilterPhase,
}

impl FilterState {
    /// `x_{0|-1} = 0`
    pub fn new(n: usize) -> Self {
        FilterState {
            x_pred: DVector::zeros(n),
            x_post: DVector::zeros(n),
            t: 0,
            phase: FilterPhase::Predicted,
        }
    }
}

/// The model an agent believes in, its optimal controller, and the filter
/// state driven by that model.
#[derive(Debug, Clone)]
pub struct ModelController {
    model: LqgSystem,
    synth: ControllerSynthesis,
    filter: FilterState,
    // I - L C, cached
    correction: DMatrix<f64>,
}

impl ModelController {
    /// `synth` must have been produced from `model`.
    pub fn new(model: LqgSystem, synth: ControllerSynthesis) -> Result<Self> {
        let n = model.n();
        if synth.K.shape() != (model.p(), n) || synth.L.shape() != (n, model.m()) {
            return Err(LqgError::Dimension(
                "controller gains do not match model dimensions".into(),
            ));
        }
        let correction = DMatrix::identity(n, n) - &synth.L * model.c();
        Ok(ModelController {
            filter: FilterState::new(n),
            model,
            synth,
            correction,
        })
    }

    pub fn model(&self) -> &LqgSystem {
        &self.model
    }

    pub fn synth(&self) -> &ControllerSynthesis {
        &self.synth
    }

    pub fn filter(&self) -> &FilterState {
        &self.filter
    }

    /// Overrides the current prediction (phase must be `Predicted`).
    pub fn set_prediction(&mut self, x_pred: DVector<f64>) -> Result<()> {
        self.expect(FilterPhase::Predicted)?;
        if x_pred.len() != self.model.n() {
            return Err(LqgError::Dimension("prediction length".into()));
        }
        self.filter.x_pred = x_pred;
        Ok(())
    }

    fn expect(&self, phase: FilterPhase) -> Result<()> {
        if self.filter.phase == phase {
            Ok(())
        } else {
            Err(LqgError::Phase {
                expected: phase.name(),
                found: self.filter.phase.name(),
            })
        }
    }

    /// `x_{t|t} = (I - L C) x_{t|t-1} + L y_t`
    pub fn filter_correct(&mut self, y: &DVector<f64>) -> Result<&DVector<f64>> {
        self.expect(FilterPhase::Predicted)?;
        if y.len() != self.model.m() {
            return Err(LqgError::Dimension(format!(
                "observation has length {}, model expects {}",
                y.len(),
                self.model.m()
            )));
        }
        self.filter.x_post = &self.correction * &self.filter.x_pred + &self.synth.L * y;
        self.filter.phase = FilterPhase::Corrected;
        Ok(&self.filter.x_post)
    }

    /// `x_{t+1|t} = A x_{t|t} + B u_t`; advances time.
    pub fn filter_predict(&mut self, u: &DVector<f64>) -> Result<&DVector<f64>> {
        self.expect(FilterPhase::Corrected)?;
        if u.len() != self.model.p() {
            return Err(LqgError::Dimension(format!(
                "input has length {}, model expects {}",
                u.len(),
                self.model.p()
            )));
        }
        self.filter.x_pred = self.model.a() * &self.filter.x_post + self.model.b() * u;
        self.filter.t += 1;
        self.filter.phase = FilterPhase::Predicted;
        Ok(&self.filter.x_pred)
    }

    /// `u_t = -K x_{t|t}`
    pub fn control_action(&self) -> Result<DVector<f64>> {
        self.expect(FilterPhase::Corrected)?;
        Ok(-(&self.synth.K * &self.filter.x_post))
    }
}

/// Both sides of the Bellman equation at one filter state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellmanEstimate {
    pub lhs: f64,
    /// Monte-Carlo estimate of the right-hand side at the evaluated action.
    pub rhs: f64,
    /// `lhs - rhs`
    pub residual: f64,
    pub std_error: f64,
}

/// Estimates the residual of
///
/// ```text
/// J* + x^T (P - C^T Q C) x + y^T Q y
///   = y^T Q y + u^T R u + E[x'^T (P - C^T Q C) x' + y'^T Q y']
/// ```
///
/// at `x = x_{t|t}` and the optimal action `u = -K x_{t|t}`. The expectation
/// samples `x_t = x_{t|t} + e` with `e ~ N(0, Sigma_bar)`, then
/// `y' = C(A x_t + B u + w) + z'` and `x' = (I - LC)(A x_{t|t} + B u) + L y'`.
pub fn bellman_residual<R: Rng + ?Sized>(
    sys: &LqgSystem,
    cost: &CostParams,
    synth: &ControllerSynthesis,
    x_pred: &DVector<f64>,
    y: &DVector<f64>,
    n_samples: usize,
    rng: &mut R,
) -> Result<BellmanEstimate> {
    bellman_estimate(sys, cost, synth, x_pred, y, None, n_samples, rng)
}

/// Same as [`bellman_residual`] but at an arbitrary action (`None` means the
/// optimal one).
#[allow(clippy::too_many_arguments)]
pub fn bellman_estimate<R: Rng + ?Sized>(
    sys: &LqgSystem,
    cost: &CostParams,
    synth: &ControllerSynthesis,
    x_pred: &DVector<f64>,
    y: &DVector<f64>,
    action: Option<&DVector<f64>>,
    n_samples: usize,
    rng: &mut R,
) -> Result<BellmanEstimate> {
    let (n, m) = (sys.n(), sys.m());
    if x_pred.len() != n || y.len() != m {
        return Err(LqgError::Dimension("filter state or observation length".into()));
    }
    if n_samples < 2 {
        return Err(LqgError::Parameter("need at least 2 samples".into()));
    }
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let q = cost.q();
    let ctqc = c.transpose() * q * c;
    let diff = &synth.P - &ctqc;
    let correction = DMatrix::identity(n, n) - &synth.L * c;

    let x_post = &correction * x_pred + &synth.L * y;
    let u = match action {
        Some(u) => {
            if u.len() != sys.p() {
                return Err(LqgError::Dimension("action length".into()));
            }
            u.clone()
        }
        None => -(&synth.K * &x_post),
    };
    let lhs = synth.J_star + quad_form(&diff, &x_post) + quad_form(q, y);

    let err_root = psd_sqrt(&synth.Sigma_bar);
    let mean_next = a * &x_post + b * &u;
    let x_next_prior = &correction * &mean_next;
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 0..n_samples {
        let x_t = &x_post + &err_root * gaussian_vector(rng, n, 1.0);
        let w = gaussian_vector(rng, n, sys.sigma_w());
        let z = gaussian_vector(rng, m, sys.sigma_z());
        let y_next = c * (a * &x_t + b * &u + w) + z;
        let x_next = &x_next_prior + &synth.L * &y_next;
        let v = quad_form(&diff, &x_next) + quad_form(q, &y_next);
        // Welford
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n_samples - 1) as f64;
    let rhs = quad_form(q, y) + quad_form(cost.r(), &u) + mean;
    Ok(BellmanEstimate {
        lhs,
        rhs,
        residual: lhs - rhs,
        std_error: (var / n_samples as f64).sqrt(),
    })
}
