//! Independent, brute-force validators.
//!
//! Everything here deliberately avoids the continuation machinery: the
//! shooting solver attacks the boundary-value problem with damped Newton
//! iterations and finite-difference Jacobians, the steady state comes from
//! algebra, and the LQ reference is a closed form. Tests and the CLI
//! `verify` command use these to cross-check the real-time solver. The
//! module ships in the library (not test-only) so equivalence can be
//! re-derived on any scenario.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{HivParams, ModelSpec};
use crate::nrhc::{forward_sweep, horizon, NrhcConfig, SweepWorkspace};
use crate::sim::SimState;

/// Outcome of a shooting solve of the horizon boundary-value problem.
#[derive(Debug, Clone)]
pub struct ShootingResult {
    /// Initial costate found for `F(lambda0) = 0`.
    pub lambda0: DVector<f64>,
    /// Boundary residual norm at `lambda0`.
    pub residual_norm: f64,
    /// Newton iterations taken.
    pub iterations: usize,
    /// Whether the residual met `1e-8 * (1 + |lambda0|)`.
    pub converged: bool,
}

const MAX_NEWTON_ITER: usize = 50;
const MIN_DAMPING: f64 = 1e-7;

/// Solves the horizon boundary-value problem at time `t` by damped Newton
/// iteration on the initial costate, using the same forward sweep that the
/// continuation method uses but none of its sweep machinery.
///
/// Requires `T(t) > 0`. On non-convergence the best iterate is returned
/// with `converged = false`.
pub fn shoot_tpbvp(
    t: f64,
    y_t: &DVector<f64>,
    theta_hat: &DVector<f64>,
    x_t: &DVector<f64>,
    cfg: &NrhcConfig,
    model: &ModelSpec,
    lambda_guess: &DVector<f64>,
) -> Result<ShootingResult> {
    let hor = horizon(t, cfg.t_f, cfg.alpha);
    if hor.length <= 0.0 {
        return Err(Error::InvalidConfig(
            "shooting requires a positive horizon length".to_string(),
        ));
    }
    let n = model.n;
    let mut ws = SweepWorkspace::new(n, cfg.n_tau);
    let mut eval = |lambda0: &DVector<f64>| -> Result<DVector<f64>> {
        let state = SimState {
            t,
            x: x_t.clone(),
            y: y_t.clone(),
            lambda: lambda0.clone(),
            theta_hat: theta_hat.clone(),
        };
        forward_sweep(&state, cfg, model, &mut ws)?;
        Ok(ws.residual.clone())
    };

    let tol = |lam: &DVector<f64>| 1e-8 * (1.0 + lam.norm());
    let mut lambda = lambda_guess.clone();
    let mut f = eval(&lambda)?;
    let mut f_norm = f.norm();
    let mut iterations = 0;

    while f_norm > tol(&lambda) && iterations < MAX_NEWTON_ITER {
        // central-difference Jacobian of F with respect to lambda0
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + lambda[j].abs());
            let mut plus = lambda.clone();
            let mut minus = lambda.clone();
            plus[j] += h;
            minus[j] -= h;
            jac.set_column(j, &((eval(&plus)? - eval(&minus)?) / (2.0 * h)));
        }
        let Some(delta) = jac.lu().solve(&(-&f)) else {
            break;
        };

        // backtrack until the residual strictly decreases
        let mut damping = 1.0;
        let mut accepted = false;
        while damping >= MIN_DAMPING {
            let candidate = &lambda + damping * &delta;
            let f_candidate = eval(&candidate)?;
            let norm_candidate = f_candidate.norm();
            if norm_candidate < f_norm {
                lambda = candidate;
                f = f_candidate;
                f_norm = norm_candidate;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }

    let converged = f_norm <= tol(&lambda);
    Ok(ShootingResult { lambda0: lambda, residual_norm: f_norm, iterations, converged })
}

/// Infected equilibrium of the infection model:
/// `x1 = mu1 mu2 / (beta k)`, `x2 = (s - d x1) / mu1`, `x3 = k x2 / mu2`.
///
/// Signals the infection-free regime when the computed infected-cell count
/// is negative.
pub fn steady_state(p: &HivParams) -> Result<DVector<f64>> {
    if p.beta * p.k == 0.0 || p.mu1 * p.mu2 == 0.0 {
        return Err(Error::InvalidConfig(
            "steady state requires beta*k != 0 and mu1*mu2 != 0".to_string(),
        ));
    }
    let x1 = p.mu1 * p.mu2 / (p.beta * p.k);
    let x2 = (p.s - p.d * x1) / p.mu1;
    let x3 = p.k * x2 / p.mu2;
    if x2 < 0.0 {
        return Err(Error::InfectedFreeRegime { x2 });
    }
    Ok(DVector::from_vec(vec![x1, x2, x3]))
}

/// Central-difference gradient of a scalar field; the step for coordinate
/// `i` is `h * (1 + |x_i|)`.
pub fn fd_gradient<F>(field: F, point: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = point.len();
    let mut grad = DVector::zeros(n);
    for i in 0..n {
        let hi = h * (1.0 + point[i].abs());
        let mut plus = point.clone();
        let mut minus = point.clone();
        plus[i] += hi;
        minus[i] -= hi;
        grad[i] = (field(&plus) - field(&minus)) / (2.0 * hi);
    }
    grad
}

/// Central-difference Jacobian of a vector field, column per coordinate.
pub fn fd_jacobian<F>(field: F, point: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = point.len();
    let m = field(point).len();
    let mut jac = DMatrix::zeros(m, n);
    for i in 0..n {
        let hi = h * (1.0 + point[i].abs());
        let mut plus = point.clone();
        let mut minus = point.clone();
        plus[i] += hi;
        minus[i] -= hi;
        jac.set_column(i, &((field(&plus) - field(&minus)) / (2.0 * hi)));
    }
    jac
}

/// Closed-form references for the scalar linear-quadratic problem
/// `y' = u` with running cost `q e^2 + r u^2` and zero terminal cost.
pub mod scalar_lq {
    /// Riccati gain `P(tau)` with `t_remaining = T - tau`:
    /// `P = sqrt(q r) tanh(sqrt(q/r) (T - tau))`, from
    /// `P' = P^2 / r - q`, `P(T) = 0`.
    pub fn riccati_gain(q: f64, r: f64, t_remaining: f64) -> f64 {
        (q * r).sqrt() * ((q / r).sqrt() * t_remaining).tanh()
    }

    /// Optimal initial costate `lambda(0) = 2 P(0) e(0)`.
    pub fn costate(q: f64, r: f64, horizon: f64, e0: f64) -> f64 {
        2.0 * riccati_gain(q, r, horizon) * e0
    }
}

/// A drift-free model `y' = u` in `n` dimensions with no unknown
/// parameters; the simplest system the horizon solver accepts.
pub fn pure_integrator(n: usize) -> ModelSpec {
    ModelSpec {
        n,
        p: 0,
        g: Box::new(move |_y| DVector::zeros(n)),
        regressor: Box::new(move |_y| DMatrix::zeros(n, 0)),
        jac_g: Box::new(move |_y| DMatrix::zeros(n, n)),
        jac_d_theta: Box::new(move |_y, _theta| DMatrix::zeros(n, n)),
        hess_contract: Box::new(move |_y, _theta, _lambda| DMatrix::zeros(n, n)),
    }
}
