//! One receding-horizon solve per sampling instant.
//!
//! At each sample the optimality conditions form a two-point boundary value
//! problem on an artificial `tau` axis spanning `[0, T(t)]`: the state is
//! fixed at `tau = 0` and the costate must vanish at `tau = T`. Instead of
//! solving that problem iteratively, the engine tracks its root through
//! time:
//!
//! 1. **Forward sweep** — integrate state and costate from the live values
//!    `y(t), lambda(t)` out to the horizon end; the terminal costate
//!    `F = lambda*(T, t)` is the residual of the boundary condition.
//! 2. **Backward sweep** — integrate the matrix `S` and vector `c` of the
//!    costate sensitivity relation `lambda*_t - lambda*_tau = S (y*_t -
//!    y*_tau) + c` from the horizon end back to `tau = 0`, with terminal
//!    values chosen so that `dF/dt = -A_s F` along the closed loop.
//! 3. **Continuation step** — advance the live costate by one sampling
//!    interval under `dlambda/dt = -H_y^T + c(0, t)` and read the control
//!    off the new costate.
//!
//! The horizon itself grows smoothly from zero, `T(t) = T_f (1 -
//! exp(-alpha t))`, which makes the initial problem trivial and the root
//! tracking well posed. A longer final horizon strengthens the stability
//! margin of the closed loop at the price of a longer sweep per sample.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::integrate::{step, StepperKind};
use crate::model::ModelSpec;
use crate::sim::SimState;

/// Weights, horizon schedule and grid sizes for the receding-horizon solver.
#[derive(Debug, Clone)]
pub struct NrhcConfig {
    /// State-error weight; symmetric positive definite.
    pub q: DMatrix<f64>,
    /// Control weight; symmetric positive definite.
    pub r: DMatrix<f64>,
    /// Final horizon length (days).
    pub t_f: f64,
    /// Horizon growth rate (1/day).
    pub alpha: f64,
    /// Stable continuation gain; every eigenvalue must have positive real
    /// part so the residual dynamics `dF/dt = -A_s F` contract.
    pub a_s: DMatrix<f64>,
    /// Sampling period (days).
    pub t_s: f64,
    /// Number of intervals on the horizon grid.
    pub n_tau: usize,
    /// Stepping scheme used on both time axes.
    pub stepper: StepperKind,
    /// Abort threshold for the residual norm.
    pub divergence_threshold: f64,
}

impl NrhcConfig {
    /// Identity-weight configuration with the given horizon schedule.
    pub fn new(n: usize, t_f: f64, alpha: f64, a_s_scale: f64, t_s: f64, n_tau: usize) -> Self {
        Self {
            q: DMatrix::identity(n, n),
            r: DMatrix::identity(n, n),
            t_f,
            alpha,
            a_s: a_s_scale * DMatrix::identity(n, n),
            t_s,
            n_tau,
            stepper: StepperKind::RungeKutta4,
            divergence_threshold: 1e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q.nrows();
        for (name, m) in [("Q", &self.q), ("R", &self.r), ("A_s", &self.a_s)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidConfig(format!("{name} must be {n}x{n}")));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} has non-finite entries")));
            }
        }
        for (name, m) in [("Q", &self.q), ("R", &self.r)] {
            let asym = (m - m.transpose()).norm();
            if asym > 1e-12 * (1.0 + m.norm()) {
                return Err(Error::InvalidConfig(format!("{name} must be symmetric")));
            }
            if m.clone().cholesky().is_none() {
                return Err(Error::InvalidConfig(format!("{name} must be positive definite")));
            }
        }
        let unstable = self
            .a_s
            .clone()
            .complex_eigenvalues()
            .iter()
            .any(|ev| ev.re <= 0.0);
        if unstable {
            return Err(Error::InvalidConfig(
                "A_s must have all eigenvalues with positive real part".to_string(),
            ));
        }
        if !self.t_f.is_finite() || self.t_f <= 0.0 {
            return Err(Error::InvalidConfig("t_f must be positive".to_string()));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::InvalidConfig("alpha must be positive".to_string()));
        }
        if !self.t_s.is_finite() || self.t_s <= 0.0 {
            return Err(Error::InvalidConfig("t_s must be positive".to_string()));
        }
        if self.n_tau < 1 {
            return Err(Error::InvalidConfig("n_tau must be at least 1".to_string()));
        }
        if self.divergence_threshold.is_nan() || self.divergence_threshold <= 0.0 {
            return Err(Error::InvalidConfig(
                "divergence_threshold must be positive".to_string(),
            ));
        }
        Ok(())
    }

    /// `(2R)^-1`, the constant coefficient `L` of the sweep equations.
    ///
    /// Requires `R` positive definite (enforced by [`NrhcConfig::validate`]).
    pub fn half_r_inv(&self) -> DMatrix<f64> {
        self.r
            .clone()
            .cholesky()
            .expect("R must be positive definite")
            .inverse()
            * 0.5
    }
}

/// Horizon length and its time derivative at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub length: f64,
    pub rate: f64,
}

/// Smoothly grown horizon `T(t) = T_f (1 - exp(-alpha t))` together with
/// `dT/dt`, needed by the backward-sweep terminal condition.
pub fn horizon(t: f64, t_f: f64, alpha: f64) -> Horizon {
    let decay = (-alpha * t).exp();
    Horizon { length: t_f * (1.0 - decay), rate: t_f * alpha * decay }
}

/// Optimal control from the stationarity condition `H_u = 2Ru + lambda = 0`.
///
/// Requires `r` positive definite.
pub fn control_from_costate(lambda: &DVector<f64>, r: &DMatrix<f64>) -> DVector<f64> {
    -0.5 * r
        .clone()
        .cholesky()
        .expect("R must be positive definite")
        .solve(lambda)
}

/// First and second derivatives of the Hamiltonian at one point.
///
/// With control entering additively (`f_u = I`, `H_uy = 0`, `H_uu = 2R`),
/// the sweep coefficients follow directly: `G = f_y`, `L = (2R)^-1`,
/// `K = H_yy`.
#[derive(Debug, Clone)]
pub struct HamiltonianGradients {
    /// `H_y = 2 e^T Q + lambda^T f_y` (row vector).
    pub h_y: RowDVector<f64>,
    /// Dynamics Jacobian `d[g + D theta_hat]/dy`.
    pub f_y: DMatrix<f64>,
    /// `H_yy = 2Q + sum_i lambda_i d2 f_i/dy2`.
    pub h_yy: DMatrix<f64>,
}

pub fn hamiltonian_gradients(
    y: &DVector<f64>,
    lambda: &DVector<f64>,
    theta_hat: &DVector<f64>,
    e: &DVector<f64>,
    cfg: &NrhcConfig,
    model: &ModelSpec,
) -> HamiltonianGradients {
    let f_y = model.jac_f(y, theta_hat);
    let h_y = (2.0 * (&cfg.q * e)).transpose() + lambda.transpose() * &f_y;
    let h_yy = 2.0 * &cfg.q + (model.hess_contract)(y, theta_hat, lambda);
    HamiltonianGradients { h_y, f_y, h_yy }
}

/// Grid-resident data for one horizon solve. Shapes are fixed by the state
/// dimension and grid size, so one workspace can be reused across samples.
#[derive(Debug, Clone)]
pub struct SweepWorkspace {
    /// Horizon grid nodes on `[0, T(t)]`.
    pub tau: Vec<f64>,
    /// Predicted state trajectory.
    pub y_star: Vec<DVector<f64>>,
    /// Predicted costate trajectory; node 0 holds the live costate.
    pub lambda_star: Vec<DVector<f64>>,
    /// Riccati matrix trajectory; zero at the terminal node.
    pub s_traj: Vec<DMatrix<f64>>,
    /// Sweep offset vector trajectory.
    pub c_traj: Vec<DVector<f64>>,
    /// Boundary residual `F = lambda*(T, t)`.
    pub residual: DVector<f64>,
    // Coefficients cached at the forward nodes for the backward pass.
    g_nodes: Vec<DMatrix<f64>>,
    k_nodes: Vec<DMatrix<f64>>,
    hy_nodes: Vec<DVector<f64>>,
}

impl SweepWorkspace {
    pub fn new(n: usize, n_tau: usize) -> Self {
        let nodes = n_tau + 1;
        Self {
            tau: vec![0.0; nodes],
            y_star: vec![DVector::zeros(n); nodes],
            lambda_star: vec![DVector::zeros(n); nodes],
            s_traj: vec![DMatrix::zeros(n, n); nodes],
            c_traj: vec![DVector::zeros(n); nodes],
            residual: DVector::zeros(n),
            g_nodes: vec![DMatrix::zeros(n, n); nodes],
            k_nodes: vec![DMatrix::zeros(n, n); nodes],
            hy_nodes: vec![DVector::zeros(n); nodes],
        }
    }

    fn nodes(&self) -> usize {
        self.tau.len()
    }
}

fn pack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut z = DVector::zeros(a.len() + b.len());
    z.rows_mut(0, a.len()).copy_from(a);
    z.rows_mut(a.len(), b.len()).copy_from(b);
    z
}

/// Integrates the optimality system forward along the horizon, filling
/// `y*`, `lambda*` and the boundary residual `F`.
///
/// The estimate and the drive state are frozen at their values at time `t`;
/// future measurements are not available to a real-time solve, so the
/// predicted error is `e(tau) = y*(tau) - x(t)`.
pub fn forward_sweep(
    state: &SimState,
    cfg: &NrhcConfig,
    model: &ModelSpec,
    ws: &mut SweepWorkspace,
) -> Result<()> {
    let n = model.n;
    let n_tau = cfg.n_tau;
    debug_assert_eq!(ws.nodes(), n_tau + 1, "workspace grid must match n_tau");
    let hor = horizon(state.t, cfg.t_f, cfg.alpha);
    let h = hor.length / n_tau as f64;
    for (i, tau) in ws.tau.iter_mut().enumerate() {
        *tau = i as f64 * h;
    }

    ws.y_star[0] = state.y.clone();
    ws.lambda_star[0] = state.lambda.clone();
    if h > 0.0 {
        let half_r_inv = cfg.half_r_inv();
        let rhs = |_tau: f64, z: &DVector<f64>| {
            let y = z.rows(0, n).into_owned();
            let lam = z.rows(n, n).into_owned();
            let u = -(&half_r_inv * &lam);
            let ydot = model.f(&y, &state.theta_hat) + u;
            let e = &y - &state.x;
            let lamdot = -(2.0 * (&cfg.q * e) + model.jac_f(&y, &state.theta_hat).transpose() * lam);
            pack(&ydot, &lamdot)
        };
        let mut z = pack(&ws.y_star[0], &ws.lambda_star[0]);
        for i in 0..n_tau {
            z = step(&rhs, ws.tau[i], &z, h, cfg.stepper).map_err(|_| Error::NonFinite {
                what: format!("forward sweep node {}", i + 1),
                time: state.t,
            })?;
            ws.y_star[i + 1] = z.rows(0, n).into_owned();
            ws.lambda_star[i + 1] = z.rows(n, n).into_owned();
        }
    } else {
        // Degenerate horizon at t = 0: the boundary residual collapses to
        // the live costate.
        for i in 1..=n_tau {
            ws.y_star[i] = ws.y_star[0].clone();
            ws.lambda_star[i] = ws.lambda_star[0].clone();
        }
    }

    for i in 0..=n_tau {
        let grads = hamiltonian_gradients(
            &ws.y_star[i],
            &ws.lambda_star[i],
            &state.theta_hat,
            &(&ws.y_star[i] - &state.x),
            cfg,
            model,
        );
        ws.hy_nodes[i] = grads.h_y.transpose();
        ws.k_nodes[i] = grads.h_yy;
        ws.g_nodes[i] = grads.f_y;
    }
    ws.residual = ws.lambda_star[n_tau].clone();
    Ok(())
}

/// Linear interpolation of node matrices at fractional grid position `x`.
fn lerp_nodes(nodes: &[DMatrix<f64>], x: f64) -> DMatrix<f64> {
    let last = nodes.len() - 1;
    if x <= 0.0 {
        return nodes[0].clone();
    }
    if x >= last as f64 {
        return nodes[last].clone();
    }
    let i = x.floor() as usize;
    let w = x - i as f64;
    if w == 0.0 {
        nodes[i].clone()
    } else {
        (1.0 - w) * &nodes[i] + w * &nodes[i + 1]
    }
}

/// `S` and `c` trajectories of one backward pass, indexed like the grid.
pub type RiccatiTrajectories = (Vec<DMatrix<f64>>, Vec<DVector<f64>>);

/// Integrates the sweep equations
///
/// ```text
/// S_tau = -G^T S - S G + S L S - K
/// c_tau = -(G^T - S L) c
/// ```
///
/// backward from given terminal values, with `G` and `K` supplied at the
/// grid nodes (interior stages use linear interpolation). Returns the `S`
/// and `c` trajectories indexed like the forward grid.
pub fn riccati_backward(
    g_nodes: &[DMatrix<f64>],
    k_nodes: &[DMatrix<f64>],
    l: &DMatrix<f64>,
    h: f64,
    s_terminal: &DMatrix<f64>,
    c_terminal: &DVector<f64>,
    kind: StepperKind,
) -> Result<RiccatiTrajectories> {
    let n_tau = g_nodes.len() - 1;
    let n = c_terminal.len();
    let mut s_traj = vec![DMatrix::zeros(n, n); n_tau + 1];
    let mut c_traj = vec![DVector::zeros(n); n_tau + 1];
    s_traj[n_tau] = s_terminal.clone();
    c_traj[n_tau] = c_terminal.clone();
    if h == 0.0 {
        for i in 0..n_tau {
            s_traj[i] = s_terminal.clone();
            c_traj[i] = c_terminal.clone();
        }
        return Ok((s_traj, c_traj));
    }

    let horizon_len = h * n_tau as f64;
    // Integrate in sigma = T - tau so the fixed-step integrator runs forward.
    let rhs = |sigma: f64, z: &DVector<f64>| {
        let x = (horizon_len - sigma) / h;
        let g = lerp_nodes(g_nodes, x);
        let k = lerp_nodes(k_nodes, x);
        let s = DMatrix::from_column_slice(n, n, &z.as_slice()[..n * n]);
        let c = DVector::from_column_slice(&z.as_slice()[n * n..]);
        let ds = g.transpose() * &s + &s * &g - &s * l * &s + k;
        let dc = (g.transpose() - &s * l) * c;
        let mut out = DVector::zeros(n * n + n);
        out.rows_mut(0, n * n).copy_from_slice(ds.as_slice());
        out.rows_mut(n * n, n).copy_from(&dc);
        out
    };

    let mut z = DVector::zeros(n * n + n);
    z.rows_mut(0, n * n).copy_from_slice(s_terminal.as_slice());
    z.rows_mut(n * n, n).copy_from(c_terminal);
    for j in 0..n_tau {
        z = step(&rhs, j as f64 * h, &z, h, kind)?;
        let idx = n_tau - j - 1;
        s_traj[idx] = DMatrix::from_column_slice(n, n, &z.as_slice()[..n * n]);
        c_traj[idx] = DVector::from_column_slice(&z.as_slice()[n * n..]);
    }
    Ok((s_traj, c_traj))
}

/// Backward pass over the grid filled by [`forward_sweep`]: integrates `S`
/// and `c` from the terminal conditions
///
/// ```text
/// S(T, t) = 0
/// c(T, t) = H_y^T |_{tau=T} (1 + dT/dt) - A_s F
/// ```
///
/// and returns `c(0, t)`, the correction term of the costate continuation.
pub fn backward_sweep(ws: &mut SweepWorkspace, cfg: &NrhcConfig, dt_dt: f64) -> Result<DVector<f64>> {
    let n_tau = ws.nodes() - 1;
    let n = ws.residual.len();
    let h = ws.tau[n_tau] / n_tau as f64;
    let c_terminal = &ws.hy_nodes[n_tau] * (1.0 + dt_dt) - &cfg.a_s * &ws.residual;
    let s_terminal = DMatrix::zeros(n, n);
    let l = cfg.half_r_inv();
    let (s_traj, c_traj) = riccati_backward(
        &ws.g_nodes,
        &ws.k_nodes,
        &l,
        h,
        &s_terminal,
        &c_terminal,
        cfg.stepper,
    )?;
    ws.s_traj = s_traj;
    ws.c_traj = c_traj;
    Ok(ws.c_traj[0].clone())
}

/// Real-time costate derivative `dlambda/dt = -H_y^T |_{tau=0} + c(0, t)`,
/// with `H_y` evaluated at the live state, costate and estimate.
pub fn costate_rate(
    state: &SimState,
    c0: &DVector<f64>,
    model: &ModelSpec,
    cfg: &NrhcConfig,
) -> DVector<f64> {
    let e = &state.y - &state.x;
    let grads = hamiltonian_gradients(&state.y, &state.lambda, &state.theta_hat, &e, cfg, model);
    c0 - grads.h_y.transpose()
}

/// Diagnostics attached to each horizon solve.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    /// Boundary residual norm `|F|`.
    pub f_norm: f64,
    /// Horizon cost `J` evaluated on the predicted trajectory by
    /// trapezoidal quadrature.
    pub horizon_cost: f64,
    /// Worst stored Riccati asymmetry, normalized by `1 + |S|`.
    pub s_asymmetry: f64,
}

/// Output of one sampling-instant solve.
#[derive(Debug, Clone)]
pub struct NrhcStep {
    /// Control to apply over the coming sampling interval.
    pub u: DVector<f64>,
    /// Costate advanced to the end of the interval.
    pub lambda: DVector<f64>,
    pub diagnostics: StepDiagnostics,
}

fn max_normalized_asymmetry(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst / (1.0 + s.norm())
}

/// Executes one full solve: forward sweep, backward sweep, one continuation
/// step of the live costate, and control extraction `u = -(1/2) R^-1 lambda`.
///
/// Pure in `(state, cfg, model)`; the workspace is caller-owned scratch.
pub fn nrhc_step(
    state: &SimState,
    cfg: &NrhcConfig,
    model: &ModelSpec,
    ws: &mut SweepWorkspace,
) -> Result<NrhcStep> {
    forward_sweep(state, cfg, model, ws)?;
    let f_norm = ws.residual.norm();
    if !f_norm.is_finite() || f_norm > cfg.divergence_threshold {
        return Err(Error::Diverged { time: state.t, f_norm });
    }
    let hor = horizon(state.t, cfg.t_f, cfg.alpha);
    let c0 = backward_sweep(ws, cfg, hor.rate)?;
    let rate = costate_rate(state, &c0, model, cfg);
    let lambda = step(|_, _| rate.clone(), state.t, &state.lambda, cfg.t_s, cfg.stepper)
        .map_err(|_| Error::NonFinite {
            what: "costate continuation step".to_string(),
            time: state.t,
        })?;
    let half_r_inv = cfg.half_r_inv();
    let u = -(&half_r_inv * &lambda);

    let n_tau = cfg.n_tau;
    let h = hor.length / n_tau as f64;
    let mut horizon_cost = 0.0;
    if h > 0.0 {
        let running = |i: usize| {
            let e = &ws.y_star[i] - &state.x;
            let u_i = -(&half_r_inv * &ws.lambda_star[i]);
            (e.transpose() * &cfg.q * &e)[(0, 0)] + (u_i.transpose() * &cfg.r * &u_i)[(0, 0)]
        };
        let mut prev = running(0);
        for i in 1..=n_tau {
            let cur = running(i);
            horizon_cost += 0.5 * h * (prev + cur);
            prev = cur;
        }
    }

    let s_asymmetry = ws
        .s_traj
        .iter()
        .map(max_normalized_asymmetry)
        .fold(0.0, f64::max);

    Ok(NrhcStep {
        u,
        lambda,
        diagnostics: StepDiagnostics { f_norm, horizon_cost, s_asymmetry },
    })
}
