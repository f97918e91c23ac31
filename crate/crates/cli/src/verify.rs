//! Cross-checks of the fast solver against the independent validators:
//! algebraic steady state, finite-difference derivative certification,
//! Riccati symmetry, and shooting agreement at snapshot times.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rhc_core::model::{hiv_rhs, hiv_split, ModelSpec};
use rhc_core::nrhc::{hamiltonian_gradients, NrhcConfig};
use rhc_core::oracle::{fd_gradient, fd_jacobian, shoot_tpbvp, steady_state};
use rhc_core::sim::{run_scenario, Scenario, SimFailure, TrajectoryLog};

/// Snapshot times for the shooting agreement check (days).
pub const SNAPSHOT_TIMES: [f64; 5] = [2.0, 5.0, 10.0, 20.0, 50.0];
/// Agreement tolerance: `max(1e-3, 1e-2 |lambda|)`.
pub fn shooting_tolerance(lambda_norm: f64) -> f64 {
    (1e-2 * lambda_norm).max(1e-3)
}

pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Worst relative finite-difference errors over random evaluation points.
pub struct GradientReport {
    pub h_y: f64,
    pub f_y: f64,
    pub h_yy: f64,
}

/// Certifies the analytic Hamiltonian derivatives at `n_points` seeded
/// random states, costates and estimates.
pub fn certify_gradients(
    model: &ModelSpec,
    cfg: &NrhcConfig,
    n_points: usize,
    seed: u64,
) -> GradientReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradientReport { h_y: 0.0, f_y: 0.0, h_yy: 0.0 };
    for _ in 0..n_points {
        let y = DVector::from_vec(vec![
            rng.gen_range(1.0..2000.0),
            rng.gen_range(0.1..200.0),
            rng.gen_range(1.0..25000.0),
        ]);
        let x = DVector::from_vec(vec![
            rng.gen_range(1.0..2000.0),
            rng.gen_range(0.1..200.0),
            rng.gen_range(1.0..25000.0),
        ]);
        let lambda = DVector::from_vec(vec![
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        ]);
        let theta = DVector::from_vec(vec![
            rng.gen_range(0.5..80.0),
            rng.gen_range(0.05..3.0),
            rng.gen_range(10.0..900.0),
        ]);
        let e = &y - &x;
        let grads = hamiltonian_gradients(&y, &lambda, &theta, &e, cfg, model);

        // scalar Hamiltonian with u = 0; the control terms do not depend on y
        let ham = |v: &DVector<f64>| {
            let ev = v - &x;
            (ev.transpose() * &cfg.q * &ev)[(0, 0)] + (lambda.transpose() * model.f(v, &theta))[(0, 0)]
        };
        let fd_hy = fd_gradient(ham, &y, 1e-5);
        let rel_hy = (grads.h_y.transpose() - &fd_hy).norm() / fd_hy.norm().max(1e-12);
        report.h_y = report.h_y.max(rel_hy);

        let fd_fy = fd_jacobian(|v| model.f(v, &theta), &y, 1e-5);
        let rel_fy = (&grads.f_y - &fd_fy).norm() / fd_fy.norm().max(1e-12);
        report.f_y = report.f_y.max(rel_fy);

        // H_yy by differencing the analytic gradient
        let fd_hyy = fd_jacobian(
            |v| {
                let ev = v - &x;
                hamiltonian_gradients(v, &lambda, &theta, &ev, cfg, model)
                    .h_y
                    .transpose()
            },
            &y,
            1e-5,
        );
        let rel_hyy = (&grads.h_yy - &fd_hyy).norm() / fd_hyy.norm().max(1e-12);
        report.h_yy = report.h_yy.max(rel_hyy);
    }
    report
}

/// Recovers the continuation costate from a logged control row:
/// `u = -(1/2) R^-1 lambda`, so `lambda = -2 R u`.
pub fn costate_from_control(u: &DVector<f64>, cfg: &NrhcConfig) -> DVector<f64> {
    -2.0 * (&cfg.r * u)
}

/// Runs the scenario and evaluates the four verification checks.
///
/// A failed run (divergence, non-finite values) is returned as an error
/// with the partial log attached.
pub fn run_verify(scenario: &Scenario) -> Result<VerifyReport, Box<SimFailure>> {
    let log = run_scenario(scenario)?;
    Ok(evaluate_checks(scenario, &log))
}

/// The verification checks against an already-computed log.
pub fn evaluate_checks(scenario: &Scenario, log: &TrajectoryLog) -> VerifyReport {
    let mut checks = Vec::new();
    let model = hiv_split(&scenario.unknown, &scenario.signals.at(0.0))
        .expect("scenario was validated");

    // steady-state residual, evaluated at mid-run parameter values so a
    // time-varying drive is checked away from the infection-free boundary
    let params_mid = scenario.signals.at(scenario.duration / 2.0);
    match steady_state(&params_mid) {
        Ok(ss) => {
            let residual = hiv_rhs(&ss, &params_mid).norm();
            let tol = 1e-9 * ss.norm();
            checks.push(CheckResult {
                name: "steady-state residual".to_string(),
                passed: residual <= tol,
                detail: format!("|f(x*)| = {residual:.3e}, tol {tol:.3e}"),
            });
        }
        Err(e) => checks.push(CheckResult {
            name: "steady-state residual".to_string(),
            passed: false,
            detail: format!("{e}"),
        }),
    }

    let grads = certify_gradients(&model, &scenario.cfg, 100, 0x5eed);
    checks.push(CheckResult {
        name: "derivative certification (100 points)".to_string(),
        passed: grads.h_y <= 1e-6 && grads.f_y <= 1e-6 && grads.h_yy <= 1e-4,
        detail: format!(
            "rel err H_y {:.2e} (tol 1e-6), f_y {:.2e} (tol 1e-6), H_yy {:.2e} (tol 1e-4)",
            grads.h_y, grads.f_y, grads.h_yy
        ),
    });

    checks.push(CheckResult {
        name: "Riccati symmetry scan".to_string(),
        passed: log.max_s_asymmetry <= 1e-9,
        detail: format!("max normalized asymmetry {:.3e} (tol 1e-9)", log.max_s_asymmetry),
    });

    let t_s = scenario.cfg.t_s;
    for &snap in SNAPSHOT_TIMES.iter().filter(|&&s| s <= scenario.duration) {
        let idx = (snap / t_s).round() as usize;
        let Some(row) = log.rows.get(idx) else {
            checks.push(CheckResult {
                name: format!("shooting agreement @ t={snap}"),
                passed: false,
                detail: "run ended before this snapshot".to_string(),
            });
            continue;
        };
        let lambda = costate_from_control(&row.u, &scenario.cfg);
        match shoot_tpbvp(row.t, &row.y, &row.theta_hat, &row.x, &scenario.cfg, &model, &lambda) {
            Ok(res) => {
                let diff = (&res.lambda0 - &lambda).norm();
                let tol = shooting_tolerance(lambda.norm());
                checks.push(CheckResult {
                    name: format!("shooting agreement @ t={snap}"),
                    passed: res.converged && diff <= tol,
                    detail: format!(
                        "converged={}, |diff| = {diff:.3e}, tol {tol:.3e}, |lambda| = {:.3e}",
                        res.converged,
                        lambda.norm()
                    ),
                });
            }
            Err(e) => checks.push(CheckResult {
                name: format!("shooting agreement @ t={snap}"),
                passed: false,
                detail: format!("{e}"),
            }),
        }
    }
    VerifyReport { checks }
}
