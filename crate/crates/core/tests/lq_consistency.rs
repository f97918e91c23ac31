//! Closed-loop consistency of the backward-sweep continuation against the
//! analytic linear-quadratic solution.
//!
//! For `y' = u` with running cost `q e^2 + r u^2` and zero terminal cost,
//! the horizon problem has the closed form `lambda(t) = 2 P(T(t)) e(t)`
//! with `P(T) = sqrt(q r) tanh(sqrt(q/r) T)`. The continuation loop has to
//! track that root as the horizon grows, without ever solving the problem
//! iteratively.

use nalgebra::DVector;
use rhc_core::integrate::step;
use rhc_core::nrhc::{backward_sweep, forward_sweep, horizon, NrhcConfig, SweepWorkspace};
use rhc_core::oracle::{pure_integrator, scalar_lq};
use rhc_core::sim::SimState;

/// Runs the scalar closed loop for one time unit and returns the worst
/// costate deviation from the closed form, relative to the reference peak.
fn continuation_vs_closed_form(t_s: f64, t_f: f64, alpha: f64, a_s: f64) -> f64 {
    let model = pure_integrator(1);
    let cfg = NrhcConfig::new(1, t_f, alpha, a_s, t_s, 20);
    let x_ref = DVector::from_vec(vec![0.0]);
    let mut y = DVector::from_vec(vec![1.0]);
    let mut lambda = DVector::zeros(1);
    let theta = DVector::zeros(0);
    let mut ws = SweepWorkspace::new(1, cfg.n_tau);
    let half_r_inv = cfg.half_r_inv();

    let steps = (1.0 / t_s).round() as usize;
    let mut t = 0.0;
    let mut worst_abs = 0.0f64;
    let mut peak_ref = 0.0f64;
    for _ in 0..steps {
        let state = SimState {
            t,
            x: x_ref.clone(),
            y: y.clone(),
            lambda: lambda.clone(),
            theta_hat: theta.clone(),
        };
        forward_sweep(&state, &cfg, &model, &mut ws).unwrap();
        let hor = horizon(t, cfg.t_f, cfg.alpha);
        let c0 = backward_sweep(&mut ws, &cfg, hor.rate).unwrap();

        let e = &y - &x_ref;
        let rate = &c0 - 2.0 * (&cfg.q * e);
        lambda = step(|_, _| rate.clone(), t, &lambda, t_s, cfg.stepper).unwrap();
        let u = -(&half_r_inv * &lambda);
        y = step(|_, _| u.clone(), t, &y, t_s, cfg.stepper).unwrap();
        t += t_s;

        let hor_next = horizon(t, cfg.t_f, cfg.alpha);
        let lambda_ref = scalar_lq::costate(1.0, 1.0, hor_next.length, y[0]);
        peak_ref = peak_ref.max(lambda_ref.abs());
        worst_abs = worst_abs.max((lambda[0] - lambda_ref).abs());
    }
    worst_abs / peak_ref
}

#[test]
fn continuation_tracks_analytic_lq_costate() {
    let rel = continuation_vs_closed_form(1e-3, 0.2, 0.5, 100.0);
    assert!(rel <= 1e-4, "relative tracking error {rel:.3e}");
}

#[test]
fn continuation_tracks_lq_at_sampling_period_of_presets() {
    // the preset clock and continuation gain
    let rel = continuation_vs_closed_form(1e-2, 0.1, 0.01, 60.0);
    assert!(rel <= 1e-4, "relative tracking error {rel:.3e}");
}
