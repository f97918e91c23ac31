//! Deterministic fixed-step explicit ODE stepping.
//!
//! The same stepper drives both time axes of the engine: the real-time `t`
//! axis (sampling clock) and the artificial `tau` axis inside each horizon
//! solve. There is no adaptivity and no internal state, so identical inputs
//! always produce bitwise-identical outputs.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Explicit stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepperKind {
    ForwardEuler,
    #[default]
    RungeKutta4,
}

/// Advances `y` by one explicit step of size `h` under `rhs`.
///
/// Returns an error if the step produces a non-finite component, reporting
/// the time at which it happened.
pub fn step<F>(mut rhs: F, t: f64, y: &DVector<f64>, h: f64, kind: StepperKind) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    debug_assert!(h > 0.0, "step size must be positive");
    let next = match kind {
        StepperKind::ForwardEuler => y + h * rhs(t, y),
        StepperKind::RungeKutta4 => {
            let k1 = rhs(t, y);
            let k2 = rhs(t + 0.5 * h, &(y + 0.5 * h * &k1));
            let k3 = rhs(t + 0.5 * h, &(y + 0.5 * h * &k2));
            let k4 = rhs(t + h, &(y + h * &k3));
            y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        }
    };
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFinite {
            what: "integration step".to_string(),
            time: t,
        })
    }
}
