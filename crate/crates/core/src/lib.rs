//! Estimation of unknown constant or time-varying parameters of nonlinear
//! ODE systems by drive-response synchronization under a real-time
//! receding-horizon controller.
//!
//! A measured *drive* system evolves under unknown parameters. A *response*
//! copy of the model runs alongside it with a parameter estimate and an
//! additive control input. At every sampling instant a finite-horizon
//! optimal control problem is solved for the synchronizing input — not
//! iteratively, but by tracking the root of its boundary condition through
//! time with a single forward/backward sweep per sample ([`nrhc`]). While
//! the controller closes the gap between the two systems, a gradient
//! update law ([`estimator`]) moves the parameter estimate; once the
//! trajectories agree, the estimate has converged to the true parameters
//! wherever the trajectory is exciting enough to identify them.
//!
//! The flagship model is a three-state viral infection system ([`model`]),
//! but every algorithm works against the generic split `g(y) + D(y)*theta`.
//! [`sim`] runs the closed loop, [`oracle`] holds slow independent
//! validators (shooting solver, finite differences, closed forms) used to
//! cross-check the fast path.

pub mod error;
pub mod estimator;
pub mod integrate;
pub mod model;
pub mod nrhc;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
pub use estimator::{estimator_rhs, pe_metric, EstimatorState, PeMetric, PeWindow};
pub use integrate::{step, StepperKind};
pub use model::{
    hiv_jacobian, hiv_rhs, hiv_split, HivParams, HivSignals, ModelSpec, ParamSignal,
    UnknownParam, UnknownSet,
};
pub use nrhc::{
    backward_sweep, control_from_costate, costate_rate, forward_sweep, hamiltonian_gradients,
    horizon, nrhc_step, Horizon, NrhcConfig, NrhcStep, SweepWorkspace,
};
pub use oracle::{fd_gradient, fd_jacobian, shoot_tpbvp, steady_state, ShootingResult};
pub use sim::{
    builtin_scenarios, preset, run_scenario, run_scenario_with_drive, DriveSource, LogRow,
    MeasurementTable, Scenario, SimFailure, SimState, TrajectoryLog,
};
