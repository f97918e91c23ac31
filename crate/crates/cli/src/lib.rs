//! Config-driven scenario runner for the receding-horizon synchronization
//! estimator: loads and validates scenarios, runs them, writes CSV logs
//! and SVG figures, and exposes the oracle cross-check suite.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod svg;
pub mod verify;

/// Process exit codes: 0 success, 1 failed verification checks, 2
/// configuration errors, 3 numerical divergence.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CHECK_FAILED: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const DIVERGED: u8 = 3;
}
