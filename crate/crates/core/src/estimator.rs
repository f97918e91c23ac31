//! Adaptive parameter-update law and persistent-excitation monitor.
//!
//! The estimate evolves under
//!
//! ```text
//! theta_hat' = -D(y)^T e,    e = y - x
//! ```
//!
//! advanced once per sampling interval, co-integrated with the response
//! state (see [`crate::sim`] for why). The excitation monitor integrates
//! the regressor Gramian `D D^T` over a trailing window and reports its
//! smallest eigenvalue; a positive value certifies that the trajectory
//! carries enough information to identify the parameters. The monitor is
//! diagnostic only and never gates the estimator.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Update direction `-D(y)^T e` for the parameter estimate.
pub fn estimator_rhs(d_y: &DMatrix<f64>, e: &DVector<f64>) -> Result<DVector<f64>> {
    if d_y.nrows() != e.len() {
        return Err(Error::DimensionMismatch {
            what: "estimator_rhs error vector",
            expected: d_y.nrows(),
            got: e.len(),
        });
    }
    Ok(-(d_y.transpose() * e))
}

/// Trailing window of regressor Gramian samples `(t, D(y) D(y)^T)`.
#[derive(Debug, Clone)]
pub struct PeWindow {
    span: f64,
    samples: VecDeque<(f64, DMatrix<f64>)>,
}

impl PeWindow {
    /// `span` is the window length in simulated time (days).
    pub fn new(span: f64) -> Self {
        Self { span, samples: VecDeque::new() }
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Records `D(y) D(y)^T` at time `t` and evicts samples older than the
    /// window span.
    pub fn push(&mut self, t: f64, d_y: &DMatrix<f64>) {
        self.samples.push_back((t, d_y * d_y.transpose()));
        while let Some(&(t0, _)) = self.samples.front() {
            if t - t0 > self.span {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    fn iter(&self) -> impl Iterator<Item = &(f64, DMatrix<f64>)> {
        self.samples.iter()
    }
}

/// Result of the excitation check over one window.
#[derive(Debug, Clone, Copy)]
pub struct PeMetric {
    /// Smallest eigenvalue of the integrated Gramian; the certified
    /// excitation level over the window.
    pub lambda_min: f64,
    /// Time covered by the window.
    pub window_span: f64,
    /// Set when the window held no samples and the metric defaulted to 0.
    pub empty: bool,
}

/// Smallest eigenvalue of the trapezoidal integral of `D D^T` over the
/// trailing window. The integrand is a sum of positive-semidefinite
/// matrices, so the result is nonnegative up to eigensolver rounding.
pub fn pe_metric(window: &PeWindow) -> PeMetric {
    let mut it = window.iter();
    let Some((t_first, first)) = it.next() else {
        return PeMetric { lambda_min: 0.0, window_span: 0.0, empty: true };
    };
    let n = first.nrows();
    let mut integral = DMatrix::<f64>::zeros(n, n);
    let mut prev_t = *t_first;
    let mut prev_m = first;
    let mut last_t = *t_first;
    for (t, m) in it {
        integral += (t - prev_t) * 0.5 * (prev_m + m);
        prev_t = *t;
        prev_m = m;
        last_t = *t;
    }
    let lambda_min = integral
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    PeMetric {
        lambda_min: if lambda_min.is_finite() { lambda_min } else { 0.0 },
        window_span: last_t - t_first,
        empty: false,
    }
}

/// Live estimator state: the current estimate plus the excitation window.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub theta_hat: DVector<f64>,
    pub window: PeWindow,
    /// Per-parameter adaptation gains applied componentwise to the raw
    /// update direction. Unit gains give the law exactly as written; the
    /// update is a gradient flow, so unequal regressor column scales turn
    /// into unequal channel loop gains unless compensated here.
    pub gain: DVector<f64>,
}

impl EstimatorState {
    /// Unit-gain estimator over a given excitation window span.
    pub fn new(theta0: DVector<f64>, window_span: f64) -> Self {
        let p = theta0.len();
        Self {
            theta_hat: theta0,
            window: PeWindow::new(window_span),
            gain: DVector::from_element(p, 1.0),
        }
    }

    pub fn with_gain(mut self, gain: DVector<f64>) -> Self {
        self.gain = gain;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_regressor(a: f64, b: f64, c: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[a, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, c])
    }

    #[test]
    fn zero_error_freezes_estimate() {
        let d = diag_regressor(1.0, -50.0, 50.0);
        let rhs = estimator_rhs(&d, &DVector::zeros(3)).unwrap();
        assert_eq!(rhs, DVector::zeros(3));
    }

    #[test]
    fn update_from_initial_mismatch() {
        let d = diag_regressor(1.0, -50.0, 50.0);
        let e = DVector::from_vec(vec![-800.0, 40.0, 19000.0]);
        let rhs = estimator_rhs(&d, &e).unwrap();
        assert_eq!(rhs, DVector::from_vec(vec![800.0, 2000.0, -950000.0]));
    }

    #[test]
    fn single_column_coupling() {
        let d = diag_regressor(1.0, -50.0, 50.0);
        let e = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let rhs = estimator_rhs(&d, &e).unwrap();
        assert_eq!(rhs, DVector::from_vec(vec![-1.0, 0.0, 0.0]));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let d = diag_regressor(1.0, 1.0, 1.0);
        let e = DVector::zeros(2);
        assert!(estimator_rhs(&d, &e).is_err());
    }

    #[test]
    fn rhs_is_linear_in_error() {
        let d = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 3.0, 0.0, 4.0]);
        let e1 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let e2 = DVector::from_vec(vec![-0.3, 0.9, 2.0]);
        let (a, b) = (2.5, -1.25);
        let combined = estimator_rhs(&d, &(a * &e1 + b * &e2)).unwrap();
        let separate = a * estimator_rhs(&d, &e1).unwrap() + b * estimator_rhs(&d, &e2).unwrap();
        assert!((combined - separate).norm() <= 1e-12);
    }

    #[test]
    fn pe_metric_of_constant_identity_window() {
        let mut w = PeWindow::new(1.0);
        // D = I so D D^T = I; 11 samples spanning exactly one time unit
        let d = DMatrix::<f64>::identity(3, 3);
        for i in 0..=10 {
            w.push(i as f64 * 0.1, &d);
        }
        let m = pe_metric(&w);
        assert!(!m.empty);
        assert!((m.lambda_min - 1.0).abs() <= 1e-12, "{}", m.lambda_min);
    }

    #[test]
    fn pe_metric_of_zero_regressor() {
        let mut w = PeWindow::new(1.0);
        let d = DMatrix::<f64>::zeros(3, 3);
        for i in 0..=10 {
            w.push(i as f64 * 0.1, &d);
        }
        assert_eq!(pe_metric(&w).lambda_min, 0.0);
    }

    #[test]
    fn pe_metric_of_empty_window_is_flagged() {
        let w = PeWindow::new(5.0);
        let m = pe_metric(&w);
        assert!(m.empty);
        assert_eq!(m.lambda_min, 0.0);
    }

    #[test]
    fn window_eviction_keeps_trailing_span() {
        let mut w = PeWindow::new(0.5);
        let d = DMatrix::<f64>::identity(2, 2);
        for i in 0..100 {
            w.push(i as f64 * 0.01, &d);
        }
        let span = {
            let times: Vec<f64> = w.iter().map(|(t, _)| *t).collect();
            times.last().unwrap() - times.first().unwrap()
        };
        assert!(span <= 0.5 + 1e-12, "span {span}");
        assert!(w.len() >= 50);
    }

    #[test]
    fn estimator_state_carries_gain() {
        let est = EstimatorState::new(DVector::from_vec(vec![1.0, 2.0, 3.0]), 5.0);
        assert_eq!(est.gain, DVector::from_element(3, 1.0));
        let probe = EstimatorState::new(DVector::zeros(3), 5.0)
            .with_gain(DVector::from_vec(vec![1.0, 6e-4, 6e-4]));
        assert_eq!(probe.gain[1], 6e-4);
    }
}
