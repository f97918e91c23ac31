//! Drive/response system interface and the concrete three-state viral
//! infection model.
//!
//! The estimation engine works on systems of the form
//!
//! ```text
//! drive:     x' = g(x) + D(x) theta        (theta unknown, possibly varying)
//! response:  y' = g(y) + D(y) theta_hat + u
//! ```
//!
//! where `g` collects all terms whose parameters are known and each column
//! of the regressor `D` multiplies one unknown parameter. [`ModelSpec`]
//! packages `g`, `D` and the analytic derivatives the horizon solver needs.
//!
//! The concrete model tracks uninfected CD4+ T cells (`x1`), infected cells
//! (`x2`) and free virions (`x3`):
//!
//! ```text
//! x1' = s - d*x1 - beta*x1*x3
//! x2' = beta*x1*x3 - mu1*x2
//! x3' = k*x2 - mu2*x3
//! ```
//!
//! All six rates enter linearly, so any subset can be moved into the
//! regressor and estimated.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type StateFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type RegressorFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type JacobianFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type ParamJacobianFn =
    Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type HessContractFn =
    Box<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A nonlinear system split as `g(y) + D(y)*theta`, with the derivatives
/// required by the backward-sweep solver.
///
/// All callbacks are pure; a `ModelSpec` can be shared freely between
/// concurrent simulations.
pub struct ModelSpec {
    /// State dimension.
    pub n: usize,
    /// Number of unknown parameters (regressor columns).
    pub p: usize,
    /// Known part of the dynamics.
    pub g: StateFn,
    /// Regressor `D(y)`, one `n`-column per unknown parameter.
    pub regressor: RegressorFn,
    /// `dg/dy`.
    pub jac_g: JacobianFn,
    /// `d[D(y) theta]/dy` for a given parameter vector.
    pub jac_d_theta: ParamJacobianFn,
    /// `sum_i lambda_i d2 f_i/dy2` with `f = g + D theta`; symmetric by
    /// construction.
    pub hess_contract: HessContractFn,
}

impl ModelSpec {
    /// Full right-hand side `g(y) + D(y)*theta`.
    pub fn f(&self, y: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        (self.g)(y) + (self.regressor)(y) * theta
    }

    /// Full state Jacobian `d[g + D theta]/dy`.
    pub fn jac_f(&self, y: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
        (self.jac_g)(y) + (self.jac_d_theta)(y, theta)
    }
}

/// The six rate constants of the infection model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HivParams {
    /// Proliferation rate of uninfected cells (cells mm^-3 day^-1).
    pub s: f64,
    /// Death rate of uninfected cells (day^-1).
    pub d: f64,
    /// Infection rate (mm^3 day^-1).
    pub beta: f64,
    /// Death rate of infected cells (day^-1).
    pub mu1: f64,
    /// Virion production rate (virions cell^-1 day^-1).
    pub k: f64,
    /// Virion clearance rate (day^-1).
    pub mu2: f64,
}

impl HivParams {
    pub fn new(s: f64, d: f64, beta: f64, mu1: f64, k: f64, mu2: f64) -> Self {
        Self { s, d, beta, mu1, k, mu2 }
    }

    /// All six rates must be strictly positive for a physical model.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s", self.s),
            ("d", self.d),
            ("beta", self.beta),
            ("mu1", self.mu1),
            ("k", self.k),
            ("mu2", self.mu2),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "model parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn get(&self, which: UnknownParam) -> f64 {
        match which {
            UnknownParam::S => self.s,
            UnknownParam::D => self.d,
            UnknownParam::Beta => self.beta,
            UnknownParam::Mu1 => self.mu1,
            UnknownParam::K => self.k,
            UnknownParam::Mu2 => self.mu2,
        }
    }

    fn set(&mut self, which: UnknownParam, value: f64) {
        match which {
            UnknownParam::S => self.s = value,
            UnknownParam::D => self.d = value,
            UnknownParam::Beta => self.beta = value,
            UnknownParam::Mu1 => self.mu1 = value,
            UnknownParam::K => self.k = value,
            UnknownParam::Mu2 => self.mu2 = value,
        }
    }
}

/// A scalar parameter trajectory: fixed, or modulated by a raised cosine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSignal {
    Constant(f64),
    /// `base * (1 - depth * cos(omega * t))`.
    Sinusoid { base: f64, depth: f64, omega: f64 },
}

impl ParamSignal {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            ParamSignal::Constant(v) => v,
            ParamSignal::Sinusoid { base, depth, omega } => base * (1.0 - depth * (omega * t).cos()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ParamSignal::Constant(_))
    }
}

/// One [`ParamSignal`] per model rate; evaluating at `t` yields the drive
/// system's parameter values for that instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HivSignals {
    pub s: ParamSignal,
    pub d: ParamSignal,
    pub beta: ParamSignal,
    pub mu1: ParamSignal,
    pub k: ParamSignal,
    pub mu2: ParamSignal,
}

impl HivSignals {
    pub fn constant(p: HivParams) -> Self {
        Self {
            s: ParamSignal::Constant(p.s),
            d: ParamSignal::Constant(p.d),
            beta: ParamSignal::Constant(p.beta),
            mu1: ParamSignal::Constant(p.mu1),
            k: ParamSignal::Constant(p.k),
            mu2: ParamSignal::Constant(p.mu2),
        }
    }

    pub fn at(&self, t: f64) -> HivParams {
        HivParams {
            s: self.s.at(t),
            d: self.d.at(t),
            beta: self.beta.at(t),
            mu1: self.mu1.at(t),
            k: self.k.at(t),
            mu2: self.mu2.at(t),
        }
    }

    pub fn signal(&self, which: UnknownParam) -> ParamSignal {
        match which {
            UnknownParam::S => self.s,
            UnknownParam::D => self.d,
            UnknownParam::Beta => self.beta,
            UnknownParam::Mu1 => self.mu1,
            UnknownParam::K => self.k,
            UnknownParam::Mu2 => self.mu2,
        }
    }
}

/// Identifies one of the six model rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnknownParam {
    S,
    D,
    Beta,
    Mu1,
    K,
    Mu2,
}

impl UnknownParam {
    pub const ALL: [UnknownParam; 6] = [
        UnknownParam::S,
        UnknownParam::D,
        UnknownParam::Beta,
        UnknownParam::Mu1,
        UnknownParam::K,
        UnknownParam::Mu2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            UnknownParam::S => "s",
            UnknownParam::D => "d",
            UnknownParam::Beta => "beta",
            UnknownParam::Mu1 => "mu1",
            UnknownParam::K => "k",
            UnknownParam::Mu2 => "mu2",
        }
    }
}

impl std::fmt::Display for UnknownParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for UnknownParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" => Ok(UnknownParam::S),
            "d" => Ok(UnknownParam::D),
            "beta" => Ok(UnknownParam::Beta),
            "mu1" => Ok(UnknownParam::Mu1),
            "k" => Ok(UnknownParam::K),
            "mu2" => Ok(UnknownParam::Mu2),
            other => Err(Error::InvalidConfig(format!(
                "unknown parameter name '{other}' (expected one of s, d, beta, mu1, k, mu2)"
            ))),
        }
    }
}

/// An ordered, duplicate-free set of parameters to estimate.
///
/// The ordering is canonical (`s, d, beta, mu1, k, mu2`) and fixes the
/// meaning of each regressor column and each estimate component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSet(Vec<UnknownParam>);

impl UnknownSet {
    pub fn new(params: &[UnknownParam]) -> Result<Self> {
        let mut members: Vec<UnknownParam> = UnknownParam::ALL
            .iter()
            .copied()
            .filter(|p| params.contains(p))
            .collect();
        members.dedup();
        if members.is_empty() {
            return Err(Error::EmptyUnknownSet);
        }
        Ok(Self(members))
    }

    pub fn from_names(names: &[impl AsRef<str>]) -> Result<Self> {
        let parsed: Vec<UnknownParam> = names
            .iter()
            .map(|n| n.as_ref().parse())
            .collect::<Result<_>>()?;
        Self::new(&parsed)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: UnknownParam) -> bool {
        self.0.contains(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = UnknownParam> + '_ {
        self.0.iter().copied()
    }

    pub fn members(&self) -> &[UnknownParam] {
        &self.0
    }

    /// True parameter values for the members, in column order.
    pub fn true_values(&self, p: &HivParams) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.iter().map(|u| p.get(u)))
    }
}

/// Right-hand side of the infection model.
pub fn hiv_rhs(x: &DVector<f64>, p: &HivParams) -> DVector<f64> {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    DVector::from_vec(vec![
        p.s - p.d * x1 - p.beta * x1 * x3,
        p.beta * x1 * x3 - p.mu1 * x2,
        p.k * x2 - p.mu2 * x3,
    ])
}

/// State Jacobian of [`hiv_rhs`]; linear in the parameters, so it splits
/// exactly between known and estimated contributions.
fn hiv_rhs_jacobian(x: &DVector<f64>, p: &HivParams) -> DMatrix<f64> {
    let (x1, x3) = (x[0], x[2]);
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -p.d - p.beta * x3, 0.0,    -p.beta * x1,
            p.beta * x3,        -p.mu1, p.beta * x1,
            0.0,                p.k,    -p.mu2,
        ],
    )
}

/// Regressor column for a single unknown parameter.
fn hiv_column(which: UnknownParam, x: &DVector<f64>) -> DVector<f64> {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    let col = match which {
        UnknownParam::S => [1.0, 0.0, 0.0],
        UnknownParam::D => [-x1, 0.0, 0.0],
        UnknownParam::Beta => [-x1 * x3, x1 * x3, 0.0],
        UnknownParam::Mu1 => [0.0, -x2, 0.0],
        UnknownParam::K => [0.0, 0.0, x2],
        UnknownParam::Mu2 => [0.0, 0.0, -x3],
    };
    DVector::from_row_slice(&col)
}

/// Zeroes the members of `unknown` in a copy of `p`.
fn mask_unknowns(p: &HivParams, unknown: &UnknownSet) -> HivParams {
    let mut masked = *p;
    for u in unknown.iter() {
        masked.set(u, 0.0);
    }
    masked
}

/// Packs an estimate vector into a parameter struct with all known rates
/// zeroed, so the linear-in-parameters Jacobian formula can be reused for
/// the estimated contribution alone.
fn params_from_estimate(estimate: &DVector<f64>, unknown: &UnknownSet) -> HivParams {
    let mut p = HivParams::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, u) in unknown.iter().enumerate() {
        p.set(u, estimate[i]);
    }
    p
}

/// Merges known rates with the current estimate of the unknown ones.
pub fn merge_estimate(known: &HivParams, estimate: &DVector<f64>, unknown: &UnknownSet) -> HivParams {
    let mut p = *known;
    for (i, u) in unknown.iter().enumerate() {
        p.set(u, estimate[i]);
    }
    p
}

/// Splits the infection model into known dynamics `g` and a regressor `D`
/// with one column per member of `unknown`, such that
/// `g(y) + D(y)*theta_true == hiv_rhs(y, params_true)` identically.
///
/// `known` supplies the rates that stay in `g`; values of parameters listed
/// in `unknown` are ignored there.
pub fn hiv_split(unknown: &UnknownSet, known: &HivParams) -> Result<ModelSpec> {
    if unknown.is_empty() {
        return Err(Error::EmptyUnknownSet);
    }
    let p = unknown.len();
    let masked = mask_unknowns(known, unknown);
    let members: Vec<UnknownParam> = unknown.members().to_vec();
    let beta_known = !unknown.contains(UnknownParam::Beta);
    let beta_index = members.iter().position(|&u| u == UnknownParam::Beta);
    let beta_value = known.beta;
    let jac_members = unknown.clone();

    Ok(ModelSpec {
        n: 3,
        p,
        g: Box::new(move |y| hiv_rhs(y, &masked)),
        regressor: Box::new(move |y| {
            let mut d = DMatrix::zeros(3, members.len());
            for (j, &u) in members.iter().enumerate() {
                d.set_column(j, &hiv_column(u, y));
            }
            d
        }),
        jac_g: Box::new(move |y| hiv_rhs_jacobian(y, &masked)),
        jac_d_theta: Box::new(move |y, theta| {
            hiv_rhs_jacobian(y, &params_from_estimate(theta, &jac_members))
        }),
        hess_contract: Box::new(move |_y, theta, lambda| {
            // beta*y1*y3 is the only nonlinear term in the dynamics.
            let beta_eff = if beta_known {
                beta_value
            } else {
                theta[beta_index.expect("beta is a member when not known")]
            };
            let v = (lambda[1] - lambda[0]) * beta_eff;
            let mut h = DMatrix::zeros(3, 3);
            h[(0, 2)] = v;
            h[(2, 0)] = v;
            h
        }),
    })
}

/// Jacobian of the response dynamics `g + D*theta_hat` with the current
/// estimate substituted for the unknown rates.
pub fn hiv_jacobian(
    y: &DVector<f64>,
    estimate: &DVector<f64>,
    unknown: &UnknownSet,
    known: &HivParams,
) -> Result<DMatrix<f64>> {
    if estimate.len() != unknown.len() {
        return Err(Error::DimensionMismatch {
            what: "hiv_jacobian estimate",
            expected: unknown.len(),
            got: estimate.len(),
        });
    }
    Ok(hiv_rhs_jacobian(y, &merge_estimate(known, estimate, unknown)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn preset_params() -> HivParams {
        HivParams::new(36.0, 0.108, 9e-5, 0.5, 500.0, 3.0)
    }

    fn random_state(rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_vec(vec![
            rng.gen_range(0.0..2000.0),
            rng.gen_range(0.0..200.0),
            rng.gen_range(0.0..25000.0),
        ])
    }

    #[test]
    fn rhs_at_preset_initial_condition() {
        let x = DVector::from_vec(vec![1000.0, 10.0, 1000.0]);
        let f = hiv_rhs(&x, &preset_params());
        assert_relative_eq!(f[0], -162.0, max_relative = 1e-12);
        assert_relative_eq!(f[1], 85.0, max_relative = 1e-12);
        assert_relative_eq!(f[2], 2000.0, max_relative = 1e-12);
    }

    #[test]
    fn rhs_vanishes_at_equilibrium() {
        // x1 = mu1*mu2/(beta*k), x2 = (s - d*x1)/mu1, x3 = k*x2/mu2
        let p = preset_params();
        let x1 = p.mu1 * p.mu2 / (p.beta * p.k);
        let x2 = (p.s - p.d * x1) / p.mu1;
        let x3 = p.k * x2 / p.mu2;
        assert_relative_eq!(x1, 100.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(x2, 64.8, max_relative = 1e-12);
        assert_relative_eq!(x3, 10800.0, max_relative = 1e-12);
        let f = hiv_rhs(&DVector::from_vec(vec![x1, x2, x3]), &p);
        let scale = (x1 * x1 + x2 * x2 + x3 * x3).sqrt();
        assert!(f.norm() <= 1e-9 * scale, "residual {}", f.norm());
    }

    #[test]
    fn rhs_at_origin_keeps_only_source_term() {
        let f = hiv_rhs(&DVector::zeros(3), &preset_params());
        assert_eq!(f, DVector::from_vec(vec![36.0, 0.0, 0.0]));
    }

    #[test]
    fn split_regressor_for_s_mu1_k() {
        let unknown = UnknownSet::from_names(&["s", "mu1", "k"]).unwrap();
        let model = hiv_split(&unknown, &preset_params()).unwrap();
        let y = DVector::from_vec(vec![200.0, 50.0, 20000.0]);
        let d = (model.regressor)(&y);
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.0, 0.0, 0.0, -50.0, 0.0, 0.0, 0.0, 50.0],
        );
        assert_eq!(d, expected);
    }

    #[test]
    fn split_regressor_for_beta_alone() {
        let unknown = UnknownSet::from_names(&["beta"]).unwrap();
        let model = hiv_split(&unknown, &preset_params()).unwrap();
        let y = DVector::from_vec(vec![1000.0, 10.0, 1000.0]);
        let d = (model.regressor)(&y);
        assert_eq!(d, DMatrix::from_row_slice(3, 1, &[-1e6, 1e6, 0.0]));
    }

    #[test]
    fn split_recombination_identity() {
        let p = preset_params();
        let unknown = UnknownSet::from_names(&["s", "mu1", "k"]).unwrap();
        let model = hiv_split(&unknown, &p).unwrap();
        let theta = unknown.true_values(&p);
        assert_eq!(theta, DVector::from_vec(vec![36.0, 0.5, 500.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let y = random_state(&mut rng);
            let full = hiv_rhs(&y, &p);
            let recombined = model.f(&y, &theta);
            let err = (&recombined - &full).norm();
            assert!(err <= 1e-12 * (1.0 + full.norm()), "err {err}");
        }
    }

    #[test]
    fn split_recombination_all_singletons() {
        let p = preset_params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for u in UnknownParam::ALL {
            let unknown = UnknownSet::new(&[u]).unwrap();
            let model = hiv_split(&unknown, &p).unwrap();
            let theta = unknown.true_values(&p);
            for _ in 0..20 {
                let y = random_state(&mut rng);
                let full = hiv_rhs(&y, &p);
                let err = (model.f(&y, &theta) - &full).norm();
                assert!(err <= 1e-12 * (1.0 + full.norm()), "{u}: err {err}");
            }
        }
    }

    #[test]
    fn empty_unknown_set_is_rejected() {
        let no_names: &[&str] = &[];
        assert!(matches!(
            UnknownSet::from_names(no_names),
            Err(Error::EmptyUnknownSet)
        ));
    }

    #[test]
    fn jacobian_example_values() {
        let unknown = UnknownSet::from_names(&["s", "mu1", "k"]).unwrap();
        let y = DVector::from_vec(vec![200.0, 50.0, 20000.0]);
        let theta = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let j = hiv_jacobian(&y, &theta, &unknown, &preset_params()).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                -1.908, 0.0, -0.018,
                1.8, -1.0, 0.018,
                0.0, 1.0, -3.0,
            ],
        );
        assert_relative_eq!(j, expected, max_relative = 1e-12);
    }

    #[test]
    fn jacobian_at_origin() {
        let unknown = UnknownSet::from_names(&["s", "mu1", "k"]).unwrap();
        let theta = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let j = hiv_jacobian(&DVector::zeros(3), &theta, &unknown, &preset_params()).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[-0.108, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, -3.0],
        );
        assert_relative_eq!(j, expected, max_relative = 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = preset_params();
        let unknown = UnknownSet::from_names(&["s", "mu1", "k"]).unwrap();
        let model = hiv_split(&unknown, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let y = random_state(&mut rng);
            let theta = DVector::from_vec(vec![
                rng.gen_range(0.1..80.0),
                rng.gen_range(0.1..2.0),
                rng.gen_range(1.0..900.0),
            ]);
            let analytic = model.jac_f(&y, &theta);
            let fd = crate::oracle::fd_jacobian(|v| model.f(v, &theta), &y, 1e-5);
            let rel = (&analytic - &fd).norm() / analytic.norm().max(1e-12);
            assert!(rel <= 1e-6, "rel err {rel}");
        }
    }

    #[test]
    fn split_jacobian_terms_match_finite_differences_separately() {
        let p = preset_params();
        let unknown = UnknownSet::from_names(&["d", "beta", "mu2"]).unwrap();
        let model = hiv_split(&unknown, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..100 {
            let y = random_state(&mut rng);
            let theta = DVector::from_vec(vec![
                rng.gen_range(0.01..0.5),
                rng.gen_range(1e-5..5e-4),
                rng.gen_range(0.5..8.0),
            ]);

            let fd_g = crate::oracle::fd_jacobian(|v| (model.g)(v), &y, 1e-5);
            let analytic_g = (model.jac_g)(&y);
            let rel_g = (&analytic_g - &fd_g).norm() / fd_g.norm().max(1e-12);
            assert!(rel_g <= 1e-6, "jac_g rel err {rel_g}");

            let fd_dt = crate::oracle::fd_jacobian(|v| (model.regressor)(v) * &theta, &y, 1e-5);
            let analytic_dt = (model.jac_d_theta)(&y, &theta);
            let rel_dt = (&analytic_dt - &fd_dt).norm() / fd_dt.norm().max(1e-12);
            assert!(rel_dt <= 1e-6, "jac_d_theta rel err {rel_dt}");
        }
    }

    #[test]
    fn hess_contract_structure_and_symmetry() {
        let p = preset_params();
        let unknown = UnknownSet::from_names(&["s", "mu1", "k"]).unwrap();
        let model = hiv_split(&unknown, &p).unwrap();
        let y = DVector::from_vec(vec![150.0, 40.0, 9000.0]);
        let theta = DVector::from_vec(vec![20.0, 0.7, 300.0]);
        let lambda = DVector::from_vec(vec![2.0, -1.5, 0.25]);
        let h = (model.hess_contract)(&y, &theta, &lambda);
        let v = (lambda[1] - lambda[0]) * p.beta;
        for i in 0..3 {
            for j in 0..3 {
                let expected = if (i, j) == (0, 2) || (i, j) == (2, 0) { v } else { 0.0 };
                assert_eq!(h[(i, j)], expected);
            }
        }
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn hess_contract_matches_jacobian_differences() {
        // directional derivative of the Jacobian contracted with lambda
        let p = preset_params();
        let unknown = UnknownSet::from_names(&["s", "beta", "k"]).unwrap();
        let model = hiv_split(&unknown, &p).unwrap();
        let y = DVector::from_vec(vec![300.0, 22.0, 5000.0]);
        let theta = DVector::from_vec(vec![30.0, 8e-5, 450.0]);
        let lambda = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let analytic = (model.hess_contract)(&y, &theta, &lambda);
        let h = 1e-4;
        let mut fd = DMatrix::zeros(3, 3);
        for j in 0..3 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[j] += h;
            ym[j] -= h;
            let col =
                (model.jac_f(&yp, &theta) - model.jac_f(&ym, &theta)).transpose() * &lambda / (2.0 * h);
            fd.set_column(j, &col);
        }
        assert_relative_eq!(analytic, fd, epsilon = 1e-6);
    }

    #[test]
    fn callbacks_are_pure() {
        let p = preset_params();
        let unknown = UnknownSet::from_names(&["s", "mu1", "k"]).unwrap();
        let model = hiv_split(&unknown, &p).unwrap();
        let y = DVector::from_vec(vec![123.4, 5.6, 789.0]);
        let theta = DVector::from_vec(vec![3.0, 0.4, 100.0]);
        let a = model.f(&y, &theta);
        let b = model.f(&y, &theta);
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sinusoid_at_zero_is_base_times_one_minus_depth() {
        let sig = ParamSignal::Sinusoid { base: 36.0, depth: 0.9, omega: std::f64::consts::PI / 1000.0 };
        assert_relative_eq!(sig.at(0.0), 3.6, max_relative = 1e-12);
    }

    #[test]
    fn unknown_set_is_canonically_ordered() {
        let set = UnknownSet::from_names(&["k", "s", "mu1"]).unwrap();
        let names: Vec<_> = set.iter().map(|u| u.name()).collect();
        assert_eq!(names, vec!["s", "mu1", "k"]);
    }
}
