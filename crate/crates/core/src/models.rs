//! Simulable models and their auxiliary statistics.
//!
//! A [`Model`] maps a parameter vector and a [`ShockPack`] of primitive draws
//! to a dataset, and a dataset to a vector of auxiliary statistics. Shock packs
//! hold untransformed primitives so the same pack can be pushed through the
//! model at many parameter values (common random numbers).

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::numlin::{ols_fit, Matrix};
use crate::streams::{stream, Purpose};

/// How many primitive draws of each kind a model needs per dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShockSpec {
    pub nobs: usize,
    pub normals_per_obs: usize,
    pub uniforms_per_obs: usize,
}

/// Primitive random draws for one synthetic dataset.
#[derive(Clone, PartialEq)]
pub struct ShockPack {
    seed: u64,
    index: u64,
    normals: Vec<f64>,
    uniforms: Vec<f64>,
}

impl ShockPack {
    /// Draws a pack from stream `index` of the shock family for `seed`.
    pub fn generate(spec: ShockSpec, seed: u64, index: u64) -> Self {
        Self::generate_from(spec, seed, Purpose::Shocks, index)
    }

    fn generate_from(spec: ShockSpec, seed: u64, purpose: Purpose, index: u64) -> Self {
        let mut rng = stream(seed, purpose, index);
        let normals = (0..spec.nobs * spec.normals_per_obs)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let uniforms = (0..spec.nobs * spec.uniforms_per_obs)
            .map(|_| rng.sample(Open01))
            .collect();
        Self {
            seed,
            index,
            normals,
            uniforms,
        }
    }

    /// Wraps explicit primitives, mostly for tests and worked examples.
    pub fn from_parts(normals: Vec<f64>, uniforms: Vec<f64>) -> Self {
        Self {
            seed: 0,
            index: 0,
            normals,
            uniforms,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn normals(&self) -> &[f64] {
        &self.normals
    }

    pub fn uniforms(&self) -> &[f64] {
        &self.uniforms
    }

    fn check(&self, spec: ShockSpec) -> Result<()> {
        if self.normals.len() < spec.nobs * spec.normals_per_obs
            || self.uniforms.len() < spec.nobs * spec.uniforms_per_obs
        {
            return Err(Error::Dimension(format!(
                "shock pack has {} normals and {} uniforms, model needs {} and {}",
                self.normals.len(),
                self.uniforms.len(),
                spec.nobs * spec.normals_per_obs,
                spec.nobs * spec.uniforms_per_obs
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for ShockPack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShockPack")
            .field("seed", &self.seed)
            .field("index", &self.index)
            .field("normals", &self.normals.len())
            .field("uniforms", &self.uniforms.len())
            .finish()
    }
}

/// The shock pack for draw `b` under `seed`, sized for `model`.
pub fn make_shockpack(model: &dyn Model, seed: u64, b: u64) -> ShockPack {
    ShockPack::generate(model.shock_spec(), seed, b)
}

/// Synthetic "observed" data at `theta0`, drawn from a stream family disjoint
/// from the shock packs used by the samplers.
pub fn simulate_observed(model: &dyn Model, theta0: &[f64], seed: u64) -> Result<Dataset> {
    let pack = ShockPack::generate_from(model.shock_spec(), seed, Purpose::Data, 0);
    model.simulate(theta0, &pack)
}

/// Observed or simulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset(Vec<f64>);

impl Dataset {
    pub fn new(observations: Vec<f64>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Dimension("dataset must not be empty".into()));
        }
        if let Some(bad) = observations.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("observation {bad} is not finite")));
        }
        Ok(Self(observations))
    }

    pub fn observations(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A vector of named auxiliary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxStats {
    pub values: Vec<f64>,
    pub labels: Arc<[String]>,
}

impl AuxStats {
    pub fn new(values: Vec<f64>, labels: Arc<[String]>) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} statistics but {} labels",
                values.len(),
                labels.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "statistic '{}' is not finite",
                labels[bad]
            )));
        }
        Ok(Self { values, labels })
    }

    /// Unlabelled statistics, e.g. an observed vector typed in by hand.
    pub fn unlabelled(values: Vec<f64>) -> Result<Self> {
        let labels: Arc<[String]> = (1..=values.len()).map(|i| format!("psi_{i}")).collect();
        Self::new(values, labels)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Open interval (lo, hi); either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A simulable parametric model with auxiliary statistics.
pub trait Model: Send + Sync {
    /// Registry name, e.g. `"normal-ji"`.
    fn name(&self) -> &str;

    fn param_dim(&self) -> usize;

    fn aux_dim(&self) -> usize;

    /// Parameter names, length `param_dim`.
    fn param_labels(&self) -> Vec<String>;

    /// Open interval per parameter outside of which `simulate` fails.
    fn support(&self) -> Vec<Interval>;

    fn shock_spec(&self) -> ShockSpec;

    fn simulate(&self, theta: &[f64], shocks: &ShockPack) -> Result<Dataset>;

    fn aux_stats(&self, data: &Dataset) -> Result<AuxStats>;

    /// A moment-matching starting point for optimisation.
    fn initial_guess(&self, psi_hat: &[f64]) -> Vec<f64>;

    /// Closed-form Jacobian of θ ↦ ψ(θ, shocks), where one is known.
    fn analytic_jacobian(&self, _theta: &[f64], _shocks: &ShockPack) -> Option<Result<Matrix>> {
        None
    }

    fn check_param(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::Dimension(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.param_dim(),
                theta.len()
            )));
        }
        for ((i, x), iv) in theta.iter().enumerate().zip(self.support()) {
            if !iv.contains(*x) {
                return Err(Error::Domain(format!(
                    "{} parameter {} = {x} outside ({}, {})",
                    self.name(),
                    self.param_labels()[i],
                    iv.lo,
                    iv.hi
                )));
            }
        }
        Ok(())
    }

    /// Auxiliary statistics of the dataset simulated at `theta`.
    fn psi(&self, theta: &[f64], shocks: &ShockPack) -> Result<AuxStats> {
        self.aux_stats(&self.simulate(theta, shocks)?)
    }
}

fn labels(names: &[&str]) -> Arc<[String]> {
    names.iter().map(|s| s.to_string()).collect()
}

fn check_len(model: &dyn Model, data: &Dataset, nobs: usize) -> Result<()> {
    if data.len() != nobs {
        return Err(Error::Dimension(format!(
            "{} expects {nobs} observations, got {}",
            model.name(),
            data.len()
        )));
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Centred sample moment with divisor n.
fn central_moment(xs: &[f64], centre: f64, k: i32) -> f64 {
    xs.iter().map(|x| (x - centre).powi(k)).sum::<f64>() / xs.len() as f64
}

/// Which statistics the normal model reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalStats {
    /// θ = m with the variance known; ψ = ȳ.
    MeanOnly { sigma2: f64 },
    /// θ = (m, σ²); ψ = (ȳ, σ̂²).
    JustIdentified,
    /// θ = (m, σ²); ψ = (ȳ, σ̂², μ̂₃/σ̂², μ̂₄/σ̂⁴) with centred moments.
    OverIdentified,
}

/// y_t = m + σ ε_t with ε_t standard normal.
#[derive(Debug, Clone)]
pub struct NormalModel {
    nobs: usize,
    stats: NormalStats,
    labels: Arc<[String]>,
}

impl NormalModel {
    pub fn new(nobs: usize, stats: NormalStats) -> Result<Self> {
        if nobs == 0 {
            return Err(Error::Precondition("normal model needs T >= 1".into()));
        }
        if let NormalStats::MeanOnly { sigma2 } = stats {
            if !(sigma2 > 0.0 && sigma2.is_finite()) {
                return Err(Error::Domain(format!(
                    "known variance {sigma2} must be positive"
                )));
            }
        }
        let labels = match stats {
            NormalStats::MeanOnly { .. } => labels(&["mean"]),
            NormalStats::JustIdentified => labels(&["mean", "variance"]),
            NormalStats::OverIdentified => {
                labels(&["mean", "variance", "mu3_over_var", "mu4_over_var2"])
            }
        };
        Ok(Self {
            nobs,
            stats,
            labels,
        })
    }

    pub fn stats(&self) -> NormalStats {
        self.stats
    }

    fn mean_and_sd(&self, theta: &[f64]) -> (f64, f64) {
        match self.stats {
            NormalStats::MeanOnly { sigma2 } => (theta[0], sigma2.sqrt()),
            _ => (theta[0], theta[1].sqrt()),
        }
    }
}

impl Model for NormalModel {
    fn name(&self) -> &str {
        match self.stats {
            NormalStats::MeanOnly { .. } => "normal-mean",
            NormalStats::JustIdentified => "normal-ji",
            NormalStats::OverIdentified => "normal-oi",
        }
    }

    fn param_dim(&self) -> usize {
        match self.stats {
            NormalStats::MeanOnly { .. } => 1,
            _ => 2,
        }
    }

    fn aux_dim(&self) -> usize {
        self.labels.len()
    }

    fn param_labels(&self) -> Vec<String> {
        match self.stats {
            NormalStats::MeanOnly { .. } => vec!["m".into()],
            _ => vec!["m".into(), "sigma2".into()],
        }
    }

    fn support(&self) -> Vec<Interval> {
        match self.stats {
            NormalStats::MeanOnly { .. } => vec![Interval::REAL],
            _ => vec![Interval::REAL, Interval::POSITIVE],
        }
    }

    fn shock_spec(&self) -> ShockSpec {
        ShockSpec {
            nobs: self.nobs,
            normals_per_obs: 1,
            uniforms_per_obs: 0,
        }
    }

    fn simulate(&self, theta: &[f64], shocks: &ShockPack) -> Result<Dataset> {
        self.check_param(theta)?;
        shocks.check(self.shock_spec())?;
        let (m, sd) = self.mean_and_sd(theta);
        Dataset::new(
            shocks.normals[..self.nobs]
                .iter()
                .map(|e| m + sd * e)
                .collect(),
        )
    }

    fn aux_stats(&self, data: &Dataset) -> Result<AuxStats> {
        check_len(self, data, self.nobs)?;
        let y = data.observations();
        let ybar = mean(y);
        let values = match self.stats {
            NormalStats::MeanOnly { .. } => vec![ybar],
            NormalStats::JustIdentified => vec![ybar, central_moment(y, ybar, 2)],
            NormalStats::OverIdentified => {
                let s2 = central_moment(y, ybar, 2);
                if !(s2 > 0.0) {
                    return Err(Error::Domain(
                        "over-identified normal statistics need positive sample variance".into(),
                    ));
                }
                let m3 = central_moment(y, ybar, 3);
                let m4 = central_moment(y, ybar, 4);
                vec![ybar, s2, m3 / s2, m4 / (s2 * s2)]
            }
        };
        AuxStats::new(values, self.labels.clone())
    }

    fn initial_guess(&self, psi_hat: &[f64]) -> Vec<f64> {
        match self.stats {
            NormalStats::MeanOnly { .. } => vec![psi_hat[0]],
            _ => vec![psi_hat[0], psi_hat[1].max(1e-3)],
        }
    }

    fn analytic_jacobian(&self, theta: &[f64], shocks: &ShockPack) -> Option<Result<Matrix>> {
        let eps = &shocks.normals[..self.nobs.min(shocks.normals.len())];
        let ebar = mean(eps);
        let s2 = central_moment(eps, ebar, 2);
        let jac = match self.stats {
            NormalStats::MeanOnly { .. } => Matrix::new(1, 1, vec![1.0]),
            NormalStats::JustIdentified => {
                let sd = theta[1].sqrt();
                Matrix::from_rows(&[vec![1.0, ebar / (2.0 * sd)], vec![0.0, s2]])
            }
            NormalStats::OverIdentified => {
                let sd = theta[1].sqrt();
                let m3 = central_moment(eps, ebar, 3);
                Matrix::from_rows(&[
                    vec![1.0, ebar / (2.0 * sd)],
                    vec![0.0, s2],
                    vec![0.0, m3 / (2.0 * sd * s2)],
                    vec![0.0, 0.0],
                ])
            }
        };
        Some(jac)
    }
}

/// y_t = −log(1 − u_t)/θ with u_t uniform, i.e. exponential with rate θ.
#[derive(Debug, Clone)]
pub struct ExponentialModel {
    nobs: usize,
    over_identified: bool,
    labels: Arc<[String]>,
}

impl ExponentialModel {
    pub fn new(nobs: usize, over_identified: bool) -> Result<Self> {
        if nobs == 0 {
            return Err(Error::Precondition("exponential model needs T >= 1".into()));
        }
        let labels = if over_identified {
            labels(&["mean", "variance"])
        } else {
            labels(&["mean"])
        };
        Ok(Self {
            nobs,
            over_identified,
            labels,
        })
    }
}

impl Model for ExponentialModel {
    fn name(&self) -> &str {
        if self.over_identified {
            "exponential-oi"
        } else {
            "exponential-ji"
        }
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn aux_dim(&self) -> usize {
        self.labels.len()
    }

    fn param_labels(&self) -> Vec<String> {
        vec!["rate".into()]
    }

    fn support(&self) -> Vec<Interval> {
        vec![Interval::POSITIVE]
    }

    fn shock_spec(&self) -> ShockSpec {
        ShockSpec {
            nobs: self.nobs,
            normals_per_obs: 0,
            uniforms_per_obs: 1,
        }
    }

    fn simulate(&self, theta: &[f64], shocks: &ShockPack) -> Result<Dataset> {
        self.check_param(theta)?;
        shocks.check(self.shock_spec())?;
        let rate = theta[0];
        Dataset::new(
            shocks.uniforms[..self.nobs]
                .iter()
                .map(|u| -(1.0 - u).ln() / rate)
                .collect(),
        )
    }

    fn aux_stats(&self, data: &Dataset) -> Result<AuxStats> {
        check_len(self, data, self.nobs)?;
        let y = data.observations();
        let ybar = mean(y);
        let values = if self.over_identified {
            let second = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
            vec![ybar, second - ybar * ybar]
        } else {
            vec![ybar]
        };
        AuxStats::new(values, self.labels.clone())
    }

    fn initial_guess(&self, psi_hat: &[f64]) -> Vec<f64> {
        vec![1.0 / psi_hat[0].max(1e-12)]
    }

    fn analytic_jacobian(&self, theta: &[f64], shocks: &ShockPack) -> Option<Result<Matrix>> {
        let psi = match self.psi(theta, shocks) {
            Ok(p) => p,
            Err(e) => return Some(Err(e)),
        };
        let rate = theta[0];
        let column: Vec<f64> = if self.over_identified {
            vec![-psi.values[0] / rate, -2.0 * psi.values[1] / rate]
        } else {
            vec![-psi.values[0] / rate]
        };
        Some(Matrix::from_columns(&[column]))
    }
}

/// ARMA(1,1): y_t = α y_{t−1} + ε_t + θ ε_{t−1}, ε_t = σ z_t, with y_0 = ε_0 = 0.
///
/// Statistics are the OLS coefficients of y_t on four of its own lags (no
/// intercept) followed by the residual variance.
#[derive(Debug, Clone)]
pub struct Arma11Model {
    nobs: usize,
    labels: Arc<[String]>,
}

pub const ARMA_LAGS: usize = 4;

impl Arma11Model {
    pub fn new(nobs: usize) -> Result<Self> {
        if nobs <= 2 * ARMA_LAGS {
            return Err(Error::Dimension(format!(
                "ARMA auxiliary regression on {ARMA_LAGS} lags needs T > {}, got {nobs}",
                2 * ARMA_LAGS
            )));
        }
        Ok(Self {
            nobs,
            labels: labels(&["phi1", "phi2", "phi3", "phi4", "resid_var"]),
        })
    }
}

/// Lag matrix and response for regressing y_t on y_{t-1}, …, y_{t-lags}.
pub fn lag_regression(y: &[f64], lags: usize) -> Result<(Matrix, Vec<f64>)> {
    if y.len() <= 2 * lags {
        return Err(Error::Dimension(format!(
            "{} observations are too few for {lags} lags",
            y.len()
        )));
    }
    let n = y.len() - lags;
    let mut data = Vec::with_capacity(n * lags);
    for t in lags..y.len() {
        for j in 1..=lags {
            data.push(y[t - j]);
        }
    }
    Ok((Matrix::new(n, lags, data)?, y[lags..].to_vec()))
}

impl Model for Arma11Model {
    fn name(&self) -> &str {
        "arma11"
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn aux_dim(&self) -> usize {
        ARMA_LAGS + 1
    }

    fn param_labels(&self) -> Vec<String> {
        vec!["alpha".into(), "theta".into(), "sigma".into()]
    }

    fn support(&self) -> Vec<Interval> {
        vec![Interval::REAL, Interval::REAL, Interval::POSITIVE]
    }

    fn shock_spec(&self) -> ShockSpec {
        ShockSpec {
            nobs: self.nobs,
            normals_per_obs: 1,
            uniforms_per_obs: 0,
        }
    }

    fn simulate(&self, theta: &[f64], shocks: &ShockPack) -> Result<Dataset> {
        self.check_param(theta)?;
        shocks.check(self.shock_spec())?;
        let (alpha, ma, sigma) = (theta[0], theta[1], theta[2]);
        let mut y = Vec::with_capacity(self.nobs);
        let (mut y_prev, mut e_prev) = (0.0, 0.0);
        for z in &shocks.normals[..self.nobs] {
            let e = sigma * z;
            let yt = alpha * y_prev + e + ma * e_prev;
            y.push(yt);
            y_prev = yt;
            e_prev = e;
        }
        Dataset::new(y)
    }

    fn aux_stats(&self, data: &Dataset) -> Result<AuxStats> {
        check_len(self, data, self.nobs)?;
        let (x, resp) = lag_regression(data.observations(), ARMA_LAGS)?;
        let (mut values, s2) = ols_fit(&x, &resp)?;
        values.push(s2);
        AuxStats::new(values, self.labels.clone())
    }

    fn initial_guess(&self, psi_hat: &[f64]) -> Vec<f64> {
        vec![
            psi_hat[0].clamp(-0.95, 0.95),
            0.0,
            psi_hat[4].max(1e-6).sqrt(),
        ]
    }
}

/// x | θ ~ ½ N(θ, 1) + ½ N(θ, 1/100).
///
/// Each observation consumes one uniform (component) and one normal (shock).
/// The statistic is the sample mean, which is x itself for the usual T = 1.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    nobs: usize,
    labels: Arc<[String]>,
}

pub const MIXTURE_NARROW_SD: f64 = 0.1;

impl MixtureModel {
    pub fn new(nobs: usize) -> Result<Self> {
        if nobs == 0 {
            return Err(Error::Precondition("mixture model needs T >= 1".into()));
        }
        Ok(Self {
            nobs,
            labels: labels(&["x"]),
        })
    }
}

impl Model for MixtureModel {
    fn name(&self) -> &str {
        "mixture"
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn aux_dim(&self) -> usize {
        1
    }

    fn param_labels(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn support(&self) -> Vec<Interval> {
        vec![Interval::REAL]
    }

    fn shock_spec(&self) -> ShockSpec {
        ShockSpec {
            nobs: self.nobs,
            normals_per_obs: 1,
            uniforms_per_obs: 1,
        }
    }

    fn simulate(&self, theta: &[f64], shocks: &ShockPack) -> Result<Dataset> {
        self.check_param(theta)?;
        shocks.check(self.shock_spec())?;
        Dataset::new(
            shocks.normals[..self.nobs]
                .iter()
                .zip(&shocks.uniforms[..self.nobs])
                .map(|(z, u)| {
                    let sd = if *u < 0.5 { 1.0 } else { MIXTURE_NARROW_SD };
                    theta[0] + sd * z
                })
                .collect(),
        )
    }

    fn aux_stats(&self, data: &Dataset) -> Result<AuxStats> {
        check_len(self, data, self.nobs)?;
        AuxStats::new(vec![mean(data.observations())], self.labels.clone())
    }

    fn initial_guess(&self, psi_hat: &[f64]) -> Vec<f64> {
        vec![psi_hat[0]]
    }

    fn analytic_jacobian(&self, _theta: &[f64], _shocks: &ShockPack) -> Option<Result<Matrix>> {
        Some(Matrix::new(1, 1, vec![1.0]))
    }
}

/// Quantile function Q(u, θ).
pub type QuantileFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// y_t = Q(u_t, θ) for each uniform draw.
pub fn quantile_simulate(q: &QuantileFn, theta: &[f64], uniforms: &[f64]) -> Result<Dataset> {
    let obs: Vec<f64> = uniforms.iter().map(|u| q(*u, theta)).collect();
    if let Some(bad) = obs.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!(
            "quantile function is not finite at u = {}, theta = {theta:?}",
            uniforms[bad]
        )));
    }
    Dataset::new(obs)
}

/// A one-parameter model given by its quantile function; the statistic is the
/// sample mean (the observation itself when T = 1).
pub struct QuantileModel {
    name: String,
    nobs: usize,
    support: Interval,
    quantile: Box<QuantileFn>,
    labels: Arc<[String]>,
}

impl QuantileModel {
    pub fn new(
        name: impl Into<String>,
        nobs: usize,
        support: Interval,
        quantile: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if nobs == 0 {
            return Err(Error::Precondition("quantile model needs T >= 1".into()));
        }
        Ok(Self {
            name: name.into(),
            nobs,
            support,
            quantile: Box::new(quantile),
            labels: labels(&["mean"]),
        })
    }
}

impl fmt::Debug for QuantileModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuantileModel")
            .field("name", &self.name)
            .field("nobs", &self.nobs)
            .finish()
    }
}

impl Model for QuantileModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn aux_dim(&self) -> usize {
        1
    }

    fn param_labels(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn support(&self) -> Vec<Interval> {
        vec![self.support]
    }

    fn shock_spec(&self) -> ShockSpec {
        ShockSpec {
            nobs: self.nobs,
            normals_per_obs: 0,
            uniforms_per_obs: 1,
        }
    }

    fn simulate(&self, theta: &[f64], shocks: &ShockPack) -> Result<Dataset> {
        self.check_param(theta)?;
        shocks.check(self.shock_spec())?;
        quantile_simulate(&*self.quantile, theta, &shocks.uniforms[..self.nobs])
    }

    fn aux_stats(&self, data: &Dataset) -> Result<AuxStats> {
        check_len(self, data, self.nobs)?;
        AuxStats::new(vec![mean(data.observations())], self.labels.clone())
    }

    fn initial_guess(&self, _psi_hat: &[f64]) -> Vec<f64> {
        let iv = self.support;
        let x = match (iv.lo.is_finite(), iv.hi.is_finite()) {
            (true, true) => 0.5 * (iv.lo + iv.hi),
            (true, false) => iv.lo + 1.0,
            (false, true) => iv.hi - 1.0,
            (false, false) => 0.0,
        };
        vec![x]
    }
}

/// Registered model names.
pub const MODEL_NAMES: [&str; 7] = [
    "normal-mean",
    "normal-ji",
    "normal-oi",
    "exponential-ji",
    "exponential-oi",
    "arma11",
    "mixture",
];

/// Builds a registered model. `known_variance` is only used by `normal-mean`.
pub fn build_model(name: &str, nobs: usize, known_variance: f64) -> Result<Arc<dyn Model>> {
    Ok(match name {
        "normal-mean" => Arc::new(NormalModel::new(
            nobs,
            NormalStats::MeanOnly {
                sigma2: known_variance,
            },
        )?),
        "normal-ji" => Arc::new(NormalModel::new(nobs, NormalStats::JustIdentified)?),
        "normal-oi" => Arc::new(NormalModel::new(nobs, NormalStats::OverIdentified)?),
        "exponential-ji" => Arc::new(ExponentialModel::new(nobs, false)?),
        "exponential-oi" => Arc::new(ExponentialModel::new(nobs, true)?),
        "arma11" => Arc::new(Arma11Model::new(nobs)?),
        "mixture" => Arc::new(MixtureModel::new(nobs)?),
        other => {
            return Err(Error::Precondition(format!(
                "unknown model '{other}', expected one of {MODEL_NAMES:?}"
            )))
        }
    })
}
