//! Estimation algorithms: simulated minimum distance, the reverse sampler,
//! and accept-reject, MCMC and SMC approximate Bayesian computation.
//!
//! Draw `b` of every embarrassingly parallel sampler depends only on
//! `(master_seed, b)`, and results are gathered in index order, so output is
//! the same for any number of worker threads.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jacobian::{model_fd_jacobian, volume_inverse, JacobianSpec};
use crate::models::{make_shockpack, Model, ShockPack};
use crate::numlin::{quadratic_form, Matrix};
use crate::optimize::{nelder_mead, OptimOptions, OptimResult};
use crate::priors::Prior;
use crate::streams::{stream, stream2, Purpose};

/// In the exactly identified case a draw whose objective stays above this
/// after the first optimisation gets one more try from a perturbed start.
pub const EXACT_RETRY_THRESHOLD: f64 = 1e-6;

/// Samplers give up once more than this share of proposals is invalid.
pub const MAX_INVALID_SHARE: f64 = 0.5;

/// Round budget for SMC, as a multiple of the population size.
pub const SMC_RETRY_FACTOR: usize = 100;

/// One retained draw.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDraw {
    pub b: u64,
    pub theta: Vec<f64>,
    /// Prior density × Jacobian volume⁻¹ for the reverse sampler; importance
    /// weight for SMC; 1 for the other ABC samplers.
    pub weight_unnorm: f64,
    pub j_value: f64,
    pub psi_sim: Vec<f64>,
    pub vol_inv: f64,
}

/// A proposal that produced no usable draw.
#[derive(Debug, Clone, PartialEq)]
pub struct InvalidDraw {
    pub b: u64,
    pub reason: Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ReverseSampler,
    AbcAr,
    AbcMcmc,
    AbcSmc,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::ReverseSampler => "rs",
            Method::AbcAr => "abc-ar",
            Method::AbcMcmc => "abc-mcmc",
            Method::AbcSmc => "abc-smc",
        }
    }
}

/// Units of a reported tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaScale {
    /// The quadratic objective J = g′Wg.
    Objective,
    /// The weighted norm ‖g‖_W = √J.
    Norm,
}

impl DeltaScale {
    pub fn tag(self) -> &'static str {
        match self {
            DeltaScale::Objective => "objective",
            DeltaScale::Norm => "norm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    pub method: Method,
    /// Ordered by draw index.
    pub draws: Vec<WeightedDraw>,
    /// Proposals made, valid or not.
    pub proposed: usize,
    pub delta: f64,
    pub delta_scale: DeltaScale,
    pub master_seed: u64,
    pub invalid: Vec<InvalidDraw>,
    /// Accepted moves, for MCMC.
    pub accepted: Option<usize>,
    pub warnings: Vec<String>,
}

impl PosteriorSample {
    /// A sample from explicit points and unnormalised weights, mainly for
    /// diagnostics on externally produced draws.
    pub fn from_points(points: Vec<(Vec<f64>, f64)>) -> Self {
        let proposed = points.len();
        let draws = points
            .into_iter()
            .enumerate()
            .map(|(b, (theta, w))| WeightedDraw {
                b: b as u64,
                theta,
                weight_unnorm: w,
                j_value: 0.0,
                psi_sim: Vec::new(),
                vol_inv: 1.0,
            })
            .collect();
        Self {
            method: Method::AbcAr,
            draws,
            proposed,
            delta: 0.0,
            delta_scale: DeltaScale::Objective,
            master_seed: 0,
            invalid: Vec::new(),
            accepted: None,
            warnings: Vec::new(),
        }
    }

    pub fn kept_count(&self) -> usize {
        self.draws.len()
    }

    pub fn param_dim(&self) -> usize {
        self.draws.first().map_or(0, |d| d.theta.len())
    }

    /// Weights scaled to sum to one.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        let total: f64 = self.draws.iter().map(|d| d.weight_unnorm).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegenerateSample);
        }
        Ok(self.draws.iter().map(|d| d.weight_unnorm / total).collect())
    }

    /// Coordinate `k` of every draw.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.theta[k]).collect()
    }
}

/// Checks that `w` is an L×L symmetric positive definite weight matrix.
pub fn check_weight_matrix(w: &Matrix, l: usize) -> Result<()> {
    if w.rows() != l || w.cols() != l {
        return Err(Error::Dimension(format!(
            "weight matrix is {}x{}, statistics have length {l}",
            w.rows(),
            w.cols()
        )));
    }
    if !w.is_symmetric(1e-12) || w.cholesky().is_none() {
        return Err(Error::Precondition(
            "weight matrix must be symmetric positive definite".into(),
        ));
    }
    Ok(())
}

/// J = ḡ′Wḡ with ḡ = ψ̂ − ψ_sim.
pub fn j_objective(psi_hat: &[f64], psi_sim: &[f64], w: &Matrix) -> Result<f64> {
    if psi_hat.len() != psi_sim.len() {
        return Err(Error::Dimension(format!(
            "observed statistics have length {}, simulated {}",
            psi_hat.len(),
            psi_sim.len()
        )));
    }
    let g: Vec<f64> = psi_hat.iter().zip(psi_sim).map(|(a, b)| a - b).collect();
    Ok(quadratic_form(&g, w)?.max(0.0))
}

fn check_psi_hat(model: &dyn Model, psi_hat: &[f64], w: &Matrix) -> Result<()> {
    if psi_hat.len() != model.aux_dim() {
        return Err(Error::Dimension(format!(
            "{} has {} statistics, observed vector has {}",
            model.name(),
            model.aux_dim(),
            psi_hat.len()
        )));
    }
    if psi_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(
            "observed statistics must be finite".into(),
        ));
    }
    check_weight_matrix(w, model.aux_dim())
}

fn check_prior(model: &dyn Model, prior: &Prior) -> Result<()> {
    if prior.dim() != model.param_dim() {
        return Err(Error::Dimension(format!(
            "prior has dimension {}, {} has {} parameters",
            prior.dim(),
            model.name(),
            model.param_dim()
        )));
    }
    Ok(())
}

fn check_quantile(b_target: usize, q: f64) -> Result<usize> {
    if b_target == 0 {
        return Err(Error::Precondition("need at least one draw".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Precondition(format!(
            "retained quantile {q} must lie in (0, 1]"
        )));
    }
    // the small offset stops 1e4 / 0.01 from rounding up to 1e6 + 1
    Ok(((b_target as f64 / q) - 1e-9).ceil().max(b_target as f64) as usize)
}

/// J as a function of θ at fixed shocks; +∞ wherever simulation fails.
fn objective_at<'a>(
    model: &'a dyn Model,
    psi_hat: &'a [f64],
    w: &'a Matrix,
    shocks: &'a [ShockPack],
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |theta| {
        let mut avg = vec![0.0; psi_hat.len()];
        for pack in shocks {
            match model.psi(theta, pack) {
                Ok(p) => avg.iter_mut().zip(&p.values).for_each(|(a, v)| *a += v),
                Err(_) => return f64::INFINITY,
            }
        }
        let s = shocks.len() as f64;
        avg.iter_mut().for_each(|a| *a /= s);
        j_objective(psi_hat, &avg, w).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmdConfig {
    pub s: usize,
    pub w: Matrix,
    pub seed: u64,
    pub optim: OptimOptions,
    /// Defaults to the model's moment-matching guess.
    pub start: Option<Vec<f64>>,
}

impl SmdConfig {
    pub fn new(s: usize, w: Matrix, seed: u64) -> Result<Self> {
        if s == 0 {
            return Err(Error::Precondition("SMD needs S >= 1".into()));
        }
        Ok(Self {
            s,
            w,
            seed,
            optim: OptimOptions::default(),
            start: None,
        })
    }
}

/// Simulated minimum distance: minimises J between ψ̂ and the average of S
/// simulated statistics, with the same S shock packs at every θ.
pub fn smd_estimate(model: &dyn Model, psi_hat: &[f64], cfg: &SmdConfig) -> Result<OptimResult> {
    check_psi_hat(model, psi_hat, &cfg.w)?;
    if cfg.s == 0 {
        return Err(Error::Precondition("SMD needs S >= 1".into()));
    }
    let packs: Vec<ShockPack> = (0..cfg.s as u64)
        .map(|s| make_shockpack(model, cfg.seed, s))
        .collect();
    let f = objective_at(model, psi_hat, &cfg.w, &packs);
    let start = cfg
        .start
        .clone()
        .unwrap_or_else(|| model.initial_guess(psi_hat));
    nelder_mead(f, &start, &cfg.optim)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RsOptions {
    pub optim: OptimOptions,
    pub jacobian: JacobianSpec,
}

fn rs_start(model: &dyn Model, psi_hat: &[f64], prior: &Prior, seed: u64, b: u64) -> Vec<f64> {
    if prior.is_samplable() {
        let mut rng = stream(seed, Purpose::OptimStart, b);
        if let Ok(draw) = prior.sample(&mut rng) {
            if model.check_param(&draw).is_ok() {
                return draw;
            }
        }
    }
    model.initial_guess(psi_hat)
}

/// One reverse-sampler draw: solve the S = 1 minimum-distance problem with
/// shock pack `b`, then weight the solution by prior × Jacobian volume⁻¹.
///
/// An error means the draw is invalid (failed optimisation or a degenerate
/// Jacobian); callers count and skip it.
pub fn rs_draw(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    b: u64,
    master_seed: u64,
    opts: &RsOptions,
) -> Result<WeightedDraw> {
    let shocks = [make_shockpack(model, master_seed, b)];
    let f = objective_at(model, psi_hat, w, &shocks);
    let start = rs_start(model, psi_hat, prior, master_seed, b);
    let mut best = nelder_mead(&f, &start, &opts.optim)?;

    if model.aux_dim() == model.param_dim() && best.objective_value > EXACT_RETRY_THRESHOLD {
        let mut rng = stream2(master_seed, Purpose::OptimStart, 1, b);
        let restart: Vec<f64> = model
            .initial_guess(psi_hat)
            .iter()
            .map(|x| x + 0.1 * x.abs().max(1.0) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Ok(again) = nelder_mead(&f, &restart, &opts.optim) {
            if again.objective_value < best.objective_value {
                best = again;
            }
        }
    }
    if !best.objective_value.is_finite() {
        return Err(Error::Evaluation {
            location: best.minimizer,
        });
    }

    let theta = best.minimizer;
    let jac = model_fd_jacobian(model, &theta, &shocks[0], &opts.jacobian)?;
    let vol_inv = volume_inverse(&jac, &theta)?;
    let psi_sim = model.psi(&theta, &shocks[0])?.values;
    let j_value = j_objective(psi_hat, &psi_sim, w)?;
    let log_prior = prior.log_density_unnorm(&theta);
    let weight_unnorm = if log_prior == f64::NEG_INFINITY {
        0.0
    } else {
        log_prior.exp() * vol_inv
    };
    Ok(WeightedDraw {
        b,
        theta,
        weight_unnorm,
        j_value,
        psi_sim,
        vol_inv,
    })
}

/// Runs `draw` for indices 0, 1, … until `needed` valid draws exist, in
/// parallel batches; invalid draws are recorded and replaced.
fn collect_valid<F>(needed: usize, draw: F) -> Result<(Vec<WeightedDraw>, Vec<InvalidDraw>, usize)>
where
    F: Fn(u64) -> Result<WeightedDraw> + Sync,
{
    let mut valid = Vec::with_capacity(needed);
    let mut invalid = Vec::new();
    let mut next = 0u64;
    while valid.len() < needed {
        let batch = (needed - valid.len()) as u64;
        let results: Vec<Result<WeightedDraw>> =
            (next..next + batch).into_par_iter().map(&draw).collect();
        for (b, r) in (next..).zip(results) {
            match r {
                Ok(d) => valid.push(d),
                Err(reason) => invalid.push(InvalidDraw { b, reason }),
            }
        }
        next += batch;
        let proposed = next as usize;
        if invalid.len() as f64 > MAX_INVALID_SHARE * proposed as f64 {
            return Err(Error::SamplerDegeneracy {
                invalid: invalid.len(),
                proposed,
            });
        }
    }
    Ok((valid, invalid, next as usize))
}

/// Keeps the `b_target` draws with the smallest objective (ties by index)
/// and returns them in index order with the largest kept objective.
fn retain_smallest(mut draws: Vec<WeightedDraw>, b_target: usize) -> (Vec<WeightedDraw>, f64) {
    draws.sort_by(|x, y| x.j_value.total_cmp(&y.j_value).then(x.b.cmp(&y.b)));
    draws.truncate(b_target);
    let delta = draws.last().map_or(f64::NAN, |d| d.j_value);
    draws.sort_by_key(|d| d.b);
    (draws, delta)
}

/// Reverse sampler: ⌈B/q⌉ valid draws, of which the B with the smallest
/// objective are kept. With q = 1 every draw is kept, which is the right
/// choice when the model is exactly identified.
#[allow(clippy::too_many_arguments)]
pub fn rs_sample(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    b_target: usize,
    q: f64,
    master_seed: u64,
    opts: &RsOptions,
) -> Result<PosteriorSample> {
    check_psi_hat(model, psi_hat, w)?;
    check_prior(model, prior)?;
    opts.optim.validate()?;
    let needed = check_quantile(b_target, q)?;
    let (valid, invalid, proposed) = collect_valid(needed, |b| {
        rs_draw(model, psi_hat, w, prior, b, master_seed, opts)
    })?;
    let (draws, delta) = retain_smallest(valid, b_target);
    Ok(PosteriorSample {
        method: Method::ReverseSampler,
        draws,
        proposed,
        delta,
        delta_scale: DeltaScale::Objective,
        master_seed,
        invalid,
        accepted: None,
        warnings: Vec::new(),
    })
}

/// Draws θ from the prior and simulates with shock pack `b`.
fn prior_proposal(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    b: u64,
    master_seed: u64,
) -> Result<WeightedDraw> {
    let theta = prior.sample(&mut stream(master_seed, Purpose::PriorDraw, b))?;
    let psi_sim = model
        .psi(&theta, &make_shockpack(model, master_seed, b))?
        .values;
    let j_value = j_objective(psi_hat, &psi_sim, w)?;
    Ok(WeightedDraw {
        b,
        theta,
        weight_unnorm: 1.0,
        j_value,
        psi_sim,
        vol_inv: 1.0,
    })
}

fn require_samplable(prior: &Prior) -> Result<()> {
    if prior.is_samplable() {
        Ok(())
    } else {
        Err(Error::NotSamplable(format!("{prior:?} is improper")))
    }
}

/// Accept-reject ABC with quantile retention: ⌈B/q⌉ prior draws, keep the B
/// closest. The tolerance reported is the largest kept objective.
#[allow(clippy::too_many_arguments)]
pub fn abc_ar(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    b_target: usize,
    q: f64,
    master_seed: u64,
) -> Result<PosteriorSample> {
    check_psi_hat(model, psi_hat, w)?;
    check_prior(model, prior)?;
    require_samplable(prior)?;
    let proposals = check_quantile(b_target, q)?;
    let results: Vec<Result<WeightedDraw>> = (0..proposals as u64)
        .into_par_iter()
        .map(|b| prior_proposal(model, psi_hat, w, prior, b, master_seed))
        .collect();
    let (valid, invalid) = split_results(results);
    if invalid.len() as f64 > MAX_INVALID_SHARE * proposals as f64 {
        return Err(Error::SamplerDegeneracy {
            invalid: invalid.len(),
            proposed: proposals,
        });
    }
    let (draws, delta) = retain_smallest(valid, b_target);
    Ok(PosteriorSample {
        method: Method::AbcAr,
        draws,
        proposed: proposals,
        delta,
        delta_scale: DeltaScale::Objective,
        master_seed,
        invalid,
        accepted: None,
        warnings: Vec::new(),
    })
}

fn split_results(results: Vec<Result<WeightedDraw>>) -> (Vec<WeightedDraw>, Vec<InvalidDraw>) {
    let mut valid = Vec::new();
    let mut invalid = Vec::new();
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(d) => valid.push(d),
            Err(reason) => invalid.push(InvalidDraw {
                b: b as u64,
                reason,
            }),
        }
    }
    (valid, invalid)
}

/// Accept-reject ABC with a fixed tolerance on ‖ψ̂ − ψ̂ᵇ‖_W over a fixed
/// number of prior draws.
pub fn abc_ar_tolerance(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    delta: f64,
    proposals: usize,
    master_seed: u64,
) -> Result<PosteriorSample> {
    check_psi_hat(model, psi_hat, w)?;
    check_prior(model, prior)?;
    require_samplable(prior)?;
    if !(delta > 0.0) {
        return Err(Error::Precondition(format!(
            "tolerance {delta} must be positive"
        )));
    }
    let results: Vec<Result<WeightedDraw>> = (0..proposals as u64)
        .into_par_iter()
        .map(|b| prior_proposal(model, psi_hat, w, prior, b, master_seed))
        .collect();
    let (valid, invalid) = split_results(results);
    let draws: Vec<WeightedDraw> = valid
        .into_iter()
        .filter(|d| d.j_value.sqrt() <= delta)
        .collect();
    let mut warnings = Vec::new();
    if draws.is_empty() {
        warnings.push(format!("no proposal within tolerance {delta}"));
    }
    Ok(PosteriorSample {
        method: Method::AbcAr,
        draws,
        proposed: proposals,
        delta,
        delta_scale: DeltaScale::Norm,
        master_seed,
        invalid,
        accepted: None,
        warnings,
    })
}

/// Where acceptance-rate experiments draw candidate parameters from.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Prior,
    /// Independent normals; candidates outside the prior support are rejected.
    Gaussian {
        mean: Vec<f64>,
        sd: Vec<f64>,
    },
}

/// For each tolerance, how many of `proposals` candidates land within it in
/// the weighted norm. Counts are nested, so they never increase as the
/// tolerance shrinks.
#[allow(clippy::too_many_arguments)]
pub fn acceptance_counts(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    proposal: &Proposal,
    deltas: &[f64],
    proposals: usize,
    master_seed: u64,
) -> Result<Vec<u64>> {
    check_psi_hat(model, psi_hat, w)?;
    check_prior(model, prior)?;
    match proposal {
        Proposal::Prior => require_samplable(prior)?,
        Proposal::Gaussian { mean, sd } => {
            if mean.len() != model.param_dim() || sd.len() != model.param_dim() {
                return Err(Error::Dimension(
                    "proposal mean/sd length differs from K".into(),
                ));
            }
        }
    }
    let distance = |b: u64| -> f64 {
        let mut rng = stream(master_seed, Purpose::Proposal, b);
        let theta = match proposal {
            Proposal::Prior => match prior.sample(&mut rng) {
                Ok(t) => t,
                Err(_) => return f64::INFINITY,
            },
            Proposal::Gaussian { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        };
        if prior.log_density_unnorm(&theta) == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        match model.psi(&theta, &make_shockpack(model, master_seed, b)) {
            Ok(p) => j_objective(psi_hat, &p.values, w).map_or(f64::INFINITY, f64::sqrt),
            Err(_) => f64::INFINITY,
        }
    };
    let counts = (0..proposals as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; deltas.len()],
            |mut acc, b| {
                let d = distance(b);
                for (c, delta) in acc.iter_mut().zip(deltas) {
                    if d <= *delta {
                        *c += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; deltas.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts)
}

/// ρ_ABC for a symmetric or asymmetric proposal.
///
/// Zero when the simulated statistics miss the tolerance or the proposal has
/// no prior mass; otherwise min(1, π(ϑ)q(θ|ϑ) / (π(θ)q(ϑ|θ))).
pub fn abc_mcmc_acceptance(
    within_tolerance: bool,
    log_prior_proposed: f64,
    log_prior_current: f64,
    log_q_ratio: f64,
) -> f64 {
    if !within_tolerance || log_prior_proposed == f64::NEG_INFINITY {
        return 0.0;
    }
    (log_prior_proposed - log_prior_current + log_q_ratio)
        .exp()
        .min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub init: Vec<f64>,
    pub proposal_sd: Vec<f64>,
    /// Tolerance on ‖ψ̂ − ψ̂ᵇ‖_W.
    pub delta: f64,
    pub chain_length: usize,
}

/// Random-walk MCMC-ABC. A rejected move repeats the current state; every
/// state of the chain is kept with unit weight.
pub fn abc_mcmc(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    cfg: &McmcConfig,
    master_seed: u64,
) -> Result<PosteriorSample> {
    check_psi_hat(model, psi_hat, w)?;
    check_prior(model, prior)?;
    let k = model.param_dim();
    if cfg.init.len() != k || cfg.proposal_sd.len() != k {
        return Err(Error::Dimension(
            "initial state / proposal sd length differs from K".into(),
        ));
    }
    if !(cfg.delta > 0.0) || cfg.chain_length == 0 {
        return Err(Error::Precondition(
            "MCMC needs delta > 0 and a non-empty chain".into(),
        ));
    }
    if cfg.proposal_sd.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Precondition("proposal sd must be positive".into()));
    }
    let mut log_prior = prior.log_density_unnorm(&cfg.init);
    if log_prior == f64::NEG_INFINITY {
        return Err(Error::Precondition(
            "initial state outside prior support".into(),
        ));
    }
    let n = cfg.chain_length as u64;
    // the starting state gets its own pack, past the ones used by proposals
    let mut psi = model
        .psi(&cfg.init, &make_shockpack(model, master_seed, n))?
        .values;
    let mut j = j_objective(psi_hat, &psi, w)?;
    let mut theta = cfg.init.clone();

    let mut rng = stream(master_seed, Purpose::Mcmc, 0);
    let mut accepted = 0;
    let mut invalid = Vec::new();
    let mut draws = Vec::with_capacity(cfg.chain_length);
    for b in 0..n {
        let proposal: Vec<f64> = theta
            .iter()
            .zip(&cfg.proposal_sd)
            .map(|(t, s)| t + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let u: f64 = rng.random();
        let lp = prior.log_density_unnorm(&proposal);
        if lp > f64::NEG_INFINITY {
            match model.psi(&proposal, &make_shockpack(model, master_seed, b)) {
                Ok(p) => {
                    let jp = j_objective(psi_hat, &p.values, w)?;
                    let rho = abc_mcmc_acceptance(jp.sqrt() <= cfg.delta, lp, log_prior, 0.0);
                    if u < rho {
                        theta = proposal;
                        psi = p.values;
                        j = jp;
                        log_prior = lp;
                        accepted += 1;
                    }
                }
                Err(reason) => invalid.push(InvalidDraw { b, reason }),
            }
        }
        draws.push(WeightedDraw {
            b,
            theta: theta.clone(),
            weight_unnorm: 1.0,
            j_value: j,
            psi_sim: psi.clone(),
            vol_inv: 1.0,
        });
    }
    let mut warnings = Vec::new();
    if accepted == 0 {
        warnings.push("chain never moved: zero acceptances".to_string());
    }
    Ok(PosteriorSample {
        method: Method::AbcMcmc,
        draws,
        proposed: cfg.chain_length,
        delta: cfg.delta,
        delta_scale: DeltaScale::Norm,
        master_seed,
        invalid,
        accepted: Some(accepted),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcConfig {
    pub population: usize,
    /// Strictly decreasing tolerances on ‖ψ̂ − ψ̂ᵇ‖_W.
    pub schedule: Vec<f64>,
    /// Gaussian perturbation sd per coordinate; when `None`, twice the
    /// weighted variance of the previous population (as a variance).
    pub perturb_sd: Option<Vec<f64>>,
}

struct Particle {
    theta: Vec<f64>,
    psi: Vec<f64>,
    j: f64,
    weight: f64,
}

fn weighted_variances(particles: &[Particle]) -> Vec<f64> {
    let k = particles[0].theta.len();
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    (0..k)
        .map(|c| {
            let m: f64 = particles.iter().map(|p| p.weight * p.theta[c]).sum::<f64>() / total;
            particles
                .iter()
                .map(|p| p.weight * (p.theta[c] - m).powi(2))
                .sum::<f64>()
                / total
        })
        .collect()
}

/// Baseline SMC-ABC with a fixed tolerance schedule.
///
/// Round 0 is accept-reject from the prior. Later rounds resample the
/// previous population by weight, perturb with a Gaussian kernel and accept
/// under the next tolerance; weights are prior over the perturbation mixture.
pub fn abc_smc(
    model: &dyn Model,
    psi_hat: &[f64],
    w: &Matrix,
    prior: &Prior,
    cfg: &SmcConfig,
    master_seed: u64,
) -> Result<PosteriorSample> {
    check_psi_hat(model, psi_hat, w)?;
    check_prior(model, prior)?;
    require_samplable(prior)?;
    let n = cfg.population;
    if n == 0 {
        return Err(Error::Precondition(
            "SMC population must be positive".into(),
        ));
    }
    if cfg.schedule.is_empty()
        || cfg.schedule.iter().any(|d| !(*d > 0.0))
        || cfg.schedule.windows(2).any(|p| !(p[1] < p[0]))
    {
        return Err(Error::Precondition(format!(
            "tolerance schedule {:?} must be positive and strictly decreasing",
            cfg.schedule
        )));
    }
    if let Some(sd) = &cfg.perturb_sd {
        if sd.len() != model.param_dim() || sd.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Precondition(
                "perturbation sd must be positive, one per parameter".into(),
            ));
        }
    }

    let spec = model.shock_spec();
    let budget = SMC_RETRY_FACTOR * n;
    let mut population: Vec<Particle> = Vec::new();
    let mut proposed = 0;
    let mut warnings = Vec::new();

    for (round, &tol) in cfg.schedule.iter().enumerate() {
        let sd: Vec<f64> = if round == 0 {
            Vec::new()
        } else {
            match &cfg.perturb_sd {
                Some(s) => s.clone(),
                None => weighted_variances(&population)
                    .iter()
                    .map(|v| (2.0 * v).sqrt().max(1e-12))
                    .collect(),
            }
        };
        let cumulative: Vec<f64> = population
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p.weight;
                Some(*acc)
            })
            .collect();
        let total = cumulative.last().copied().unwrap_or(0.0);

        let attempt = |a: u64| -> Option<Particle> {
            let mut rng = stream2(master_seed, Purpose::Smc, round as u64, a);
            let theta = if round == 0 {
                prior.sample(&mut rng).ok()?
            } else {
                let u = rng.random::<f64>() * total;
                let i = cumulative
                    .partition_point(|c| *c <= u)
                    .min(population.len() - 1);
                population[i]
                    .theta
                    .iter()
                    .zip(&sd)
                    .map(|(t, s)| t + s * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            };
            let lp = prior.log_density_unnorm(&theta);
            if lp == f64::NEG_INFINITY {
                return None;
            }
            let shocks = ShockPack::generate(
                spec,
                master_seed ^ (round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                a,
            );
            let psi = model.psi(&theta, &shocks).ok()?.values;
            let j = j_objective(psi_hat, &psi, w).ok()?;
            if j.sqrt() > tol {
                return None;
            }
            let weight = if round == 0 {
                1.0
            } else {
                let mix: f64 = population
                    .iter()
                    .map(|p| {
                        p.weight
                            * p.theta
                                .iter()
                                .zip(&theta)
                                .zip(&sd)
                                .map(|((a, b), s)| (-0.5 * ((a - b) / s).powi(2)).exp() / s)
                                .product::<f64>()
                    })
                    .sum();
                lp.exp() / mix
            };
            Some(Particle {
                theta,
                psi,
                j,
                weight,
            })
        };

        let mut next = Vec::with_capacity(n);
        let mut attempts = 0u64;
        let chunk = n.max(256) as u64;
        while next.len() < n && (attempts as usize) < budget {
            let end = (attempts + chunk).min(budget as u64);
            let results: Vec<Option<Particle>> =
                (attempts..end).into_par_iter().map(&attempt).collect();
            for r in results {
                attempts += 1;
                if let Some(p) = r {
                    next.push(p);
                    if next.len() == n {
                        break;
                    }
                }
            }
        }
        proposed += attempts as usize;
        if next.is_empty() {
            return Err(Error::ScheduleInfeasible {
                round,
                tolerance: tol,
                attempts: attempts as usize,
            });
        }
        if next.len() < n {
            warnings.push(format!(
                "round {round}: only {} of {n} particles within {tol} after {attempts} attempts",
                next.len()
            ));
        }
        population = next;
    }

    let draws = population
        .into_iter()
        .enumerate()
        .map(|(i, p)| WeightedDraw {
            b: i as u64,
            theta: p.theta,
            weight_unnorm: p.weight,
            j_value: p.j,
            psi_sim: p.psi,
            vol_inv: 1.0,
        })
        .collect();
    Ok(PosteriorSample {
        method: Method::AbcSmc,
        draws,
        proposed,
        delta: *cfg.schedule.last().expect("schedule checked non-empty"),
        delta_scale: DeltaScale::Norm,
        master_seed,
        invalid: Vec::new(),
        accepted: None,
        warnings,
    })
}
