//! The benchmark experiments: acceptance rates against δ, sampler races and
//! the Monte Carlo check of estimator moments.

use std::sync::Arc;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use rsamp_core::models::{Arma11Model, MixtureModel, NormalModel, NormalStats};
use rsamp_core::posterior::EstimatorMoments;
use rsamp_core::streams::{stream2, Purpose};
use rsamp_core::{
    abc_ar, abc_ar_tolerance, abc_mcmc, abc_smc, acceptance_counts, ess, rs_sample,
    simulate_observed, smd_estimate, table1_oracle, weighted_mean, Matrix, McmcConfig, Model,
    PosteriorSample, Prior, Proposal, ReferencePosterior, RsOptions, SmcConfig, SmdConfig,
};

use crate::config::{ExperimentConfig, SamplerSpec};
use crate::CliError;

/// A seed for sub-task `index` of family `tag`, derived from `seed`.
pub fn sub_seed(seed: u64, tag: u64, index: u64) -> u64 {
    stream2(seed, Purpose::Data, tag, index).next_u64()
}

/// Runs the sampler a validated config describes.
pub fn run_sampler(cfg: &ExperimentConfig, psi_hat: &[f64]) -> Result<PosteriorSample, CliError> {
    let model = cfg.model.as_ref();
    let w = cfg.weight_matrix();
    let opts = RsOptions {
        optim: cfg.optim.clone(),
        jacobian: cfg.jacobian,
    };
    let sample = match &cfg.sampler {
        SamplerSpec::Rs { b, quantile } => rs_sample(
            model, psi_hat, &w, &cfg.prior, *b, *quantile, cfg.seed, &opts,
        ),
        SamplerSpec::ArQuantile { b, quantile } => {
            abc_ar(model, psi_hat, &w, &cfg.prior, *b, *quantile, cfg.seed)
        }
        SamplerSpec::ArTolerance { delta, proposals } => {
            abc_ar_tolerance(model, psi_hat, &w, &cfg.prior, *delta, *proposals, cfg.seed)
        }
        SamplerSpec::Mcmc {
            delta,
            chain_length,
            proposal_sd,
            init,
        } => {
            let mcmc = McmcConfig {
                init: init.clone().unwrap_or_else(|| model.initial_guess(psi_hat)),
                proposal_sd: proposal_sd.clone(),
                delta: *delta,
                chain_length: *chain_length,
            };
            abc_mcmc(model, psi_hat, &w, &cfg.prior, &mcmc, cfg.seed)
        }
        SamplerSpec::Smc {
            population,
            schedule,
            perturb_sd,
        } => {
            let smc = SmcConfig {
                population: *population,
                schedule: schedule.clone(),
                perturb_sd: perturb_sd.clone(),
            };
            abc_smc(model, psi_hat, &w, &cfg.prior, &smc, cfg.seed)
        }
    };
    sample.map_err(CliError::from)
}

/// Closed-form posteriors available for a configuration, by coordinate.
pub fn references(cfg: &ExperimentConfig, psi_hat: &[f64]) -> Vec<(usize, ReferencePosterior)> {
    let t = cfg.nobs as f64;
    let full_line = |b: &[(f64, f64)]| {
        b.iter()
            .all(|(lo, hi)| *lo == f64::NEG_INFINITY && *hi == f64::INFINITY)
    };
    let positive_line = |b: &[(f64, f64)]| b.len() == 1 && b[0].0 <= 0.0 && b[0].1 == f64::INFINITY;
    match (cfg.model_name.as_str(), &cfg.prior) {
        ("normal-mean", Prior::StandardNormal { .. }) => {
            let precision = 1.0 + t / cfg.known_variance;
            vec![(
                0,
                ReferencePosterior::Normal {
                    mean: psi_hat[0] * t / cfg.known_variance / precision,
                    var: 1.0 / precision,
                },
            )]
        }
        ("normal-mean", Prior::Flat { bounds }) if full_line(bounds) => vec![(
            0,
            ReferencePosterior::Normal {
                mean: psi_hat[0],
                var: cfg.known_variance / t,
            },
        )],
        ("exponential-ji" | "exponential-oi", Prior::Flat { bounds }) if positive_line(bounds) => {
            vec![(
                0,
                ReferencePosterior::Gamma {
                    shape: t + 1.0,
                    rate: t * psi_hat[0],
                },
            )]
        }
        (
            "normal-ji",
            Prior::PowerVariance {
                variance_index: 1,
                alpha,
                ..
            },
        ) => ReferencePosterior::normal_variance_marginal(cfg.nobs, psi_hat[1], *alpha)
            .map(|r| vec![(1, r)])
            .unwrap_or_default(),
        ("mixture", Prior::UniformBox { support, .. }) if cfg.nobs == 1 => vec![(
            0,
            ReferencePosterior::TruncatedMixture {
                x: psi_hat[0],
                lo: support[0].0,
                hi: support[0].1,
            },
        )],
        _ => Vec::new(),
    }
}

/// The normal-model acceptance-rate setup: θ₀ = (0, 2), T = 20,
/// W = diag(σ̂², 2σ̂⁴)/T and a flat prior on σ² ≥ 0. Candidates come from
/// independent normals centred at (ȳ, σ̂²) with sd 4, since the flat prior
/// itself cannot be sampled.
pub struct AcceptanceSetup {
    pub model: NormalModel,
    pub psi_hat: Vec<f64>,
    pub w: Matrix,
    pub prior: Prior,
    pub proposal: Proposal,
}

pub const TABLE2_T: usize = 20;
pub const TABLE2_THETA0: [f64; 2] = [0.0, 2.0];
pub const TABLE2_PROPOSAL_SD: f64 = 4.0;
pub const TABLE2_DELTAS: [f64; 5] = [10.0, 1.0, 0.1, 0.01, 0.001];
/// Published rates for [`TABLE2_DELTAS`]; the last is an upper bound.
pub const TABLE2_PUBLISHED: [f64; 5] = [0.72171, 0.16876, 0.00182, 0.00002, 0.00001];

impl AcceptanceSetup {
    pub fn new(data_seed: u64) -> Result<Self, CliError> {
        let t = TABLE2_T;
        let model = NormalModel::new(t, NormalStats::JustIdentified)?;
        let data = simulate_observed(&model, &TABLE2_THETA0, data_seed)?;
        let psi_hat = model.aux_stats(&data)?.values;
        let s2 = psi_hat[1];
        let w = Matrix::diagonal(&[s2 / t as f64, 2.0 * s2 * s2 / t as f64]);
        let prior = Prior::flat(vec![
            (f64::NEG_INFINITY, f64::INFINITY),
            (0.0, f64::INFINITY),
        ])?;
        let proposal = Proposal::Gaussian {
            mean: psi_hat.clone(),
            sd: vec![TABLE2_PROPOSAL_SD; 2],
        };
        Ok(Self {
            model,
            psi_hat,
            w,
            prior,
            proposal,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AcceptanceRow {
    pub delta: f64,
    pub accepted: u64,
    pub proposals: usize,
    pub rate: f64,
    pub binomial_se: f64,
    pub published: Option<f64>,
}

pub fn bench_acceptance(
    setup: &AcceptanceSetup,
    deltas: &[f64],
    proposals: usize,
    seed: u64,
) -> Result<Vec<AcceptanceRow>, CliError> {
    let counts = acceptance_counts(
        &setup.model,
        &setup.psi_hat,
        &setup.w,
        &setup.prior,
        &setup.proposal,
        deltas,
        proposals,
        seed,
    )?;
    Ok(deltas
        .iter()
        .zip(counts)
        .map(|(&delta, accepted)| {
            let rate = accepted as f64 / proposals as f64;
            AcceptanceRow {
                delta,
                accepted,
                proposals,
                rate,
                binomial_se: (rate * (1.0 - rate) / proposals as f64).sqrt(),
                published: TABLE2_DELTAS
                    .iter()
                    .position(|d| *d == delta)
                    .map(|i| TABLE2_PUBLISHED[i]),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaceModel {
    Mixture,
    Arma,
}

impl RaceModel {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "mixture" => Ok(RaceModel::Mixture),
            "arma11" => Ok(RaceModel::Arma),
            other => Err(CliError::Config(format!(
                "--model: unknown race model `{other}`, expected mixture or arma11"
            ))),
        }
    }
}

/// Model, observed statistics and prior for a race.
pub struct RaceSetup {
    pub model: Arc<dyn Model>,
    pub psi_hat: Vec<f64>,
    pub prior: Prior,
    pub theta0: Vec<f64>,
}

pub const ARMA_THETA0: [f64; 3] = [0.5, 0.5, 1.0];
pub const ARMA_T: usize = 200;
pub const MIXTURE_SCHEDULE: [f64; 3] = [2.0, 0.5, 0.025];

impl RaceSetup {
    pub fn new(which: RaceModel, data_seed: u64) -> Result<Self, CliError> {
        Ok(match which {
            RaceModel::Mixture => Self {
                model: Arc::new(MixtureModel::new(1)?),
                psi_hat: vec![0.0],
                prior: Prior::uniform(vec![(-10.0, 10.0)])?,
                theta0: vec![0.0],
            },
            RaceModel::Arma => {
                let model = Arma11Model::new(ARMA_T)?;
                let data = simulate_observed(&model, &ARMA_THETA0, data_seed)?;
                let psi_hat = model.aux_stats(&data)?.values;
                // σ has unbounded support but is proposed on [0, 3]
                let prior = Prior::uniform_box(
                    vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, f64::INFINITY)],
                    vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 3.0)],
                )?;
                Self {
                    model: Arc::new(model),
                    psi_hat,
                    prior,
                    theta0: ARMA_THETA0.to_vec(),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RaceRow {
    pub method: String,
    pub seconds: f64,
    pub proposals: usize,
    pub kept: usize,
    /// Tolerance in ‖·‖_W units, comparable across methods.
    pub delta_norm: f64,
    pub ess: f64,
    pub posterior_mean: Vec<f64>,
    pub warnings: Vec<String>,
}

fn race_row(name: &str, seconds: f64, sample: &PosteriorSample) -> Result<RaceRow, CliError> {
    let delta_norm = match sample.delta_scale {
        rsamp_core::DeltaScale::Objective => sample.delta.sqrt(),
        rsamp_core::DeltaScale::Norm => sample.delta,
    };
    Ok(RaceRow {
        method: name.to_string(),
        seconds,
        proposals: sample.proposed,
        kept: sample.kept_count(),
        delta_norm,
        ess: ess(sample)?,
        posterior_mean: weighted_mean(sample)?,
        warnings: sample.warnings.clone(),
    })
}

/// Runs each method on the same problem with `proposals` candidate
/// parameters, keeping the fraction `keep`. SMC runs the fixed schedule with
/// a population of the same kept size and reports what it consumed.
pub fn bench_race(
    setup: &RaceSetup,
    methods: &[String],
    proposals: usize,
    keep: f64,
    seed: u64,
) -> Result<Vec<RaceRow>, CliError> {
    if methods.len() < 2 {
        return Err(CliError::Config(
            "--methods: a race needs at least two methods".into(),
        ));
    }
    let mut seen = Vec::new();
    for m in methods {
        if seen.contains(m) {
            return Err(CliError::Config(format!("--methods: `{m}` listed twice")));
        }
        seen.push(m.clone());
    }
    let model = setup.model.as_ref();
    let w = Matrix::identity(model.aux_dim());
    let b = ((proposals as f64 * keep).round() as usize).max(1);
    let q = b as f64 / proposals as f64;
    let mut rows = Vec::new();
    for m in methods {
        let start = Instant::now();
        let sample = match m.as_str() {
            "rs" => rs_sample(
                model,
                &setup.psi_hat,
                &w,
                &setup.prior,
                b,
                q,
                seed,
                &RsOptions::default(),
            ),
            "abc-ar" => abc_ar(model, &setup.psi_hat, &w, &setup.prior, b, q, seed),
            "abc-smc" => {
                let schedule = if model.name() == "mixture" {
                    MIXTURE_SCHEDULE.to_vec()
                } else {
                    vec![1.0, 0.3, 0.1]
                };
                let cfg = SmcConfig {
                    population: b,
                    schedule,
                    perturb_sd: None,
                };
                abc_smc(model, &setup.psi_hat, &w, &setup.prior, &cfg, seed)
            }
            other => {
                return Err(CliError::Config(format!(
                    "--methods: unknown method `{other}`, expected rs, abc-ar or abc-smc"
                )))
            }
        }?;
        let seconds = start.elapsed().as_secs_f64();
        rows.push(race_row(m, seconds, &sample)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentCell {
    pub name: &'static str,
    pub monte_carlo: f64,
    pub se: f64,
    pub oracle: f64,
    /// |Monte Carlo − oracle| > 3 SE.
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorRow {
    pub estimator: &'static str,
    pub cells: Vec<MomentCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Table1Report {
    pub t: usize,
    pub s: usize,
    pub sigma2: f64,
    pub replications: usize,
    pub rs_draws: usize,
    pub rows: Vec<EstimatorRow>,
}

fn moment_cells(xs: &[f64], sigma2: f64, oracle: &EstimatorMoments) -> Vec<MomentCell> {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
    let sq: Vec<f64> = xs.iter().map(|x| (x - sigma2).powi(2)).collect();
    let mse = sq.iter().sum::<f64>() / r;
    let mse_sd = (sq.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    let se_mean = (var / r).sqrt();
    let cell = |name, monte_carlo: f64, se: f64, oracle: f64| MomentCell {
        name,
        monte_carlo,
        se,
        oracle,
        flagged: (monte_carlo - oracle).abs() > 3.0 * se,
    };
    vec![
        cell("mean", mean, se_mean, oracle.mean),
        cell("bias", mean - sigma2, se_mean, oracle.bias),
        cell(
            "variance",
            var,
            ((m4 - var * var) / r).max(0.0).sqrt(),
            oracle.variance,
        ),
        cell("mse", mse, mse_sd / r.sqrt(), oracle.mse),
    ]
}

/// Per-replication (σ̂², reverse-sampler posterior mean of σ² under a flat
/// prior, S-simulation SMD estimate of σ²) for normal datasets with variance
/// `sigma2`.
pub fn table1_estimates(
    t: usize,
    s: usize,
    sigma2: f64,
    replications: usize,
    rs_draws: usize,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let model = NormalModel::new(t, NormalStats::JustIdentified)?;
    let prior = Prior::power_variance(2, 1, 0.0)?;
    let w = Matrix::identity(2);
    (0..replications as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64, f64), CliError> {
            let data = simulate_observed(&model, &[0.0, sigma2], sub_seed(seed, 1, r))?;
            let psi_hat = model.aux_stats(&data)?.values;
            let rs = rs_sample(
                &model,
                &psi_hat,
                &w,
                &prior,
                rs_draws,
                1.0,
                sub_seed(seed, 2, r),
                &RsOptions::default(),
            )?;
            let smd = smd_estimate(
                &model,
                &psi_hat,
                &SmdConfig::new(s, w.clone(), sub_seed(seed, 3, r))?,
            )?;
            Ok((psi_hat[1], weighted_mean(&rs)?[1], smd.minimizer[1]))
        })
        .collect()
}

/// Monte Carlo moments of the three estimators from [`table1_estimates`],
/// each compared with its exact value.
pub fn table1(
    t: usize,
    s: usize,
    sigma2: f64,
    replications: usize,
    rs_draws: usize,
    seed: u64,
) -> Result<Table1Report, CliError> {
    if replications < 100 {
        return Err(CliError::Config("--replications: need at least 100".into()));
    }
    let oracle = table1_oracle(t, s, sigma2)?;
    let estimates = table1_estimates(t, s, sigma2, replications, rs_draws, seed)?;
    let column = |f: fn(&(f64, f64, f64)) -> f64| estimates.iter().map(f).collect::<Vec<f64>>();
    let rows = vec![
        EstimatorRow {
            estimator: "mle",
            cells: moment_cells(&column(|e| e.0), sigma2, &oracle.mle),
        },
        EstimatorRow {
            estimator: "rs-flat",
            cells: moment_cells(&column(|e| e.1), sigma2, &oracle.bayes),
        },
        EstimatorRow {
            estimator: "smd",
            cells: moment_cells(&column(|e| e.2), sigma2, &oracle.smd),
        },
    ];
    Ok(Table1Report {
        t,
        s,
        sigma2,
        replications,
        rs_draws,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_cells_flag_outliers() {
        let xs: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let oracle = EstimatorMoments {
            mean: 4.5,
            bias: 2.5,
            variance: 8.25,
            mse: 14.5,
        };
        let cells = moment_cells(&xs, 2.0, &oracle);
        assert!(cells.iter().all(|c| !c.flagged), "{cells:?}");
        let off = EstimatorMoments {
            mean: 5.5,
            ..oracle
        };
        assert!(moment_cells(&xs, 2.0, &off)[0].flagged);
    }

    #[test]
    fn acceptance_rows_are_nested() {
        let setup = AcceptanceSetup::new(1).unwrap();
        let rows = bench_acceptance(&setup, &TABLE2_DELTAS, 20_000, 3).unwrap();
        assert!(rows.windows(2).all(|r| r[0].accepted >= r[1].accepted));
        assert_eq!(rows[0].published, Some(0.72171));
    }

    #[test]
    fn race_lists_each_method_once() {
        let setup = RaceSetup::new(RaceModel::Mixture, 1).unwrap();
        let methods: Vec<String> = ["rs", "abc-ar", "abc-smc"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = bench_race(&setup, &methods, 20_000, 0.05, 4).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(names, ["rs", "abc-ar", "abc-smc"]);
        assert!(rows[0].delta_norm < rows[1].delta_norm);
        assert!(bench_race(&setup, &methods[..1], 100, 0.1, 1).is_err());
        let twice = vec!["rs".to_string(), "rs".to_string()];
        assert!(bench_race(&setup, &twice, 100, 0.1, 1).is_err());
    }
}
