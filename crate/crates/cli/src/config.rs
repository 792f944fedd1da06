//! Experiment configuration: flat `dotted.key = value` text.
//!
//! Parsing is strict. Unknown keys, duplicates and malformed values are
//! errors naming the offending key. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rsamp_core::models::MODEL_NAMES;
use rsamp_core::{build_model, JacobianSpec, Matrix, Method, Model, OptimOptions, Prior};

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "model.name",
    "model.T",
    "model.sigma2",
    "data.psi",
    "data.observations",
    "data.theta0",
    "data.seed",
    "prior.kind",
    "prior.lo",
    "prior.hi",
    "prior.sample_lo",
    "prior.sample_hi",
    "prior.alpha",
    "prior.variance_index",
    "sampler.method",
    "sampler.B",
    "sampler.quantile",
    "sampler.delta",
    "sampler.proposals",
    "sampler.chain_length",
    "sampler.proposal_sd",
    "sampler.init",
    "sampler.schedule",
    "sampler.population",
    "sampler.perturb_sd",
    "weight.diag",
    "optim.xtol",
    "optim.ftol",
    "optim.max_iter",
    "optim.restarts",
    "jacobian.fd_step",
    "output.dir",
    "output.bins",
];

/// Raw key/value pairs with the line each came from (0 for overrides).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {line_no}: expected `key = value`"))
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Config(format!(
                    "line {line_no}: unknown key `{key}`"
                )));
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(CliError::Config(format!(
                    "line {line_no}: `{key}` already set on line {first}"
                )));
            }
            entries.insert(key.to_string(), (value.trim().to_string(), line_no));
        }
        Ok(Self { entries })
    }

    /// Sets `key`, replacing any value from the file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.entries.insert(key.to_string(), (value.into(), 0));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| invalid(key, format!("cannot parse `{v}`: {e}")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        let s = s.trim();
                        s.parse::<f64>()
                            .map_err(|e| invalid(key, format!("cannot parse `{s}`: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    fn required<T>(&self, key: &str, value: Option<T>) -> Result<T, CliError> {
        value.ok_or_else(|| invalid(key, "required"))
    }
}

/// Where the observed statistics come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    Psi(Vec<f64>),
    Observations(Vec<f64>),
    Simulate { theta0: Vec<f64>, seed: u64 },
}

/// Sampler-specific settings after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplerSpec {
    Rs {
        b: usize,
        quantile: f64,
    },
    ArQuantile {
        b: usize,
        quantile: f64,
    },
    ArTolerance {
        delta: f64,
        proposals: usize,
    },
    Mcmc {
        delta: f64,
        chain_length: usize,
        proposal_sd: Vec<f64>,
        init: Option<Vec<f64>>,
    },
    Smc {
        population: usize,
        schedule: Vec<f64>,
        perturb_sd: Option<Vec<f64>>,
    },
}

impl SamplerSpec {
    pub fn method(&self) -> Method {
        match self {
            SamplerSpec::Rs { .. } => Method::ReverseSampler,
            SamplerSpec::ArQuantile { .. } | SamplerSpec::ArTolerance { .. } => Method::AbcAr,
            SamplerSpec::Mcmc { .. } => Method::AbcMcmc,
            SamplerSpec::Smc { .. } => Method::AbcSmc,
        }
    }
}

#[derive(Clone)]
pub struct ExperimentConfig {
    pub model_name: String,
    pub nobs: usize,
    pub known_variance: f64,
    pub model: Arc<dyn Model>,
    pub data: DataSpec,
    pub prior: Prior,
    pub sampler: SamplerSpec,
    /// Diagonal of W; identity when absent.
    pub weight_diag: Option<Vec<f64>>,
    pub seed: u64,
    pub optim: OptimOptions,
    pub jacobian: JacobianSpec,
    pub out_dir: PathBuf,
    pub bins: usize,
}

impl std::fmt::Debug for ExperimentConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExperimentConfig")
            .field("model", &self.model_name)
            .field("nobs", &self.nobs)
            .field("data", &self.data)
            .field("prior", &self.prior)
            .field("sampler", &self.sampler)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

fn positive(key: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, format!("must be positive, got {x}")))
    }
}

fn at_least_one(key: &str, n: usize) -> Result<usize, CliError> {
    if n >= 1 {
        Ok(n)
    } else {
        Err(invalid(key, "must be at least 1"))
    }
}

fn expect_len(key: &str, v: Vec<f64>, k: usize) -> Result<Vec<f64>, CliError> {
    if v.len() == k {
        Ok(v)
    } else {
        Err(invalid(
            key,
            format!("expected {k} values, got {}", v.len()),
        ))
    }
}

fn build_prior(raw: &RawConfig, model: &dyn Model) -> Result<Prior, CliError> {
    let k = model.param_dim();
    let kind = raw.get("prior.kind").unwrap_or("flat");
    let bounds = |lo_key: &str, hi_key: &str| -> Result<Option<Vec<(f64, f64)>>, CliError> {
        match (raw.list(lo_key)?, raw.list(hi_key)?) {
            (None, None) => Ok(None),
            (Some(lo), Some(hi)) => {
                let lo = expect_len(lo_key, lo, k)?;
                let hi = expect_len(hi_key, hi, k)?;
                Ok(Some(lo.into_iter().zip(hi).collect()))
            }
            (None, Some(_)) => Err(invalid(lo_key, "required with its upper bound")),
            (Some(_), None) => Err(invalid(hi_key, "required with its lower bound")),
        }
    };
    let prior = match kind {
        "flat" => {
            let b = bounds("prior.lo", "prior.hi")?
                .unwrap_or_else(|| model.support().iter().map(|iv| (iv.lo, iv.hi)).collect());
            Prior::flat(b)
        }
        "uniform" => {
            let support = raw.required("prior.lo", bounds("prior.lo", "prior.hi")?)?;
            let sampling =
                bounds("prior.sample_lo", "prior.sample_hi")?.unwrap_or_else(|| support.clone());
            Prior::uniform_box(support, sampling)
        }
        "normal" => Ok(Prior::StandardNormal { dim: k }),
        "power-variance" => {
            let alpha = raw.parsed::<f64>("prior.alpha")?.unwrap_or(0.0);
            let index = raw.parsed::<usize>("prior.variance_index")?.unwrap_or(1);
            Prior::power_variance(k, index, alpha)
        }
        other => {
            return Err(invalid(
                "prior.kind",
                format!(
                    "unknown prior `{other}`, expected flat, uniform, normal or power-variance"
                ),
            ))
        }
    };
    let prior = prior.map_err(|e| invalid("prior", e))?;
    if prior.dim() != k {
        return Err(invalid(
            "prior",
            format!("dimension {} but the model has {k} parameters", prior.dim()),
        ));
    }
    Ok(prior)
}

fn build_sampler(raw: &RawConfig, model: &dyn Model) -> Result<SamplerSpec, CliError> {
    let k = model.param_dim();
    let method = raw.get("sampler.method").unwrap_or("rs");
    let b = raw.parsed::<usize>("sampler.B")?;
    let quantile = raw.parsed::<f64>("sampler.quantile")?;
    let delta = raw.parsed::<f64>("sampler.delta")?;
    if let Some(b) = b {
        at_least_one("sampler.B", b)?;
    }
    if let Some(q) = quantile {
        if !(q > 0.0 && q <= 1.0) {
            return Err(invalid(
                "sampler.quantile",
                format!("must lie in (0, 1], got {q}"),
            ));
        }
    }
    if let Some(d) = delta {
        positive("sampler.delta", d)?;
    }
    Ok(match method {
        "rs" => SamplerSpec::Rs {
            b: raw.required("sampler.B", b)?,
            quantile: quantile.unwrap_or(1.0),
        },
        "abc-ar" => match delta {
            Some(delta) => SamplerSpec::ArTolerance {
                delta,
                proposals: at_least_one(
                    "sampler.proposals",
                    raw.required("sampler.proposals", raw.parsed("sampler.proposals")?)?,
                )?,
            },
            None => SamplerSpec::ArQuantile {
                b: raw.required("sampler.B", b)?,
                quantile: raw.required("sampler.quantile", quantile)?,
            },
        },
        "abc-mcmc" => {
            let chain_length = match raw.parsed::<usize>("sampler.chain_length")? {
                Some(n) => at_least_one("sampler.chain_length", n)?,
                None => raw.required("sampler.chain_length", b)?,
            };
            let proposal_sd = expect_len(
                "sampler.proposal_sd",
                raw.required("sampler.proposal_sd", raw.list("sampler.proposal_sd")?)?,
                k,
            )?;
            for s in &proposal_sd {
                positive("sampler.proposal_sd", *s)?;
            }
            SamplerSpec::Mcmc {
                delta: raw.required("sampler.delta", delta)?,
                chain_length,
                proposal_sd,
                init: raw
                    .list("sampler.init")?
                    .map(|v| expect_len("sampler.init", v, k))
                    .transpose()?,
            }
        }
        "abc-smc" => {
            let population = match raw.parsed::<usize>("sampler.population")? {
                Some(n) => at_least_one("sampler.population", n)?,
                None => raw.required("sampler.population", b)?,
            };
            let schedule = raw.required("sampler.schedule", raw.list("sampler.schedule")?)?;
            if schedule.iter().any(|d| !(*d > 0.0)) || schedule.windows(2).any(|p| !(p[1] < p[0])) {
                return Err(invalid(
                    "sampler.schedule",
                    "must be positive and strictly decreasing",
                ));
            }
            SamplerSpec::Smc {
                population,
                schedule,
                perturb_sd: raw
                    .list("sampler.perturb_sd")?
                    .map(|v| expect_len("sampler.perturb_sd", v, k))
                    .transpose()?,
            }
        }
        other => {
            return Err(invalid(
                "sampler.method",
                format!("unknown method `{other}`, expected rs, abc-ar, abc-mcmc or abc-smc"),
            ))
        }
    })
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let model_name = raw
            .required("model.name", raw.get("model.name"))?
            .to_string();
        if !MODEL_NAMES.contains(&model_name.as_str()) {
            return Err(invalid(
                "model.name",
                format!(
                    "unknown model `{model_name}`, expected one of {}",
                    MODEL_NAMES.join(", ")
                ),
            ));
        }
        let data_obs = raw.list("data.observations")?;
        let nobs = match raw.parsed::<usize>("model.T")? {
            Some(t) => at_least_one("model.T", t)?,
            None => data_obs
                .as_ref()
                .map(Vec::len)
                .ok_or_else(|| invalid("model.T", "required unless data.observations is given"))?,
        };
        let known_variance = positive("model.sigma2", raw.parsed("model.sigma2")?.unwrap_or(1.0))?;
        let model =
            build_model(&model_name, nobs, known_variance).map_err(|e| invalid("model", e))?;

        let data = match (raw.list("data.psi")?, data_obs, raw.list("data.theta0")?) {
            (Some(psi), None, None) => DataSpec::Psi(expect_len("data.psi", psi, model.aux_dim())?),
            (None, Some(obs), None) => {
                if obs.len() != nobs {
                    return Err(invalid(
                        "data.observations",
                        format!("expected {nobs} values, got {}", obs.len()),
                    ));
                }
                DataSpec::Observations(obs)
            }
            (None, None, Some(theta0)) => DataSpec::Simulate {
                theta0: expect_len("data.theta0", theta0, model.param_dim())?,
                seed: raw.required("data.seed", raw.parsed("data.seed")?)?,
            },
            (None, None, None) => {
                return Err(invalid(
                    "data",
                    "one of data.psi, data.observations, data.theta0 is required",
                ))
            }
            _ => {
                return Err(invalid(
                    "data",
                    "give only one of data.psi, data.observations, data.theta0",
                ))
            }
        };

        let prior = build_prior(raw, model.as_ref())?;
        let sampler = build_sampler(raw, model.as_ref())?;

        let weight_diag = raw
            .list("weight.diag")?
            .map(|v| expect_len("weight.diag", v, model.aux_dim()))
            .transpose()?;
        if let Some(d) = &weight_diag {
            for x in d {
                positive("weight.diag", *x)?;
            }
        }

        let seed = raw.required("seed", raw.parsed::<u64>("seed")?)?;

        let mut optim = OptimOptions::default();
        if let Some(x) = raw.parsed::<f64>("optim.xtol")? {
            optim.x_tolerance = positive("optim.xtol", x)?;
        }
        if let Some(x) = raw.parsed::<f64>("optim.ftol")? {
            optim.f_tolerance = positive("optim.ftol", x)?;
        }
        if let Some(n) = raw.parsed::<usize>("optim.max_iter")? {
            optim.max_iterations = Some(at_least_one("optim.max_iter", n)?);
        }
        if let Some(n) = raw.parsed::<usize>("optim.restarts")? {
            optim.restarts = n;
        }
        let jacobian = match raw.parsed::<f64>("jacobian.fd_step")? {
            Some(h) => JacobianSpec::new(h).map_err(|e| invalid("jacobian.fd_step", e))?,
            None => JacobianSpec::default(),
        };
        let out_dir = PathBuf::from(raw.get("output.dir").unwrap_or("rsamp-out"));
        let bins = at_least_one("output.bins", raw.parsed("output.bins")?.unwrap_or(100))?;

        Ok(Self {
            model_name,
            nobs,
            known_variance,
            model,
            data,
            prior,
            sampler,
            weight_diag,
            seed,
            optim,
            jacobian,
            out_dir,
            bins,
        })
    }

    pub fn weight_matrix(&self) -> Matrix {
        match &self.weight_diag {
            Some(d) => Matrix::diagonal(d),
            None => Matrix::identity(self.model.aux_dim()),
        }
    }

    /// Observed auxiliary statistics.
    pub fn psi_hat(&self) -> Result<Vec<f64>, CliError> {
        let stats = match &self.data {
            DataSpec::Psi(p) => return Ok(p.clone()),
            DataSpec::Observations(obs) => {
                let data = rsamp_core::Dataset::new(obs.clone())
                    .map_err(|e| invalid("data.observations", e))?;
                self.model.aux_stats(&data)
            }
            DataSpec::Simulate { theta0, seed } => {
                rsamp_core::simulate_observed(self.model.as_ref(), theta0, *seed)
                    .and_then(|d| self.model.aux_stats(&d))
            }
        };
        stats.map(|s| s.values).map_err(|e| invalid("data", e))
    }
}
