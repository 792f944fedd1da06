//! Diagnostics for weighted samples and closed-form reference posteriors for
//! the benchmark models.

use statrs::distribution::{ContinuousCDF, Gamma, InverseGamma, Normal};

use crate::error::{Error, Result};
use crate::models::MIXTURE_NARROW_SD;
use crate::samplers::PosteriorSample;

/// Probabilities reported in summaries.
pub const SUMMARY_PROBS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];

/// Self-normalised weighted mean per coordinate.
pub fn weighted_mean(sample: &PosteriorSample) -> Result<Vec<f64>> {
    let w = sample.normalized_weights()?;
    Ok((0..sample.param_dim())
        .map(|k| {
            sample
                .draws
                .iter()
                .zip(&w)
                .map(|(d, wi)| wi * d.theta[k])
                .sum()
        })
        .collect())
}

/// Weighted variance Σ w̃_b (θ_b − θ̄)² per coordinate.
pub fn weighted_variance(sample: &PosteriorSample) -> Result<Vec<f64>> {
    let w = sample.normalized_weights()?;
    let mean = weighted_mean(sample)?;
    Ok(mean
        .iter()
        .enumerate()
        .map(|(k, m)| {
            sample
                .draws
                .iter()
                .zip(&w)
                .map(|(d, wi)| wi * (d.theta[k] - m).powi(2))
                .sum()
        })
        .collect())
}

/// Monte Carlo standard error of the weighted mean,
/// sqrt(Σ w̃_b² (θ_b − θ̄)²) per coordinate.
pub fn mc_standard_error(sample: &PosteriorSample) -> Result<Vec<f64>> {
    let w = sample.normalized_weights()?;
    let mean = weighted_mean(sample)?;
    Ok(mean
        .iter()
        .enumerate()
        .map(|(k, m)| {
            sample
                .draws
                .iter()
                .zip(&w)
                .map(|(d, wi)| (wi * (d.theta[k] - m)).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Effective sample size 1/Σ w̃².
pub fn ess(sample: &PosteriorSample) -> Result<f64> {
    let w = sample.normalized_weights()?;
    Ok(1.0 / w.iter().map(|x| x * x).sum::<f64>())
}

/// (value, normalised weight) pairs of one coordinate, sorted by value.
fn sorted_coordinate(sample: &PosteriorSample, k: usize) -> Result<Vec<(f64, f64)>> {
    if k >= sample.param_dim() {
        return Err(Error::Dimension(format!(
            "coordinate {k} out of range for dimension {}",
            sample.param_dim()
        )));
    }
    let w = sample.normalized_weights()?;
    let mut pairs: Vec<(f64, f64)> = sample
        .draws
        .iter()
        .zip(w)
        .map(|(d, wi)| (d.theta[k], wi))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

fn quantile_of_sorted(pairs: &[(f64, f64)], p: f64) -> f64 {
    let mut cum = 0.0;
    for (v, w) in pairs {
        cum += w;
        if cum >= p - 1e-12 {
            return *v;
        }
    }
    pairs.last().map_or(f64::NAN, |x| x.0)
}

/// Smallest value whose cumulative normalised weight reaches `p`.
pub fn weighted_quantile(sample: &PosteriorSample, k: usize, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Precondition(format!(
            "quantile level {p} must lie in (0, 1)"
        )));
    }
    Ok(quantile_of_sorted(&sorted_coordinate(sample, k)?, p))
}

/// Closed-form posteriors of the benchmark models.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferencePosterior {
    Normal {
        mean: f64,
        var: f64,
    },
    /// Shape and rate.
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// θ | x for the two-component mixture under a uniform prior on [lo, hi].
    TruncatedMixture {
        x: f64,
        lo: f64,
        hi: f64,
    },
    /// Shape and scale; density ∝ v^(−shape−1) exp(−scale/v).
    InverseGamma {
        shape: f64,
        scale: f64,
    },
}

impl ReferencePosterior {
    /// Marginal posterior of σ² in the normal model with statistics (ȳ, σ̂²)
    /// from T observations under the prior (σ²)^(−α).
    pub fn normal_variance_marginal(t: usize, sigma2_hat: f64, alpha: f64) -> Result<Self> {
        let shape = (t as f64 - 3.0) / 2.0 + alpha;
        if !(shape > 0.0 && sigma2_hat > 0.0) {
            return Err(Error::Domain(format!(
                "variance marginal undefined for T={t}, alpha={alpha}, sigma2_hat={sigma2_hat}"
            )));
        }
        Ok(ReferencePosterior::InverseGamma {
            shape,
            scale: t as f64 * sigma2_hat / 2.0,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            ReferencePosterior::Normal { mean, var } => Normal::new(mean, var.sqrt())
                .expect("positive variance")
                .cdf(x),
            ReferencePosterior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    Gamma::new(shape, rate).expect("positive parameters").cdf(x)
                }
            }
            ReferencePosterior::TruncatedMixture { x: obs, lo, hi } => {
                let wide = Normal::new(obs, 1.0).expect("unit sd");
                let narrow = Normal::new(obs, MIXTURE_NARROW_SD).expect("positive sd");
                let untruncated = |t: f64| 0.5 * wide.cdf(t) + 0.5 * narrow.cdf(t);
                let t = x.clamp(lo, hi);
                (untruncated(t) - untruncated(lo)) / (untruncated(hi) - untruncated(lo))
            }
            ReferencePosterior::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    InverseGamma::new(shape, scale)
                        .expect("positive parameters")
                        .cdf(x)
                }
            }
        }
    }

    /// Posterior mean, when finite.
    pub fn mean(&self) -> f64 {
        match *self {
            ReferencePosterior::Normal { mean, .. } => mean,
            ReferencePosterior::Gamma { shape, rate } => shape / rate,
            ReferencePosterior::TruncatedMixture { x, lo, hi } => {
                // E[θ 1{lo ≤ θ ≤ hi}] for each normal component, over the mass
                let part = |sd: f64| {
                    let n = Normal::new(x, sd).expect("positive sd");
                    let (a, b) = ((lo - x) / sd, (hi - x) / sd);
                    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                    (
                        0.5 * (x * (n.cdf(hi) - n.cdf(lo)) + sd * (phi(a) - phi(b))),
                        0.5 * (n.cdf(hi) - n.cdf(lo)),
                    )
                };
                let (m1, p1) = part(1.0);
                let (m2, p2) = part(MIXTURE_NARROW_SD);
                (m1 + m2) / (p1 + p2)
            }
            ReferencePosterior::InverseGamma { shape, scale } => {
                if shape > 1.0 {
                    scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Reference CDF at `x`.
pub fn reference_cdf(reference: &ReferencePosterior, x: f64) -> f64 {
    reference.cdf(x)
}

/// sup |F_w − F| over the sample points, checking both sides of each jump of
/// the weighted empirical CDF.
pub fn weighted_ks(
    sample: &PosteriorSample,
    k: usize,
    reference: &ReferencePosterior,
) -> Result<f64> {
    let pairs = sorted_coordinate(sample, k)?;
    let mut before = 0.0;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let x = pairs[i].0;
        let mut after = before;
        while i < pairs.len() && pairs[i].0 == x {
            after += pairs[i].1;
            i += 1;
        }
        let f = reference.cdf(x);
        worst = worst.max((after - f).abs()).max((before - f).abs());
        before = after;
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    /// Normalised weight falling in [lo, hi).
    pub weight: f64,
}

/// Equal-width bins over the weighted 0.1 %–99.9 % range of coordinate `k`.
pub fn histogram(sample: &PosteriorSample, k: usize, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(Error::Precondition(
            "histogram needs at least one bin".into(),
        ));
    }
    let pairs = sorted_coordinate(sample, k)?;
    let lo = quantile_of_sorted(&pairs, 0.001);
    let hi = quantile_of_sorted(&pairs, 0.999);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            weight: 0.0,
        })
        .collect();
    for (v, w) in pairs {
        if v < lo || v > lo + bins as f64 * width {
            continue;
        }
        let i = (((v - lo) / width) as usize).min(bins - 1);
        out[i].weight += w;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub sd: f64,
    pub mc_se: f64,
    /// Values at [`SUMMARY_PROBS`].
    pub quantiles: Vec<f64>,
    pub ks: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub ess: f64,
    pub coordinates: Vec<CoordinateSummary>,
}

/// Per-coordinate moments and quantiles, plus KS distances for coordinates
/// that have a reference.
pub fn summarize(
    sample: &PosteriorSample,
    references: &[(usize, ReferencePosterior)],
) -> Result<Summary> {
    let mean = weighted_mean(sample)?;
    let var = weighted_variance(sample)?;
    let se = mc_standard_error(sample)?;
    let coordinates = (0..sample.param_dim())
        .map(|k| {
            let pairs = sorted_coordinate(sample, k)?;
            let ks = match references.iter().find(|(c, _)| *c == k) {
                Some((_, r)) => Some(weighted_ks(sample, k, r)?),
                None => None,
            };
            Ok(CoordinateSummary {
                mean: mean[k],
                sd: var[k].sqrt(),
                mc_se: se[k],
                quantiles: SUMMARY_PROBS
                    .iter()
                    .map(|p| quantile_of_sorted(&pairs, *p))
                    .collect(),
                ks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Summary {
        ess: ess(sample)?,
        coordinates,
    })
}

/// κ₁(S, T), the variance inflation of the SMD variance estimator.
pub fn kappa1(s: f64, t: f64) -> f64 {
    let n = s * (t - 1.0);
    n * n * (t - 1.0 + n - 2.0) / ((n - 2.0).powi(2) * (n - 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorMoments {
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

impl EstimatorMoments {
    fn new(sigma2: f64, mean: f64, variance: f64) -> Self {
        let bias = mean - sigma2;
        Self {
            mean,
            bias,
            variance,
            mse: variance + bias * bias,
        }
    }
}

/// Exact sampling moments of the variance estimators in the normal model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1 {
    pub mle: EstimatorMoments,
    /// Posterior mean under a flat prior; the reverse sampler shares it.
    pub bayes: EstimatorMoments,
    pub smd: EstimatorMoments,
    pub kappa1: f64,
}

/// Closed-form moments of σ̂²_ML, the flat-prior posterior mean and σ̂²_SMD
/// for T observations, S simulations and true variance σ².
pub fn table1_oracle(t: usize, s: usize, sigma2: f64) -> Result<Table1> {
    let (tf, sf) = (t as f64, s as f64);
    let n = sf * (tf - 1.0);
    if t <= 5 || n <= 4.0 {
        return Err(Error::Domain(format!(
            "need T > 5 and S(T-1) > 4, got T={t}, S={s}"
        )));
    }
    let s4 = sigma2 * sigma2;
    let k1 = kappa1(sf, tf);
    Ok(Table1 {
        mle: EstimatorMoments::new(
            sigma2,
            sigma2 * (tf - 1.0) / tf,
            2.0 * s4 * (tf - 1.0) / (tf * tf),
        ),
        bayes: EstimatorMoments::new(
            sigma2,
            sigma2 * (tf - 1.0) / (tf - 5.0),
            2.0 * s4 * (tf - 1.0) / (tf - 5.0).powi(2),
        ),
        smd: EstimatorMoments::new(sigma2, sigma2 * n / (n - 2.0), 2.0 * s4 * k1 / (tf - 1.0)),
        kappa1: k1,
    })
}
