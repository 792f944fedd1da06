//! Prior distributions: unnormalised log densities and sampling.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A prior over the parameter vector.
///
/// Densities are unnormalised; the reverse sampler's self-normalised weights do
/// not need the constant, which is what makes the improper priors usable.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    /// 𝟙{θ ∈ box}; bounds may be infinite (improper).
    Flat {
        bounds: Vec<(f64, f64)>,
    },
    /// π(θ) = (θ_v)^(−α) 𝟙{θ_v > 0} on coordinate `variance_index` of a
    /// `dim`-vector, flat elsewhere.
    PowerVariance {
        dim: usize,
        variance_index: usize,
        alpha: f64,
    },
    /// Indicator on `support`, sampled uniformly on `sampling` (a sub-box).
    /// The two differ when the support is unbounded but a finite range is
    /// needed for proposals, e.g. σ ∈ [0, ∞) sampled on [0, 3].
    UniformBox {
        support: Vec<(f64, f64)>,
        sampling: Vec<(f64, f64)>,
    },
    StandardNormal {
        dim: usize,
    },
    /// Independent blocks, concatenated.
    Product(Vec<Prior>),
}

fn validate_box(b: &[(f64, f64)], what: &str) -> Result<()> {
    if b.is_empty() {
        return Err(Error::Precondition(format!(
            "{what} needs at least one coordinate"
        )));
    }
    for (i, (lo, hi)) in b.iter().enumerate() {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Precondition(format!(
                "{what} coordinate {i}: need lo < hi, got [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

impl Prior {
    pub fn flat(bounds: Vec<(f64, f64)>) -> Result<Self> {
        validate_box(&bounds, "flat prior")?;
        Ok(Prior::Flat { bounds })
    }

    pub fn uniform_box(support: Vec<(f64, f64)>, sampling: Vec<(f64, f64)>) -> Result<Self> {
        validate_box(&support, "uniform box support")?;
        validate_box(&sampling, "uniform box sampling range")?;
        if support.len() != sampling.len() {
            return Err(Error::Dimension(
                "support and sampling boxes differ in length".into(),
            ));
        }
        for (i, ((slo, shi), (lo, hi))) in support.iter().zip(&sampling).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Precondition(format!(
                    "uniform box sampling range for coordinate {i} must be finite"
                )));
            }
            if lo < slo || hi > shi {
                return Err(Error::Precondition(format!(
                    "sampling range for coordinate {i} exceeds the support"
                )));
            }
        }
        Ok(Prior::UniformBox { support, sampling })
    }

    /// A uniform box whose support and sampling range coincide.
    pub fn uniform(bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::uniform_box(bounds.clone(), bounds)
    }

    pub fn power_variance(dim: usize, variance_index: usize, alpha: f64) -> Result<Self> {
        if variance_index >= dim || !alpha.is_finite() {
            return Err(Error::Precondition(format!(
                "power-variance prior: index {variance_index} / dim {dim} / alpha {alpha}"
            )));
        }
        Ok(Prior::PowerVariance {
            dim,
            variance_index,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::Flat { bounds } => bounds.len(),
            Prior::PowerVariance { dim, .. } => *dim,
            Prior::UniformBox { support, .. } => support.len(),
            Prior::StandardNormal { dim } => *dim,
            Prior::Product(parts) => parts.iter().map(Prior::dim).sum(),
        }
    }

    /// Closed support box per coordinate.
    pub fn support(&self) -> Vec<(f64, f64)> {
        match self {
            Prior::Flat { bounds } => bounds.clone(),
            Prior::PowerVariance {
                dim,
                variance_index,
                ..
            } => (0..*dim)
                .map(|i| {
                    if i == *variance_index {
                        (0.0, f64::INFINITY)
                    } else {
                        (f64::NEG_INFINITY, f64::INFINITY)
                    }
                })
                .collect(),
            Prior::UniformBox { support, .. } => support.clone(),
            Prior::StandardNormal { dim } => vec![(f64::NEG_INFINITY, f64::INFINITY); *dim],
            Prior::Product(parts) => parts.iter().flat_map(Prior::support).collect(),
        }
    }

    /// Log of the unnormalised density; −∞ outside the support.
    pub fn log_density_unnorm(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() || theta.iter().any(|v| v.is_nan()) {
            return f64::NEG_INFINITY;
        }
        let inside = |b: &[(f64, f64)]| theta.iter().zip(b).all(|(x, (lo, hi))| x >= lo && x <= hi);
        match self {
            Prior::Flat { bounds } => {
                if inside(bounds) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::PowerVariance {
                variance_index,
                alpha,
                ..
            } => {
                let v = theta[*variance_index];
                if v > 0.0 && theta.iter().all(|x| x.is_finite()) {
                    -alpha * v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::UniformBox { support, .. } => {
                if inside(support) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::StandardNormal { .. } => -0.5 * theta.iter().map(|x| x * x).sum::<f64>(),
            Prior::Product(parts) => {
                let mut offset = 0;
                let mut total = 0.0;
                for p in parts {
                    let d = p.dim();
                    total += p.log_density_unnorm(&theta[offset..offset + d]);
                    offset += d;
                }
                total
            }
        }
    }

    pub fn is_samplable(&self) -> bool {
        match self {
            Prior::Flat { bounds } => bounds
                .iter()
                .all(|(lo, hi)| lo.is_finite() && hi.is_finite()),
            Prior::PowerVariance { .. } => false,
            Prior::UniformBox { .. } | Prior::StandardNormal { .. } => true,
            Prior::Product(parts) => parts.iter().all(Prior::is_samplable),
        }
    }

    /// One draw from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        if !self.is_samplable() {
            return Err(Error::NotSamplable(format!("{self:?} is improper")));
        }
        let mut out = Vec::with_capacity(self.dim());
        self.sample_into(rng, &mut out);
        Ok(out)
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Prior::Flat { bounds: b } | Prior::UniformBox { sampling: b, .. } => {
                out.extend(
                    b.iter()
                        .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()),
                );
            }
            Prior::StandardNormal { dim } => {
                out.extend((0..*dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            }
            Prior::Product(parts) => parts.iter().for_each(|p| p.sample_into(rng, out)),
            Prior::PowerVariance { .. } => unreachable!("checked by is_samplable"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_density_examples() {
        let flat = Prior::flat(vec![
            (f64::NEG_INFINITY, f64::INFINITY),
            (0.0, f64::INFINITY),
        ])
        .unwrap();
        assert_eq!(flat.log_density_unnorm(&[3.0, 1.0]), 0.0);
        assert_eq!(flat.log_density_unnorm(&[3.0, -1.0]), f64::NEG_INFINITY);

        let pv = Prior::power_variance(2, 1, 1.0).unwrap();
        assert!((pv.log_density_unnorm(&[0.3, 2.0]) + 2f64.ln()).abs() < 1e-15);
        assert_eq!(pv.log_density_unnorm(&[0.3, 0.0]), f64::NEG_INFINITY);

        let ub = Prior::uniform(vec![(-10.0, 10.0)]).unwrap();
        assert_eq!(ub.log_density_unnorm(&[11.0]), f64::NEG_INFINITY);
        assert_eq!(
            ub.log_density_unnorm(&[-3.0]),
            ub.log_density_unnorm(&[7.5])
        );
    }

    #[test]
    fn uniform_sampling_mean() {
        let prior = Prior::uniform(vec![(0.0, 3.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = prior.sample(&mut rng).unwrap()[0];
            assert!((0.0..=3.0).contains(&x));
            sum += x;
        }
        assert!((sum / n as f64 - 1.5).abs() < 0.01);
    }

    #[test]
    fn normal_sampling_mean() {
        let prior = Prior::StandardNormal { dim: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let s: f64 = (0..n).map(|_| prior.sample(&mut rng).unwrap()[0]).sum();
        assert!((s / n as f64).abs() < 0.01);
    }

    #[test]
    fn improper_priors_refuse_to_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let flat = Prior::flat(vec![(0.0, f64::INFINITY)]).unwrap();
        assert!(matches!(flat.sample(&mut rng), Err(Error::NotSamplable(_))));
        let pv = Prior::power_variance(2, 1, 0.0).unwrap();
        assert!(matches!(pv.sample(&mut rng), Err(Error::NotSamplable(_))));
    }

    #[test]
    fn arma_style_box_samples_inside_support() {
        let prior = Prior::uniform_box(
            vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, f64::INFINITY)],
            vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 3.0)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let th = prior.sample(&mut rng).unwrap();
            assert!(prior.log_density_unnorm(&th) > f64::NEG_INFINITY);
            assert!(th[2] <= 3.0);
        }
        assert_eq!(prior.log_density_unnorm(&[0.0, 0.0, 7.0]), 0.0);
    }

    #[test]
    fn product_prior_concatenates() {
        let prior = Prior::Product(vec![
            Prior::StandardNormal { dim: 1 },
            Prior::uniform(vec![(0.0, 1.0)]).unwrap(),
        ]);
        assert_eq!(prior.dim(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let th = prior.sample(&mut rng).unwrap();
        assert_eq!(th.len(), 2);
        assert!((prior.log_density_unnorm(&[1.0, 0.5]) + 0.5).abs() < 1e-15);
        assert_eq!(prior.log_density_unnorm(&[1.0, 1.5]), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_malformed_boxes() {
        assert!(Prior::flat(vec![(1.0, 0.0)]).is_err());
        assert!(
            Prior::uniform_box(vec![(0.0, f64::INFINITY)], vec![(0.0, f64::INFINITY)]).is_err()
        );
    }

    proptest::proptest! {
        #[test]
        fn samples_lie_in_support(seed in 0u64..500) {
            let prior = Prior::Product(vec![
                Prior::uniform(vec![(-2.0, 5.0)]).unwrap(),
                Prior::StandardNormal { dim: 2 },
            ]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let th = prior.sample(&mut rng).unwrap();
            proptest::prop_assert!(prior.log_density_unnorm(&th) > f64::NEG_INFINITY);
        }
    }
}
