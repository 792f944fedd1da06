//! Finite-difference Jacobians of the simulated-statistics map.
//!
//! The map θ ↦ ψ̂(θ, ε) is differentiated with the shock pack held fixed, so
//! every probe sees the same primitive draws.

use crate::error::{Error, Result};
use crate::models::{Interval, Model, ShockPack};
use crate::numlin::{volume, Matrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianSpec {
    /// Base step; coordinate j uses h₀·max(1, |θ_j|).
    pub h0: f64,
}

impl Default for JacobianSpec {
    fn default() -> Self {
        Self {
            h0: f64::EPSILON.cbrt(),
        }
    }
}

impl JacobianSpec {
    pub fn new(h0: f64) -> Result<Self> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(Error::Precondition(format!(
                "finite-difference step {h0} must be positive"
            )));
        }
        Ok(Self { h0 })
    }
}

/// Central-difference Jacobian (L×K) of `psi` at `theta`.
///
/// When a central probe would leave `support`, the column falls back to a
/// one-sided difference of span 2h on the feasible side.
pub fn fd_jacobian<F>(
    psi: F,
    theta: &[f64],
    spec: &JacobianSpec,
    support: Option<&[Interval]>,
) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let eval = |coordinate: usize, probe: Vec<f64>| -> Result<Vec<f64>> {
        psi(&probe).map_err(|e| Error::JacobianProbe {
            coordinate,
            probe,
            source: Box::new(e),
        })
    };
    let feasible = |j: usize, x: f64| support.is_none_or(|s| s[j].contains(x));
    let shifted = |j: usize, delta: f64| {
        let mut p = theta.to_vec();
        p[j] += delta;
        p
    };

    let mut centre: Option<Vec<f64>> = None;
    let mut columns = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let h = spec.h0 * theta[j].abs().max(1.0);
        let up = feasible(j, theta[j] + h);
        let down = feasible(j, theta[j] - h);
        let column: Vec<f64> = if up && down {
            let plus = eval(j, shifted(j, h))?;
            let minus = eval(j, shifted(j, -h))?;
            // the realised step, which differs from 2h by rounding
            let span = (theta[j] + h) - (theta[j] - h);
            plus.iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / span)
                .collect()
        } else if up || down {
            let step = if up { 2.0 * h } else { -2.0 * h };
            let far = shifted(j, step);
            if !feasible(j, far[j]) {
                return Err(Error::JacobianProbe {
                    coordinate: j,
                    probe: far,
                    source: Box::new(Error::Domain(
                        "support too narrow for one-sided step".into(),
                    )),
                });
            }
            let far_value = eval(j, far)?;
            if centre.is_none() {
                centre = Some(eval(j, theta.to_vec())?);
            }
            let c = centre.as_ref().expect("just set");
            let span = (theta[j] + step) - theta[j];
            far_value
                .iter()
                .zip(c)
                .map(|(a, b)| (a - b) / span)
                .collect()
        } else {
            return Err(Error::JacobianProbe {
                coordinate: j,
                probe: shifted(j, h),
                source: Box::new(Error::Domain("no feasible probe on either side".into())),
            });
        };
        columns.push(column);
    }
    Matrix::from_columns(&columns)
}

/// Inverse volume of a Jacobian; fails when the matrix is rank deficient.
pub fn volume_inverse(jacobian: &Matrix, theta: &[f64]) -> Result<f64> {
    volume(jacobian)
        .map(|v| 1.0 / v)
        .map_err(|e| Error::DegenerateJacobian {
            theta: theta.to_vec(),
            source: Box::new(e),
        })
}

/// vol(∂ψ/∂θ)⁻¹ with the Jacobian taken by finite differences.
pub fn jacobian_volume_inverse<F>(
    psi: F,
    theta: &[f64],
    spec: &JacobianSpec,
    support: Option<&[Interval]>,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let jac = fd_jacobian(psi, theta, spec, support)?;
    volume_inverse(&jac, theta)
}

/// Finite-difference Jacobian of a model's statistics at fixed shocks.
pub fn model_fd_jacobian(
    model: &dyn Model,
    theta: &[f64],
    shocks: &ShockPack,
    spec: &JacobianSpec,
) -> Result<Matrix> {
    let support = model.support();
    fd_jacobian(
        |th| model.psi(th, shocks).map(|p| p.values),
        theta,
        spec,
        Some(&support),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_shockpack, ExponentialModel, NormalModel, NormalStats};
    use crate::numlin::determinant;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn affine_map_recovered() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0], vec![4.0, 0.25]]).unwrap();
        let psi = |th: &[f64]| {
            let mut v = a.mul_vec(th).unwrap();
            v[0] += 7.0;
            Ok(v)
        };
        let j = fd_jacobian(psi, &[0.3, -1.7], &JacobianSpec::default(), None).unwrap();
        for i in 0..3 {
            for k in 0..2 {
                assert!((j[(i, k)] - a[(i, k)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn exponential_matches_analytic() {
        for oi in [false, true] {
            let model = ExponentialModel::new(5, oi).unwrap();
            let pack = make_shockpack(&model, 12, 3);
            let theta = [0.8];
            let fd = model_fd_jacobian(&model, &theta, &pack, &JacobianSpec::default()).unwrap();
            let exact = model.analytic_jacobian(&theta, &pack).unwrap().unwrap();
            for i in 0..fd.rows() {
                assert_relative_eq!(fd[(i, 0)], exact[(i, 0)], max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn normal_ji_volume_is_shock_variance() {
        let model = NormalModel::new(20, NormalStats::JustIdentified).unwrap();
        let pack = make_shockpack(&model, 2, 9);
        let eps = pack.normals();
        let ebar = eps.iter().sum::<f64>() / 20.0;
        let s2 = eps.iter().map(|e| (e - ebar).powi(2)).sum::<f64>() / 20.0;
        let theta = [0.4, 1.7];
        let support = model.support();
        let vi = jacobian_volume_inverse(
            |th| model.psi(th, &pack).map(|p| p.values),
            &theta,
            &JacobianSpec::default(),
            Some(&support),
        )
        .unwrap();
        assert_relative_eq!(vi, 1.0 / s2, max_relative = 1e-7);
    }

    #[test]
    fn identity_jacobian_has_unit_volume() {
        let vi = jacobian_volume_inverse(
            |th| Ok(th.to_vec()),
            &[1.0, 2.0, 3.0],
            &JacobianSpec::default(),
            None,
        )
        .unwrap();
        assert_relative_eq!(vi, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn exponential_oi_volume_closed_form() {
        let model = ExponentialModel::new(5, true).unwrap();
        let pack = make_shockpack(&model, 31, 0);
        let theta = [1.3];
        let psi = model.psi(&theta, &pack).unwrap().values;
        let (ybar, s2) = (psi[0], psi[1]);
        // sqrt(A'A) with A = -(ybar, 2 s2)'/theta
        let oracle = theta[0] / (ybar * ybar + 4.0 * s2 * s2).sqrt();
        let support = model.support();
        let vi = jacobian_volume_inverse(
            |th| model.psi(th, &pack).map(|p| p.values),
            &theta,
            &JacobianSpec::default(),
            Some(&support),
        )
        .unwrap();
        assert_relative_eq!(vi, oracle, max_relative = 1e-6);
    }

    #[test]
    fn central_difference_error_is_second_order() {
        let model = ExponentialModel::new(5, true).unwrap();
        let pack = make_shockpack(&model, 8, 8);
        let theta = [0.6];
        let exact = model.analytic_jacobian(&theta, &pack).unwrap().unwrap();
        let err = |h0: f64| {
            let fd =
                model_fd_jacobian(&model, &theta, &pack, &JacobianSpec::new(h0).unwrap()).unwrap();
            (0..2)
                .map(|i| (fd[(i, 0)] - exact[(i, 0)]).abs())
                .fold(0.0, f64::max)
        };
        let mut h0 = 0.05;
        let mut previous = err(h0);
        while previous > 1e-9 {
            h0 /= 2.0;
            let e = err(h0);
            assert!(previous / e >= 3.0, "h0={h0}: {previous} -> {e}");
            previous = e;
        }
    }

    #[test]
    fn probes_share_the_shock_pack() {
        let model = NormalModel::new(8, NormalStats::JustIdentified).unwrap();
        let pack = make_shockpack(&model, 6, 1);
        // a pack-dependent offset, rounded to a dyadic so the arithmetic is exact
        let offset = (pack.normals().iter().sum::<f64>() * 1024.0).round() / 1024.0;
        let psi = |th: &[f64]| Ok(th.iter().map(|t| t + offset).collect::<Vec<_>>());
        let spec = JacobianSpec::new(2f64.powi(-16)).unwrap();
        let j = fd_jacobian(psi, &[0.5, 1.25], &spec, None).unwrap();
        assert_eq!(j, Matrix::identity(2));
    }

    #[test]
    fn one_sided_near_boundary() {
        let support = [Interval::POSITIVE];
        let spec = JacobianSpec::default();
        let j = fd_jacobian(|th| Ok(vec![th[0] * th[0]]), &[1e-7], &spec, Some(&support)).unwrap();
        // forward difference of x^2 over span 2h: 2x + 2h
        assert!((j[(0, 0)] - 2e-7).abs() < 3.0 * spec.h0);

        let narrow = [Interval::new(0.0, 1e-6)];
        assert!(matches!(
            fd_jacobian(|th| Ok(vec![th[0]]), &[5e-7], &spec, Some(&narrow)),
            Err(Error::JacobianProbe { coordinate: 0, .. })
        ));
    }

    #[test]
    fn probe_failure_names_coordinate() {
        let psi = |th: &[f64]| {
            if th[1] > 1.0 {
                Err(Error::Domain("boom".into()))
            } else {
                Ok(th.to_vec())
            }
        };
        let err = fd_jacobian(psi, &[0.0, 1.0], &JacobianSpec::default(), None).unwrap_err();
        assert!(matches!(err, Error::JacobianProbe { coordinate: 1, .. }));
    }

    #[test]
    fn degenerate_jacobian_is_reported() {
        let psi = |th: &[f64]| Ok(vec![th[0] + th[1], 2.0 * (th[0] + th[1])]);
        let err =
            jacobian_volume_inverse(psi, &[1.0, 1.0], &JacobianSpec::default(), None).unwrap_err();
        assert!(matches!(err, Error::DegenerateJacobian { .. }));
    }

    proptest! {
        #[test]
        fn square_volume_inverse_is_inverse_abs_det(
            entries in proptest::collection::vec(-3.0f64..3.0, 9),
            theta in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let a = Matrix::new(3, 3, entries).unwrap();
            let det = determinant(&a).unwrap();
            prop_assume!(det.abs() > 1e-2);
            let jac = fd_jacobian(|th| a.mul_vec(th), &theta, &JacobianSpec::default(), None).unwrap();
            let vi = volume_inverse(&jac, &theta).unwrap();
            let exact_det = determinant(&jac).unwrap();
            prop_assert!((vi - 1.0 / exact_det.abs()).abs() <= 1e-10 * vi);
        }
    }
}
