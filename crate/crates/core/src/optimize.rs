//! Derivative-free minimisers: golden-section search in one dimension and
//! Nelder–Mead in several, with a multistart wrapper.

use crate::error::{Error, Result};

/// Penalty multiplier applied to the squared bound violation.
pub const BOUND_PENALTY: f64 = 1e10;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOptions {
    /// Defaults to 200·K when `None`.
    pub max_iterations: Option<usize>,
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Extra Nelder–Mead runs restarted from the incumbent. The default of one
    /// recovers from a simplex that collapsed onto a bound.
    pub restarts: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: None,
            x_tolerance: 1e-8,
            f_tolerance: 1e-12,
            bounds: None,
            restarts: 1,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_tolerance > 0.0) || !(self.f_tolerance > 0.0) {
            return Err(Error::Precondition("tolerances must be positive".into()));
        }
        if let Some(b) = &self.bounds {
            if b.iter().any(|(lo, hi)| !(lo < hi)) {
                return Err(Error::Precondition("bounds need lo < hi".into()));
            }
        }
        Ok(())
    }

    fn iteration_cap(&self, dim: usize) -> usize {
        self.max_iterations.unwrap_or(200 * dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub minimizer: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a local minimum of `f` on [lo, hi].
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, opts: &OptimOptions) -> Result<OptimResult>
where
    F: FnMut(f64) -> f64,
{
    opts.validate()?;
    if !(lo < hi) {
        return Err(Error::Precondition(format!(
            "need lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { location: vec![x] })
        }
    };
    let cap = opts.iteration_cap(1);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    let mut iterations = 0;
    while b - a > 2.0 * opts.x_tolerance && iterations < cap {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        iterations += 1;
    }
    let mid = 0.5 * (a + b);
    let fm = eval(mid)?;
    let (x, fx) = [(c, fc), (d, fd), (mid, fm)]
        .into_iter()
        .fold(
            (mid, fm),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        );
    Ok(OptimResult {
        minimizer: vec![x],
        objective_value: fx,
        iterations,
        converged: b - a <= 2.0 * opts.x_tolerance,
    })
}

fn clamp_to(x: &[f64], bounds: &[(f64, f64)]) -> (Vec<f64>, f64) {
    let mut violation = 0.0;
    let clamped = x
        .iter()
        .zip(bounds)
        .map(|(v, (lo, hi))| {
            let c = v.clamp(*lo, *hi);
            violation += (v - c) * (v - c);
            c
        })
        .collect();
    (clamped, violation)
}

/// Nelder–Mead simplex minimisation from `x0`.
///
/// Non-finite objective values are treated as +∞ so the simplex retreats from
/// them; only the starting point must evaluate finitely. With `opts.bounds`
/// the objective is evaluated at the clamped point plus a quadratic penalty,
/// and the returned minimizer is always inside the bounds.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &OptimOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    opts.validate()?;
    if x0.is_empty() {
        return Err(Error::Precondition(
            "nelder_mead needs dimension >= 1".into(),
        ));
    }
    if let Some(b) = &opts.bounds {
        if b.len() != x0.len() {
            return Err(Error::Dimension(format!(
                "{} bounds for a {}-dimensional start",
                b.len(),
                x0.len()
            )));
        }
    }
    let bounds = opts.bounds.clone();
    let mut objective = |x: &[f64]| -> f64 {
        let v = match &bounds {
            Some(b) => {
                let (c, viol) = clamp_to(x, b);
                f(&c) + BOUND_PENALTY * viol
            }
            None => f(x),
        };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let start = match &opts.bounds {
        Some(b) => clamp_to(x0, b).0,
        None => x0.to_vec(),
    };
    if !objective(&start).is_finite() {
        return Err(Error::Evaluation { location: start });
    }

    let mut result = simplex_run(&mut objective, &start, opts);
    for _ in 0..opts.restarts {
        let again = simplex_run(&mut objective, &result.minimizer, opts);
        let iterations = result.iterations + again.iterations;
        if again.objective_value <= result.objective_value {
            result = again;
        }
        result.iterations = iterations;
    }
    if let Some(b) = &opts.bounds {
        result.minimizer = clamp_to(&result.minimizer, b).0;
    }
    result.objective_value = objective(&result.minimizer);
    Ok(result)
}

fn simplex_run<F>(f: &mut F, x0: &[f64], opts: &OptimOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let cap = opts.iteration_cap(n);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for j in 0..n {
        let mut x = x0.to_vec();
        x[j] += 0.05 * x0[j].abs().max(1.0);
        let fx = f(&x);
        simplex.push((x, fx));
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&best.0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = simplex[n].1 - simplex[0].1;
        if diameter < opts.x_tolerance && spread < opts.f_tolerance {
            converged = true;
            break;
        }
        if iterations >= cap {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (v, b) in x.iter_mut().zip(&x_best) {
                *v = b + 0.5 * (*v - b);
            }
            *fx = f(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (minimizer, objective_value) = simplex.swap_remove(0);
    OptimResult {
        minimizer,
        objective_value,
        iterations,
        converged,
    }
}

/// Runs Nelder–Mead from every start and keeps the lowest objective; ties go
/// to the earlier start.
pub fn multistart<F>(mut f: F, starts: &[Vec<f64>], opts: &OptimOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    if starts.is_empty() {
        return Err(Error::Precondition(
            "multistart needs at least one start".into(),
        ));
    }
    let mut best: Option<OptimResult> = None;
    let mut failures = Vec::new();
    for x0 in starts {
        match nelder_mead(&mut f, x0, opts) {
            Ok(r) => {
                if best
                    .as_ref()
                    .is_none_or(|b| r.objective_value < b.objective_value)
                {
                    best = Some(r);
                }
            }
            Err(e) => failures.push(e),
        }
    }
    best.ok_or(Error::AllStartsFailed(failures))
}
