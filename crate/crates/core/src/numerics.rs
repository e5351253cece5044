//! Periodic trapezoid quadrature and monotone bisection.
//!
//! Every integral in this crate is over one period `[0, 1)` of a function of
//! `cos 2πf`. On a uniform grid of `N` points the trapezoid rule reduces to
//! the plain sample mean, which is also the per-cell average over the `N`
//! eigenvalues of an `N`-cell circulant channel. Both paths share
//! [`uniform_mean`] so their results agree bit-for-bit.

use crate::error::{Error, Result};
use crate::model::QuadratureConfig;

/// Hard cap on bisection steps.
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Default absolute tolerance of scalar solves.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-12;

/// Tolerance that runs a bisection down to (nearly) adjacent floats; for
/// solves whose residual is in different units than the unknown.
pub const FULL_PRECISION_TOL: f64 = 1e-15;

/// Abscissa of sample `k` on the uniform `n`-point grid of `[0, 1)`.
#[inline]
pub fn grid_point(k: usize, n: usize) -> f64 {
    k as f64 / n as f64
}

/// Pairwise sum with a fixed reduction tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_map(values, &|v| v)
}

/// Pairwise sum of `f` applied to each value, same reduction tree as
/// [`pairwise_sum`].
pub fn pairwise_sum_map<F>(values: &[f64], f: &F) -> f64
where
    F: Fn(f64) -> f64,
{
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().map(|&v| f(v)).sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    pairwise_sum_map(left, f) + pairwise_sum_map(right, f)
}

/// Mean of `f` over the uniform `n`-point grid of `[0, 1)`.
pub fn uniform_mean<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    assert!(n > 0, "empty grid");
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let x = grid_point(k, n);
        let y = f(x)?;
        if !y.is_finite() {
            return Err(Error::NonFiniteIntegrand { x });
        }
        samples.push(y);
    }
    Ok(pairwise_sum(&samples) / n as f64)
}

/// Converged estimate and the grid size it was taken on.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined<T> {
    pub value: f64,
    pub points: usize,
    pub detail: T,
}

/// Grid-doubling driver shared by the quadratures.
///
/// `level(n)` returns an estimate on the `n`-point grid (plus whatever detail
/// the caller wants back). The grid doubles from `initial_points` until two
/// successive estimates differ by at most `rel_tol * max(1, |estimate|)`.
/// Reaching `max_points` first is reported as [`Error::Unconverged`] with
/// the finest estimate.
pub fn refine_uniform<T, F>(cfg: &QuadratureConfig, mut level: F) -> Result<Refined<T>>
where
    F: FnMut(usize) -> Result<(f64, T)>,
{
    let mut n = cfg.initial_points();
    let (mut previous, _) = level(n)?;
    let mut change = f64::INFINITY;
    while n < cfg.max_points() {
        n *= 2;
        let (estimate, detail) = level(n)?;
        change = (estimate - previous).abs();
        previous = estimate;
        if change <= cfg.rel_tol() * estimate.abs().max(1.0) {
            return Ok(Refined {
                value: estimate,
                points: n,
                detail,
            });
        }
    }
    Err(Error::Unconverged {
        estimate: previous,
        points: n,
        change,
    })
}

/// Trapezoid integral over one period of a fallible integrand.
pub fn try_integrate_periodic<F>(f: F, cfg: &QuadratureConfig) -> Result<Refined<()>>
where
    F: Fn(f64) -> Result<f64>,
{
    refine_uniform(cfg, |n| Ok((uniform_mean(n, &f)?, ())))
}

/// Trapezoid integral of `f` over `[0, 1]`, with `f(0) = f(1)` assumed.
pub fn integrate_periodic<F>(f: F, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    try_integrate_periodic(|x| Ok(f(x)), cfg).map(|r| r.value)
}

/// Outcome of a bisection solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketedRoot {
    pub location: f64,
    /// `g(location) - target`.
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `g(x) = target` for monotone `g` on `[lo, hi]` by bisection.
///
/// Stops once `|g(x) - target| <= tol` or the bracket is narrower than
/// `tol * max(1, |x|)`. In the second case the residual can exceed `tol`
/// when `g` is steep.
pub fn try_bisect_monotone<G>(
    mut g: G,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    tol: f64,
) -> Result<BracketedRoot>
where
    G: FnMut(f64) -> Result<f64>,
{
    if lo.is_nan() || hi.is_nan() || lo >= hi || tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "bisection needs lo < hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"
        )));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let y = g(x)?;
        if y.is_finite() {
            Ok(y - target)
        } else {
            Err(Error::NonFiniteEvaluation { x })
        }
    };

    let r_lo = eval(lo)?;
    if r_lo == 0.0 {
        return Ok(BracketedRoot {
            location: lo,
            residual: 0.0,
            iterations: 0,
        });
    }
    let r_hi = eval(hi)?;
    if r_hi == 0.0 {
        return Ok(BracketedRoot {
            location: hi,
            residual: 0.0,
            iterations: 0,
        });
    }
    if r_lo.signum() == r_hi.signum() {
        return Err(Error::NoStraddle {
            lo,
            hi,
            g_lo: r_lo,
            g_hi: r_hi,
        });
    }
    let increasing = r_hi > r_lo;

    let mut mid = lo + 0.5 * (hi - lo);
    let mut residual = f64::NAN;
    for iteration in 1..=MAX_BISECTION_ITERATIONS {
        mid = lo + 0.5 * (hi - lo);
        residual = eval(mid)?;
        let stalled = mid <= lo || mid >= hi;
        if residual.abs() <= tol || hi - lo <= tol * mid.abs().max(1.0) || stalled {
            return Ok(BracketedRoot {
                location: mid,
                residual,
                iterations: iteration,
            });
        }
        if (residual < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BracketedRoot {
        location: mid,
        residual,
        iterations: MAX_BISECTION_ITERATIONS,
    })
}

pub fn bisect_monotone<G>(g: G, lo: f64, hi: f64, target: f64, tol: f64) -> Result<BracketedRoot>
where
    G: Fn(f64) -> f64,
{
    try_bisect_monotone(|x| Ok(g(x)), lo, hi, target, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn constant_integrand_is_exact() {
        assert_eq!(integrate_periodic(|_| 1.0, &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn full_period_cosine_vanishes() {
        let v = integrate_periodic(|x| (2.0 * PI * x).cos(), &cfg()).unwrap();
        assert!(v.abs() < 1e-14, "{v}");
    }

    #[test]
    fn low_degree_trig_polynomial_is_exact_from_four_points() {
        let f = |x: f64| Ok((2.0 * PI * x).cos().powi(2));
        for n in [4, 8, 16, 64, 1024] {
            let v = uniform_mean(n, f).unwrap();
            assert!((v - 0.5).abs() < 1e-15, "n={n}: {v}");
        }
    }

    #[test]
    fn matches_circulant_average_on_final_grid() {
        let f = |x: f64| (1.0 + 10.0 * (1.0 + 0.4 * (2.0 * PI * x).cos()).powi(2)).log2();
        let refined = try_integrate_periodic(|x| Ok(f(x)), &cfg()).unwrap();
        let m = refined.points;
        let circulant: Vec<f64> = (0..m).map(|k| f(k as f64 / m as f64)).collect();
        assert_eq!(refined.value, pairwise_sum(&circulant) / m as f64);
    }

    #[test]
    fn non_finite_sample_reports_abscissa() {
        let err = integrate_periodic(|x| if x == 0.5 { f64::NAN } else { 1.0 }, &cfg());
        assert_eq!(err.unwrap_err(), Error::NonFiniteIntegrand { x: 0.5 });
    }

    #[test]
    fn single_level_cannot_converge() {
        let q = QuadratureConfig::new(8, 8, 1e-10).unwrap();
        match integrate_periodic(|_| 1.0, &q).unwrap_err() {
            Error::Unconverged {
                estimate, points, ..
            } => {
                assert_eq!(estimate, 1.0);
                assert_eq!(points, 8);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn kinked_integrand_hits_point_limit() {
        // |cos| has kinks; the error decays only algebraically.
        let q = QuadratureConfig::new(8, 64, 1e-14).unwrap();
        let err = integrate_periodic(|x| (2.0 * PI * x + 0.1).cos().abs(), &q).unwrap_err();
        assert!(matches!(err, Error::Unconverged { points: 64, .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn bisect_identity_and_square() {
        let r = bisect_monotone(|x| x, 0.0, 1.0, 0.5, 1e-12).unwrap();
        assert_eq!(r.location, 0.5);
        let r = bisect_monotone(|x| x * x, 0.0, 2.0, 2.0, 1e-12).unwrap();
        assert!((r.location - SQRT_2).abs() < 1e-12);
        assert!(r.residual.abs() <= 1e-12 || r.iterations > 0);
    }

    #[test]
    fn bisect_decreasing_function() {
        let r = bisect_monotone(|x| -x.powi(3), -1.0, 3.0, -8.0, 1e-13).unwrap();
        assert!((r.location - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_reports_missing_straddle() {
        let err = bisect_monotone(|x| x, 1.0, 2.0, 5.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::NoStraddle { .. }));
        let err = bisect_monotone(|x| if x > 0.7 { f64::NAN } else { x }, 0.0, 1.0, 0.5, 1e-12);
        assert!(matches!(
            err.unwrap_err(),
            Error::NonFiniteEvaluation { .. }
        ));
    }

    proptest! {
        #[test]
        fn bisect_iteration_bound(root in 0.0f64..100.0, width in 1.0f64..1e3, tol_exp in 3i32..13) {
            let tol = 10f64.powi(-tol_exp);
            let lo = root - width * 0.37;
            let hi = root + width * 0.63;
            // Shallow slope so the width criterion, not the residual, stops it.
            let r = bisect_monotone(|x| 1e-9 * (x - root), lo, hi, 0.0, tol * 1e-12).unwrap();
            let bound = ((hi - lo) / (tol * 1e-12)).log2().ceil() as usize + 2;
            prop_assert!(r.iterations <= bound, "{} > {}", r.iterations, bound);
            let r = bisect_monotone(|x| x - root, lo, hi, 0.0, tol).unwrap();
            let bound = ((hi - lo) / tol).log2().ceil() as usize + 2;
            prop_assert!(r.iterations <= bound);
            prop_assert!((r.location - root).abs() <= tol * root.abs().max(1.0));
        }

        #[test]
        fn shift_invariance(shift in 0.0f64..1.0, a in 0.0f64..0.9, rho in 0.1f64..100.0) {
            let f = |x: f64| (1.0 + rho * (1.0 + 2.0 * a * (2.0 * PI * x).cos()).powi(2)).log2();
            let q = QuadratureConfig::new(64, 1 << 16, 1e-10).unwrap();
            let base = integrate_periodic(f, &q).unwrap();
            let shifted = integrate_periodic(|x| f((x + shift).fract()), &q).unwrap();
            prop_assert!((base - shifted).abs() <= 1e-10 * base.abs().max(1.0));
        }
    }
}
