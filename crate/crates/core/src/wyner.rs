//! Per-cell sum-rate of a single Wyner lag with joint multicell processing,
//! with and without transmitter waterfilling, and the cut-set-like bound of
//! the two-lag relay network.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LagGains, QuadratureConfig, RateValue, SystemConfig};
use crate::numerics::{
    self, grid_point, pairwise_sum_map, refine_uniform, try_bisect_monotone, Refined,
};

/// Responses below this magnitude are treated as exact spectral nulls.
const NULL_RESPONSE: f64 = 1e-150;

/// Doublings of the water-level bracket before giving up.
const MAX_BRACKET_DOUBLINGS: u32 = 1 << 10;

/// `H(f) = b + 2a cos 2πf`, the eigenvalue profile of the circulant lag.
#[inline]
pub fn channel_response(lag: LagGains, f: f64) -> f64 {
    lag.local + 2.0 * lag.cross * (2.0 * PI * f).cos()
}

#[inline]
fn mcp_integrand(lag: LagGains, rho: f64, f: f64) -> f64 {
    let h = channel_response(lag, f);
    (rho * h * h).ln_1p() / LN_2
}

fn check_snr(rho: f64) -> Result<()> {
    if rho.is_finite() && rho >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "SNR must be finite and nonnegative, got {rho}"
        )))
    }
}

/// Sum-rate without transmitter cooperation, `∫ log2(1 + ρ H(f)²) df`,
/// together with the grid size the quadrature settled on.
pub fn rate_mcp_quadrature(lag: LagGains, rho: f64, cfg: &QuadratureConfig) -> Result<Refined<()>> {
    lag.validate()?;
    check_snr(rho)?;
    numerics::try_integrate_periodic(|f| Ok(mcp_integrand(lag, rho, f)), cfg)
}

/// Sum-rate without transmitter cooperation, `∫ log2(1 + ρ H(f)²) df`.
pub fn rate_mcp(lag: LagGains, rho: f64, cfg: &QuadratureConfig) -> Result<RateValue> {
    check_snr(rho)?;
    if rho == 0.0 {
        return Ok(RateValue::ZERO);
    }
    rate_mcp_quadrature(lag, rho, cfg).map(|r| RateValue::from_nonnegative(r.value))
}

/// Number of cells on the circle of the finite model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FiniteRingSize(usize);

impl FiniteRingSize {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 3 {
            return Err(Error::InvalidInput(format!(
                "a ring needs at least 3 cells, got {cells}"
            )));
        }
        Ok(FiniteRingSize(cells))
    }

    pub fn cells(self) -> usize {
        self.0
    }
}

/// Exact per-cell sum-rate of the `M`-cell circular model: the average of
/// `log2(1 + ρ λ_m²)` over the circulant eigenvalues `λ_m = H(m / M)`.
pub fn rate_mcp_finite(lag: LagGains, rho: f64, ring: FiniteRingSize) -> Result<RateValue> {
    lag.validate()?;
    check_snr(rho)?;
    numerics::uniform_mean(ring.cells(), |f| Ok(mcp_integrand(lag, rho, f)))
        .map(RateValue::from_nonnegative)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaterfillSolution {
    /// Water level ν.
    pub level: f64,
    pub rate: RateValue,
    /// `∫ (ν - 1/H²)⁺ df` at the returned level.
    pub spent_power: f64,
    /// Grid size of the final estimate.
    pub points: usize,
}

#[inline]
fn inverse_gain(lag: LagGains, f: f64) -> f64 {
    let h = channel_response(lag, f);
    if h.abs() < NULL_RESPONSE {
        f64::INFINITY
    } else {
        1.0 / (h * h)
    }
}

/// Discrete waterfilling on one grid: returns (level, spent power, rate).
fn waterfill_on_grid(inverse: &[f64], rho: f64) -> Result<(f64, f64, f64)> {
    let n = inverse.len() as f64;
    let spent = |level: f64| pairwise_sum_map(inverse, &|g| (level - g).max(0.0)) / n;

    let mut hi = rho.max(1.0);
    let mut doublings = 0;
    while spent(hi) <= rho {
        if doublings == MAX_BRACKET_DOUBLINGS {
            return Err(Error::BracketGrowth { doublings });
        }
        hi *= 2.0;
        doublings += 1;
    }
    let root = try_bisect_monotone(
        |level| Ok(spent(level)),
        0.0,
        hi,
        rho,
        numerics::FULL_PRECISION_TOL,
    )?;
    let level = root.location;
    // 1 + (ν - 1/H²) H² = ν H² wherever the channel is filled.
    let rate = pairwise_sum_map(inverse, &|g| {
        if g < level {
            (level / g).log2()
        } else {
            0.0
        }
    }) / n;
    Ok((level, root.residual + rho, rate))
}

/// Sum-rate with full transmitter cooperation: the waterfilling solution
/// over the spectrum `H(f)²` under the power budget `ρ`.
///
/// On each quadrature grid the water level is found by bisection on the
/// (piecewise linear) spent-power map; the grid is refined until the rate
/// settles. The integrand has kinks where `ν = 1/H²`, so convergence is
/// algebraic rather than spectral.
pub fn waterfill(lag: LagGains, rho: f64, cfg: &QuadratureConfig) -> Result<WaterfillSolution> {
    lag.validate()?;
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidInput(format!(
            "waterfilling needs a finite positive power budget, got {rho}"
        )));
    }
    if lag.is_zero() {
        return Err(Error::InvalidInput(
            "waterfilling over an all-zero channel".into(),
        ));
    }
    let refined = refine_uniform(cfg, |n| {
        let inverse: Vec<f64> = (0..n)
            .map(|k| inverse_gain(lag, grid_point(k, n)))
            .collect();
        let (level, spent, rate) = waterfill_on_grid(&inverse, rho)?;
        Ok((rate, (level, spent)))
    })?;
    let (level, spent_power) = refined.detail;
    Ok(WaterfillSolution {
        level,
        rate: RateValue::from_nonnegative(refined.value),
        spent_power,
        points: refined.points,
    })
}

/// Both terms of the cut-set-like bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    pub value: RateValue,
    /// MT-RT term, no cooperation.
    pub first_lag: RateValue,
    /// RT-BS term with waterfilling; `None` when that lag carries nothing.
    pub second_lag: Option<WaterfillSolution>,
}

pub fn upper_bound_detailed(config: &SystemConfig, cfg: &QuadratureConfig) -> Result<UpperBound> {
    config.validate()?;
    let first_lag = rate_mcp(config.first_lag(), config.rho1(), cfg)?;
    let second = config.second_lag();
    let second_lag = if config.rho2() == 0.0 || second.is_zero() {
        None
    } else {
        Some(waterfill(second, config.rho2(), cfg)?)
    };
    let second_rate = second_lag.map_or(RateValue::ZERO, |wf| wf.rate);
    let value = if first_lag.bits() <= second_rate.bits() {
        first_lag
    } else {
        second_rate
    };
    Ok(UpperBound {
        value,
        first_lag,
        second_lag,
    })
}

/// `min{ R_w(α, β, ρ1), R_w^wf(η, γ, ρ2) }`.
pub fn upper_bound(config: &SystemConfig, cfg: &QuadratureConfig) -> Result<RateValue> {
    upper_bound_detailed(config, cfg).map(|ub| ub.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag(a: f64, b: f64) -> LagGains {
        LagGains::new(b, a).unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn channel_response_values() {
        assert_eq!(channel_response(lag(0.0, 1.0), 0.37), 1.0);
        assert!((channel_response(lag(0.2, 1.0), 0.0) - 1.4).abs() < 1e-15);
        assert!(channel_response(lag(0.5, 1.0), 0.5).abs() < 1e-15);
    }

    #[test]
    fn flat_and_silent_rates() {
        let r = rate_mcp(lag(0.0, 1.0), 10.0, &cfg()).unwrap();
        assert!((r.bits() - 11f64.log2()).abs() < 1e-12);
        assert!((r.bits() - 3.459432).abs() < 1e-6);
        assert_eq!(
            rate_mcp(lag(0.2, 1.0), 0.0, &cfg()).unwrap(),
            RateValue::ZERO
        );
        assert!(rate_mcp(lag(0.2, 1.0), -1.0, &cfg()).is_err());
    }

    #[test]
    fn three_cell_ring_closed_form() {
        let ring = FiniteRingSize::new(3).unwrap();
        let v = rate_mcp_finite(lag(0.2, 1.0), 10.0, ring).unwrap().bits();
        let expected =
            ((1.0f64 + 10.0 * 1.4 * 1.4).log2() + 2.0 * (1.0f64 + 10.0 * 0.8 * 0.8).log2()) / 3.0;
        assert!((v - expected).abs() < 1e-14, "{v} vs {expected}");
        let flat = rate_mcp_finite(lag(0.0, 1.0), 10.0, FiniteRingSize::new(7).unwrap()).unwrap();
        assert!((flat.bits() - 11f64.log2()).abs() < 1e-14);
        assert!(FiniteRingSize::new(2).is_err());
    }

    #[test]
    fn finite_ring_converges_monotonically() {
        let rates: Vec<f64> = (6..=12)
            .map(|k| {
                rate_mcp_finite(lag(0.2, 1.0), 10.0, FiniteRingSize::new(1 << k).unwrap())
                    .unwrap()
                    .bits()
            })
            .collect();
        let limit = rate_mcp(lag(0.2, 1.0), 10.0, &cfg()).unwrap().bits();
        for pair in rates.windows(2) {
            let (before, after) = ((pair[0] - limit).abs(), (pair[1] - limit).abs());
            // Past ~1e-14 the differences are rounding noise.
            assert!(after <= before || before < 1e-14, "{before:e} -> {after:e}");
        }
        assert!((rates[6] - limit).abs() < 1e-9);
    }

    #[test]
    fn quadrature_equals_ring_of_same_size_bit_for_bit() {
        for (a, rho) in [(0.2, 10.0), (0.5, 100.0), (0.9, 1.0)] {
            let refined = rate_mcp_quadrature(lag(a, 1.0), rho, &cfg()).unwrap();
            let ring = FiniteRingSize::new(refined.points).unwrap();
            let finite = rate_mcp_finite(lag(a, 1.0), rho, ring).unwrap();
            assert_eq!(refined.value, finite.bits());
        }
    }

    #[test]
    fn sign_of_local_gain_does_not_matter() {
        for (a, b, rho) in [(0.2, 1.0, 10.0), (0.6, 0.7, 3.0), (0.1, 2.0, 100.0)] {
            let integrand = |b: f64| {
                move |f: f64| (1.0 + rho * (b + 2.0 * a * (2.0 * PI * f).cos()).powi(2)).log2()
            };
            let pos = numerics::integrate_periodic(integrand(b), &cfg()).unwrap();
            let neg = numerics::integrate_periodic(integrand(-b), &cfg()).unwrap();
            assert!((pos - neg).abs() < 1e-12, "{pos} vs {neg}");
        }
    }

    #[test]
    fn rates_increase_with_snr() {
        for a in [0.0, 0.2, 0.6] {
            let mut last_mcp = -1.0;
            let mut last_wf = -1.0;
            for rho in [0.1, 0.5, 1.0, 3.0, 10.0, 30.0, 100.0] {
                let mcp = rate_mcp(lag(a, 1.0), rho, &cfg()).unwrap().bits();
                let wf = waterfill(lag(a, 1.0), rho, &cfg()).unwrap().rate.bits();
                assert!(mcp > last_mcp && wf > last_wf);
                last_mcp = mcp;
                last_wf = wf;
            }
        }
    }

    #[test]
    fn flat_waterfilling() {
        let wf = waterfill(lag(0.0, 1.0), 10.0, &cfg()).unwrap();
        assert!((wf.level - 11.0).abs() < 1e-10);
        assert!((wf.rate.bits() - 11f64.log2()).abs() < 1e-10);

        let wf = waterfill(lag(0.0, 2.0), 10.0, &cfg()).unwrap();
        assert!((wf.level - 10.25).abs() < 1e-10);
        assert!((wf.rate.bits() - 41f64.log2()).abs() < 1e-10);
        assert!((wf.rate.bits() - 5.358).abs() < 1e-3);
    }

    #[test]
    fn waterfilling_rejects_degenerate_inputs() {
        assert!(waterfill(lag(0.0, 0.0), 10.0, &cfg()).is_err());
        assert!(waterfill(lag(0.2, 1.0), 0.0, &cfg()).is_err());
    }

    #[test]
    fn waterfilling_constraint_and_dominance_in_null_regime() {
        // b < 2a: H has real zeros that the clamp absorbs.
        for rho in [0.5, 10.0, 100.0] {
            let wf = waterfill(lag(0.6, 1.0), rho, &cfg()).unwrap();
            assert!((wf.spent_power - rho).abs() <= 1e-9);
            let mcp = rate_mcp(lag(0.6, 1.0), rho, &cfg()).unwrap();
            assert!(wf.rate.bits() > mcp.bits());
        }
        // b = 2a exactly puts a null on the grid at f = 1/2.
        let wf = waterfill(lag(0.5, 1.0), 10.0, &cfg()).unwrap();
        assert!((wf.spent_power - 10.0).abs() <= 1e-9);
    }

    #[test]
    fn upper_bound_limits() {
        let mut config = SystemConfig {
            alpha: 0.2,
            beta: 1.0,
            gamma: 1.0,
            eta: 0.2,
            mu: 0.0,
            power_p: 10.0,
            power_q: 10.0,
            noise1: 1.0,
            noise2: 1.0,
        };
        let first = rate_mcp(config.first_lag(), 10.0, &cfg()).unwrap().bits();
        assert_eq!(upper_bound(&config, &cfg()).unwrap().bits(), first);

        config.power_q = 1e7;
        let ub = upper_bound(&config, &cfg()).unwrap().bits();
        assert!((ub - first).abs() <= 1e-6);

        config.power_q = 0.0;
        assert_eq!(upper_bound(&config, &cfg()).unwrap(), RateValue::ZERO);
    }
}
