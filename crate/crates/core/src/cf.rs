//! Compress-and-forward with decoder side information.
//!
//! The relays quantize what they hear, bin the quantization indices and send
//! the bins over the RT-BS lag. The central processor cancels the inter-relay
//! interference from the side information it already has, so `mu` never
//! enters the rate. The quantization overhead `r` trades the first lag's
//! effective SNR `ρ1 (1 - 2^-r)` against the second lag's capacity.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{LagGains, QuadratureConfig, RateValue, SystemConfig};
use crate::numerics::try_bisect_monotone;
use crate::wyner::rate_mcp;

/// Guaranteed bound on the fixed-point residual.
pub const FIXED_POINT_TOL: f64 = 1e-10;

// The bracket-width stop scales with the slope of the difference map, which
// exceeds 1; bisect well below the guarantee.
const BISECTION_TOL: f64 = 1e-13;

/// Quadrature tolerance used for each evaluation inside the fixed-point solve.
pub const INNER_QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfSolution {
    pub rate: RateValue,
    /// Quantization overhead `r*` in bits.
    pub r_star: f64,
    /// `R_w(α, β, ρ1 (1 - 2^-r*)) - (R_w(η, γ, ρ2) - r*)`.
    pub residual: f64,
    /// `R_w(η, γ, ρ2)`, the capacity of the RT-BS lag without cooperation.
    pub second_lag_rate: RateValue,
}

/// `1 - 2^-r`, accurate for small `r`.
fn quantization_factor(r: f64) -> f64 {
    -(-r * LN_2).exp_m1()
}

/// Compress-and-forward rate of the relay network described by `config`.
pub fn cf_solve(config: &SystemConfig, cfg: &QuadratureConfig) -> Result<CfSolution> {
    config.validate()?;
    cf_solve_lags(
        config.first_lag(),
        config.rho1(),
        config.second_lag(),
        config.rho2(),
        cfg,
    )
}

/// Same as [`cf_solve`], with the two lags and their SNRs given directly.
pub fn cf_solve_lags(
    first: LagGains,
    rho1: f64,
    second: LagGains,
    rho2: f64,
    cfg: &QuadratureConfig,
) -> Result<CfSolution> {
    let inner = cfg.tightened(INNER_QUADRATURE_TOL);
    let second_lag_rate = rate_mcp(second, rho2, &inner)?;
    let capacity = second_lag_rate.bits();
    if capacity == 0.0 {
        return Ok(CfSolution {
            rate: RateValue::ZERO,
            r_star: 0.0,
            residual: 0.0,
            second_lag_rate,
        });
    }

    let first_lag_rate = |r: f64| rate_mcp(first, rho1 * quantization_factor(r), &inner);
    // Increasing in r: -capacity at r = 0, nonnegative at r = capacity.
    let root = try_bisect_monotone(
        |r| Ok(first_lag_rate(r)?.bits() + r),
        0.0,
        capacity,
        capacity,
        BISECTION_TOL,
    )?;
    let r_star = root.location;
    let rate = first_lag_rate(r_star)?;
    Ok(CfSolution {
        rate,
        r_star,
        residual: rate.bits() - (capacity - r_star),
        second_lag_rate,
    })
}

/// Which lag's SNR is taken to infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrLimit {
    /// `ρ1 → ∞`: the rate approaches `R_w(η, γ, ρ2)`.
    FirstLagSnr,
    /// `ρ2 → ∞`: the rate approaches `R_w(α, β, ρ1)`.
    SecondLagSnr,
}

/// Analytic high-SNR limits of the CF rate.
pub fn cf_rate_limits(
    config: &SystemConfig,
    which: SnrLimit,
    cfg: &QuadratureConfig,
) -> Result<RateValue> {
    config.validate()?;
    match which {
        SnrLimit::FirstLagSnr => rate_mcp(config.second_lag(), config.rho2(), cfg),
        SnrLimit::SecondLagSnr => rate_mcp(config.first_lag(), config.rho1(), cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::bisect_monotone;
    use crate::wyner::upper_bound;

    fn fig3() -> SystemConfig {
        SystemConfig {
            alpha: 0.2,
            beta: 1.0,
            gamma: 1.0,
            eta: 0.2,
            mu: 0.4,
            power_p: 10.0,
            power_q: 100.0,
            noise1: 1.0,
            noise2: 1.0,
        }
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn silent_second_lag() {
        let first = LagGains::new(1.0, 0.2).unwrap();
        let sol = cf_solve_lags(first, 10.0, first, 0.0, &cfg()).unwrap();
        assert_eq!(sol.r_star, 0.0);
        assert_eq!(sol.rate, RateValue::ZERO);

        let config = SystemConfig {
            power_q: 0.0,
            ..fig3()
        };
        assert_eq!(cf_solve(&config, &cfg()).unwrap().rate, RateValue::ZERO);
    }

    #[test]
    fn silent_first_lag() {
        let config = SystemConfig {
            power_p: 0.0,
            ..fig3()
        };
        let sol = cf_solve(&config, &cfg()).unwrap();
        assert_eq!(sol.rate, RateValue::ZERO);
        assert!((sol.r_star - sol.second_lag_rate.bits()).abs() < 1e-9);
    }

    #[test]
    fn interference_free_collapse_matches_scalar_equation() {
        let flat = LagGains::new(1.0, 0.0).unwrap();
        for (rho1, rho2) in [(10.0, 100.0), (100.0, 10.0), (3.0, 3.0), (1e3, 1e4)] {
            let sol = cf_solve_lags(flat, rho1, flat, rho2, &cfg()).unwrap();
            // log2(1 + ρ1 (1 - 2^-r)) + r = log2(1 + ρ2), solved directly.
            let cap = (1.0f64 + rho2).log2();
            let scalar = bisect_monotone(
                |r: f64| (1.0 + rho1 * (1.0 - 2f64.powf(-r))).log2() + r,
                0.0,
                cap,
                cap,
                1e-14,
            )
            .unwrap();
            let scalar_rate = (1.0 + rho1 * (1.0 - 2f64.powf(-scalar.location))).log2();
            assert!((sol.r_star - scalar.location).abs() < 1e-10);
            assert!((sol.rate.bits() - scalar_rate).abs() < 1e-10);
        }
    }

    #[test]
    fn fixed_point_identity_and_gap_at_fig3() {
        let sol = cf_solve(&fig3(), &cfg()).unwrap();
        assert!(sol.residual.abs() <= FIXED_POINT_TOL);
        assert!((sol.rate.bits() + sol.r_star - sol.second_lag_rate.bits()).abs() <= 1e-9);
        let ub = upper_bound(&fig3(), &cfg()).unwrap().bits();
        assert!(sol.rate.bits() <= ub);
        assert!(ub - sol.rate.bits() < 0.2);
    }

    #[test]
    fn independent_of_relay_leakage() {
        let reference = cf_solve(&fig3(), &cfg()).unwrap();
        for mu in [0.0, 0.8, 3.0] {
            let config = SystemConfig { mu, ..fig3() };
            assert_eq!(cf_solve(&config, &cfg()).unwrap(), reference);
        }
    }

    #[test]
    fn increasing_in_both_snrs() {
        let mut last = 0.0;
        for p in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let rate = cf_solve(
                &SystemConfig {
                    power_p: p,
                    ..fig3()
                },
                &cfg(),
            )
            .unwrap()
            .rate
            .bits();
            assert!(rate > last);
            last = rate;
        }
        let mut last = 0.0;
        for q in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let rate = cf_solve(
                &SystemConfig {
                    power_q: q,
                    ..fig3()
                },
                &cfg(),
            )
            .unwrap()
            .rate
            .bits();
            assert!(rate > last);
            last = rate;
        }
    }

    #[test]
    fn limits_are_the_single_lag_rates() {
        let config = fig3();
        let lag = LagGains::new(1.0, 0.2).unwrap();
        assert_eq!(
            cf_rate_limits(&config, SnrLimit::SecondLagSnr, &cfg()).unwrap(),
            rate_mcp(lag, 10.0, &cfg()).unwrap()
        );
        assert_eq!(
            cf_rate_limits(&config, SnrLimit::FirstLagSnr, &cfg()).unwrap(),
            rate_mcp(lag, 100.0, &cfg()).unwrap()
        );
        let boosted = SystemConfig {
            power_q: 1e6,
            ..config
        };
        let cf = cf_solve(&boosted, &cfg()).unwrap().rate.bits();
        let limit = cf_rate_limits(&config, SnrLimit::SecondLagSnr, &cfg())
            .unwrap()
            .bits();
        assert!((cf - limit).abs() < 1e-3);
    }
}
