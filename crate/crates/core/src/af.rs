//! Amplify-and-forward relaying with joint decoding at the central processor.
//!
//! Every relay scales what it received one symbol earlier by a common gain
//! `g` and retransmits it. Adjacent relays hear each other through `mu`, so
//! the relay ring is a recursive filter that is stable only for `2 mu g < 1`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuadratureConfig, RateValue, SystemConfig};
use crate::numerics::{self, try_bisect_monotone};
use crate::wyner::FiniteRingSize;

/// Closed form used for the relay output power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayPowerModel {
    /// Stationary output power of the unit-delay relay ring, `1/sqrt(1 - (2 mu g)^2)`
    /// weighting of the white part of the relay input.
    #[default]
    Ring,
    /// Variant with `1/sqrt(1 - (2 mu g)^4)` weighting of the white part.
    /// Kept for comparison; it disagrees with simulation of the ring.
    Quartic,
}

impl std::str::FromStr for RelayPowerModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(RelayPowerModel::Ring),
            "quartic" => Ok(RelayPowerModel::Quartic),
            _ => Err(Error::InvalidInput(format!(
                "unknown relay power model `{s}` (expected ring or quartic)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AfGainSolution {
    pub gain: f64,
    pub output_power: f64,
    /// `output_power - Q`.
    pub residual: f64,
}

/// Upper end of the stable gain range, `1 / (2 mu)` (infinite for `mu = 0`).
pub fn gain_limit(mu: f64) -> f64 {
    if mu > 0.0 {
        1.0 / (2.0 * mu)
    } else {
        f64::INFINITY
    }
}

fn check_gain(gain: f64, mu: f64) -> Result<()> {
    let limit = gain_limit(mu);
    if !(gain.is_finite() && gain >= 0.0 && gain < limit) {
        return Err(Error::GainDomain { gain, limit });
    }
    Ok(())
}

/// Average relay transmit power at gain `g`, ring model.
pub fn relay_output_power(gain: f64, config: &SystemConfig) -> Result<f64> {
    relay_output_power_with(RelayPowerModel::Ring, gain, config)
}

pub fn relay_output_power_with(
    model: RelayPowerModel,
    gain: f64,
    config: &SystemConfig,
) -> Result<f64> {
    check_gain(gain, config.mu)?;
    let SystemConfig {
        alpha,
        beta,
        mu,
        power_p: p,
        noise1,
        ..
    } = *config;
    let k = 2.0 * mu * gain;
    // (1 - k)(1 + k) keeps precision next to the pole.
    let one_minus_k2 = (1.0 - k) * (1.0 + k);
    let root = one_minus_k2.sqrt();
    let white_weight = match model {
        RelayPowerModel::Ring => root,
        RelayPowerModel::Quartic => (one_minus_k2 * (1.0 + k * k)).sqrt(),
    };
    let g2 = gain * gain;
    Ok((p * beta * beta + noise1) * g2 / white_weight
        + 4.0 * p * alpha * alpha * g2 / (root + one_minus_k2))
}

/// Gain at which the relays transmit exactly at their power limit `Q`.
pub fn optimal_gain(config: &SystemConfig) -> Result<AfGainSolution> {
    optimal_gain_with(RelayPowerModel::Ring, config)
}

pub fn optimal_gain_with(model: RelayPowerModel, config: &SystemConfig) -> Result<AfGainSolution> {
    config.validate()?;
    let q = config.power_q;
    if q == 0.0 {
        return Ok(AfGainSolution {
            gain: 0.0,
            output_power: 0.0,
            residual: 0.0,
        });
    }
    let gain = if config.mu == 0.0 {
        let p = config.power_p;
        (q / (p * config.beta.powi(2) + 2.0 * p * config.alpha.powi(2) + config.noise1)).sqrt()
    } else {
        let hi = (1.0 - 1e-12) * gain_limit(config.mu);
        try_bisect_monotone(
            |g| relay_output_power_with(model, g, config),
            0.0,
            hi,
            q,
            numerics::FULL_PRECISION_TOL,
        )?
        .location
    };
    let output_power = relay_output_power_with(model, gain, config)?;
    Ok(AfGainSolution {
        gain,
        output_power,
        residual: output_power - q,
    })
}

/// Per-frequency rate of the AF scheme after integrating out the temporal
/// dimension of the relay recursion.
fn af_integrand(config: &SystemConfig, gain: f64, f: f64) -> Result<f64> {
    let SystemConfig {
        alpha,
        beta,
        gamma,
        eta,
        mu,
        power_p: p,
        noise1,
        noise2,
        ..
    } = *config;
    let c = (2.0 * PI * f).cos();
    let uplink = beta + 2.0 * alpha * c;
    let downlink = gamma + 2.0 * eta * c;
    let g2 = gain * gain;
    let a = p * g2 * uplink * uplink * downlink * downlink;
    let b = noise1 * g2 * downlink * downlink + noise2 * (1.0 + 4.0 * g2 * mu * mu * c * c);
    let c_abs = (4.0 * noise2 * gain * mu * c).abs();
    // B - |C| = noise1 g² G² + noise2 (1 - 2 g mu |cos|)², so both radicands
    // factor into nonnegative terms.
    let b_minus_c =
        noise1 * g2 * downlink * downlink + noise2 * (1.0 - 2.0 * gain * mu * c.abs()).powi(2);
    let inner = radicand(b_minus_c * (b + c_abs), f)?;
    let outer = radicand((a + b_minus_c) * (a + b + c_abs), f)?;
    let numerator = a + b + outer.sqrt();
    let denominator = b + inner.sqrt();
    Ok((numerator / denominator).ln() / LN_2)
}

fn radicand(value: f64, f: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -1e-12 {
        Ok(0.0)
    } else {
        Err(Error::NegativeRadicand { value, f })
    }
}

fn check_rate_inputs(config: &SystemConfig, gain: f64) -> Result<()> {
    config.validate()?;
    check_gain(gain, config.mu)
}

/// Achievable per-cell sum-rate of AF relaying at relay gain `gain`.
pub fn af_rate(config: &SystemConfig, gain: f64, cfg: &QuadratureConfig) -> Result<RateValue> {
    check_rate_inputs(config, gain)?;
    numerics::try_integrate_periodic(|f| af_integrand(config, gain, f), cfg)
        .map(|r| RateValue::from_nonnegative(r.value))
}

/// The AF integrand averaged over the `M` spatial frequencies of a finite ring.
pub fn af_rate_finite(config: &SystemConfig, gain: f64, ring: FiniteRingSize) -> Result<RateValue> {
    check_rate_inputs(config, gain)?;
    numerics::uniform_mean(ring.cells(), |f| af_integrand(config, gain, f))
        .map(RateValue::from_nonnegative)
}

/// AF rate at the full-power gain, together with that gain.
pub fn af_rate_optimal(
    config: &SystemConfig,
    cfg: &QuadratureConfig,
) -> Result<(RateValue, AfGainSolution)> {
    let solution = optimal_gain(config)?;
    Ok((af_rate(config, solution.gain, cfg)?, solution))
}

/// Settings of the time-domain relay ring simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSimulation {
    pub cells: usize,
    /// Averaged time steps, each producing one output symbol per relay.
    pub symbols: usize,
    /// Discarded time steps before averaging.
    pub warmup: usize,
    /// Time steps per batch for the batch-means standard error.
    pub batch: usize,
    pub seed: u64,
}

impl Default for RingSimulation {
    fn default() -> Self {
        RingSimulation {
            cells: 64,
            symbols: 1_000_000,
            warmup: 1_000,
            batch: 1_000,
            seed: 0x5eed_cafe,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub batches: usize,
}

/// Monte Carlo estimate of the stationary relay output power.
///
/// Simulates `cells` relays on a circle, each forwarding `gain` times its
/// received signal with a one-symbol delay. Mobiles send i.i.d. circular
/// Gaussian symbols of power `P`; relay noise has power `noise1`.
/// Single-threaded, so a fixed seed reproduces the estimate exactly.
pub fn simulate_relay_power(
    config: &SystemConfig,
    gain: f64,
    sim: &RingSimulation,
) -> Result<PowerEstimate> {
    check_rate_inputs(config, gain)?;
    let m = FiniteRingSize::new(sim.cells)?.cells();
    if sim.batch == 0 || sim.symbols < 2 * sim.batch {
        return Err(Error::InvalidInput(
            "simulation needs at least two full batches".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let signal_scale = (config.power_p / 2.0).sqrt();
    let noise_scale = (config.noise1 / 2.0).sqrt();
    let mut gaussian = |scale: f64| -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    };

    let mut received = vec![Complex64::default(); m];
    let mut transmit = vec![Complex64::default(); m];
    let mut symbols = vec![Complex64::default(); m];
    let mut batch_means = Vec::with_capacity(sim.symbols / sim.batch);
    let mut batch_sum = 0.0;
    let mut batch_len = 0;

    for step in 0..sim.warmup + sim.symbols {
        for (t, y) in transmit.iter_mut().zip(&received) {
            *t = gain * y;
        }
        for x in symbols.iter_mut() {
            *x = gaussian(signal_scale);
        }
        for cell in 0..m {
            let left = (cell + m - 1) % m;
            let right = (cell + 1) % m;
            received[cell] = config.beta * symbols[cell]
                + config.alpha * (symbols[left] + symbols[right])
                + config.mu * (transmit[left] + transmit[right])
                + gaussian(noise_scale);
        }
        if step >= sim.warmup {
            batch_sum += transmit.iter().map(|t| t.norm_sqr()).sum::<f64>() / m as f64;
            batch_len += 1;
            if batch_len == sim.batch {
                batch_means.push(batch_sum / sim.batch as f64);
                batch_sum = 0.0;
                batch_len = 0;
            }
        }
    }

    let batches = batch_means.len();
    let mean = batch_means.iter().sum::<f64>() / batches as f64;
    let variance =
        batch_means.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(PowerEstimate {
        mean,
        std_error: (variance / batches as f64).sqrt(),
        batches,
    })
}
