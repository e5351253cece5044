//! Single-point evaluation, parameter sweeps and their CSV/JSON output.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::af::{self, RelayPowerModel, RingSimulation};
use crate::cf;
use crate::error::{Error, Result};
use crate::model::{db_to_linear, QuadratureConfig, RateValue, SystemConfig};
use crate::wyner::{self, FiniteRingSize};

/// Ring size of the finite-M cross-checks.
pub const ORACLE_RING_CELLS: usize = 4096;

/// Rate columns, in canonical output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Cf,
    /// AF at the configured `mu`.
    Af,
    /// AF with the relay leakage switched off.
    AfMu0,
    UpperBound,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Cf, Scheme::Af, Scheme::AfMu0, Scheme::UpperBound];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cf => "cf",
            Scheme::Af => "af",
            Scheme::AfMu0 => "af_mu0",
            Scheme::UpperBound => "upper_bound",
        }
    }

    /// Parses a comma-separated list; the result is sorted and deduplicated.
    pub fn parse_list(text: &str) -> Result<Vec<Scheme>> {
        let mut schemes = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Scheme::from_str)
            .collect::<Result<Vec<_>>>()?;
        schemes.sort();
        schemes.dedup();
        if schemes.is_empty() {
            return Err(Error::InvalidInput("no schemes selected".into()));
        }
        Ok(schemes)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme `{s}`")))
    }
}

/// The swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Mu,
    /// Linear MT power.
    PowerP,
    /// Linear relay power limit.
    PowerQ,
    /// First-lag SNR in dB; sets `P = noise1 * 10^(x/10)`.
    Rho1Db,
    /// Second-lag SNR in dB; sets `Q = noise2 * 10^(x/10)`.
    Rho2Db,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::Mu,
        SweepAxis::PowerP,
        SweepAxis::PowerQ,
        SweepAxis::Rho1Db,
        SweepAxis::Rho2Db,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Mu => "mu",
            SweepAxis::PowerP => "power_p",
            SweepAxis::PowerQ => "power_q",
            SweepAxis::Rho1Db => "rho1_db",
            SweepAxis::Rho2Db => "rho2_db",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut config = *base;
        match self {
            SweepAxis::Mu => config.mu = value,
            SweepAxis::PowerP => config.power_p = value,
            SweepAxis::PowerQ => config.power_q = value,
            SweepAxis::Rho1Db => config.power_p = base.noise1 * db_to_linear(value),
            SweepAxis::Rho2Db => config.power_q = base.noise2 * db_to_linear(value),
        }
        config.validate()?;
        Ok(config)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|axis| axis.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown sweep axis `{s}`")))
    }
}

/// Optional extras computed alongside the rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointOptions {
    /// Adds solver diagnostics (r*, gains, residuals, water level).
    pub verbose: bool,
    /// Adds finite-ring and Monte Carlo cross-check columns.
    pub oracle: Option<RingSimulation>,
    pub relay_power: RelayPowerModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub rates: BTreeMap<Scheme, RateValue>,
    /// Named diagnostics in a fixed order that depends only on the schemes
    /// and options.
    pub extras: Vec<(String, f64)>,
}

/// Rates of the selected schemes at one configuration.
pub fn run_point(
    config: &SystemConfig,
    schemes: &[Scheme],
    cfg: &QuadratureConfig,
) -> Result<BTreeMap<Scheme, RateValue>> {
    run_point_with(config, schemes, cfg, &PointOptions::default()).map(|p| p.rates)
}

pub fn run_point_with(
    config: &SystemConfig,
    schemes: &[Scheme],
    cfg: &QuadratureConfig,
    opts: &PointOptions,
) -> Result<PointResult> {
    config.validate()?;
    let mut ordered = schemes.to_vec();
    ordered.sort();
    ordered.dedup();

    let mut rates = BTreeMap::new();
    let mut extras = Vec::new();
    for scheme in ordered {
        let rate = evaluate(scheme, config, cfg, opts, &mut extras)
            .map_err(|e| e.in_scheme(scheme.name()))?;
        rates.insert(scheme, rate);
    }
    Ok(PointResult { rates, extras })
}

fn evaluate(
    scheme: Scheme,
    config: &SystemConfig,
    cfg: &QuadratureConfig,
    opts: &PointOptions,
    extras: &mut Vec<(String, f64)>,
) -> Result<RateValue> {
    let mut push = |name: &str, value: f64| extras.push((name.to_string(), value));
    let ring = || FiniteRingSize::new(ORACLE_RING_CELLS);
    match scheme {
        Scheme::Cf => {
            let sol = cf::cf_solve(config, cfg)?;
            if opts.verbose {
                push("cf_r_star", sol.r_star);
                push("cf_residual", sol.residual);
            }
            if opts.oracle.is_some() {
                let finite = wyner::rate_mcp_finite(config.second_lag(), config.rho2(), ring()?)?;
                push(
                    "cf_second_lag_finite_delta",
                    sol.second_lag_rate.bits() - finite.bits(),
                );
            }
            Ok(sol.rate)
        }
        Scheme::Af | Scheme::AfMu0 => {
            let (config, prefix) = if scheme == Scheme::AfMu0 {
                (SystemConfig { mu: 0.0, ..*config }, "af_mu0")
            } else {
                (*config, "af")
            };
            let gain = af::optimal_gain_with(opts.relay_power, &config)?;
            let rate = af::af_rate(&config, gain.gain, cfg)?;
            if opts.verbose {
                push(&format!("{prefix}_gain"), gain.gain);
                push(&format!("{prefix}_power_residual"), gain.residual);
            }
            if let Some(sim) = &opts.oracle {
                let finite = af::af_rate_finite(&config, gain.gain, ring()?)?;
                push(
                    &format!("{prefix}_finite_delta"),
                    rate.bits() - finite.bits(),
                );
                let mc = af::simulate_relay_power(&config, gain.gain, sim)?;
                push(&format!("{prefix}_power_mc"), mc.mean);
                push(&format!("{prefix}_power_mc_stderr"), mc.std_error);
                push(
                    &format!("{prefix}_power_mc_delta"),
                    mc.mean - gain.output_power,
                );
            }
            Ok(rate)
        }
        Scheme::UpperBound => {
            let ub = wyner::upper_bound_detailed(config, cfg)?;
            if opts.verbose {
                push("ub_first_lag", ub.first_lag.bits());
                let (rate, level, residual) = ub.second_lag.map_or((0.0, 0.0, 0.0), |wf| {
                    (wf.rate.bits(), wf.level, wf.spent_power - config.rho2())
                });
                push("ub_second_lag_wf", rate);
                push("ub_water_level", level);
                push("ub_water_residual", residual);
            }
            if opts.oracle.is_some() {
                let finite = wyner::rate_mcp_finite(config.first_lag(), config.rho1(), ring()?)?;
                push(
                    "ub_first_lag_finite_delta",
                    ub.first_lag.bits() - finite.bits(),
                );
            }
            Ok(ub.value)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: SystemConfig,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    /// `points` evenly spaced values from `start` to `stop` inclusive.
    pub fn uniform(
        axis: SweepAxis,
        start: f64,
        stop: f64,
        points: usize,
        base: SystemConfig,
        schemes: &[Scheme],
    ) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && start < stop) {
            return Err(Error::InvalidInput(format!(
                "sweep needs finite start < stop, got {start} .. {stop}"
            )));
        }
        if points < 2 {
            return Err(Error::InvalidInput("sweep needs at least 2 points".into()));
        }
        let step = (stop - start) / (points - 1) as f64;
        let values = (0..points)
            .map(|i| {
                if i + 1 == points {
                    stop
                } else {
                    start + step * i as f64
                }
            })
            .collect();
        SweepSpec::from_values(axis, values, base, schemes)
    }

    pub fn from_values(
        axis: SweepAxis,
        values: Vec<f64>,
        base: SystemConfig,
        schemes: &[Scheme],
    ) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "sweep values must be a nonempty list of finite numbers".into(),
            ));
        }
        base.validate()?;
        let mut schemes = schemes.to_vec();
        schemes.sort();
        schemes.dedup();
        if schemes.is_empty() {
            return Err(Error::InvalidInput("no schemes selected".into()));
        }
        Ok(SweepSpec {
            axis,
            values,
            base,
            schemes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub axis: SweepAxis,
    pub base: SystemConfig,
    pub quadrature: QuadratureConfig,
    pub relay_power_model: RelayPowerModel,
    pub oracle_seed: Option<u64>,
}

impl Metadata {
    fn new(
        axis: SweepAxis,
        base: &SystemConfig,
        cfg: &QuadratureConfig,
        opts: &PointOptions,
    ) -> Self {
        Metadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            axis,
            base: *base,
            quadrature: *cfg,
            relay_power_model: opts.relay_power,
            oracle_seed: opts.oracle.map(|sim| sim.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis_values: Vec<f64>,
    /// Rate columns first (canonical scheme order), then diagnostics.
    pub columns: Vec<(String, Vec<f64>)>,
    pub metadata: Metadata,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, values)| values.as_slice())
    }
}

/// Evaluates every axis value on the global thread pool.
pub fn run_sweep(spec: &SweepSpec, cfg: &QuadratureConfig) -> Result<SweepTable> {
    run_sweep_with(spec, cfg, &PointOptions::default(), None)
}

/// Evaluates every axis value, on `jobs` threads when given. Rows follow
/// the axis order whatever the completion order.
pub fn run_sweep_with(
    spec: &SweepSpec,
    cfg: &QuadratureConfig,
    opts: &PointOptions,
    jobs: Option<usize>,
) -> Result<SweepTable> {
    let point = |&value: &f64| -> Result<PointResult> {
        let wrap = |e: Error| Error::SweepPoint {
            axis: spec.axis.name(),
            value,
            source: Box::new(e),
        };
        let config = spec.axis.apply(&spec.base, value).map_err(wrap)?;
        run_point_with(&config, &spec.schemes, cfg, opts).map_err(wrap)
    };

    let outcomes: Vec<Result<PointResult>> = match jobs {
        Some(1) => spec.values.iter().map(point).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| spec.values.par_iter().map(point).collect()),
        None => spec.values.par_iter().map(point).collect(),
    };
    let points = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut columns: Vec<(String, Vec<f64>)> = spec
        .schemes
        .iter()
        .map(|s| (s.name().to_string(), Vec::with_capacity(points.len())))
        .collect();
    if let Some(first) = points.first() {
        columns.extend(
            first
                .extras
                .iter()
                .map(|(name, _)| (name.clone(), Vec::with_capacity(points.len()))),
        );
    }
    for point in &points {
        let values = point
            .rates
            .values()
            .map(|r| r.bits())
            .chain(point.extras.iter().map(|(_, v)| *v));
        for ((_, column), value) in columns.iter_mut().zip(values) {
            column.push(value);
        }
    }

    Ok(SweepTable {
        axis_values: spec.values.clone(),
        columns,
        metadata: Metadata::new(spec.axis, &spec.base, cfg, opts),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidInput(format!("unknown format `{s}`"))),
        }
    }
}

/// Formats like C's `%.{digits}g`: shortest of fixed and exponent notation,
/// trailing zeros removed. Independent of locale.
pub fn format_significant(value: f64, digits: usize) -> String {
    assert!(digits > 0);
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let scientific = format!("{:.*e}", digits - 1, value);
    let (mantissa, exponent) = scientific.split_once('e').expect("exponent marker");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -5 || exponent >= digits as i32 {
        let sign = if exponent < 0 { '-' } else { '+' };
        format!(
            "{}e{}{:02}",
            trim_fraction(mantissa),
            sign,
            exponent.unsigned_abs()
        )
    } else {
        let decimals = (digits as i32 - 1 - exponent) as usize;
        trim_fraction(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_fraction(text: &str) -> &str {
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.')
    } else {
        text
    }
}

const CSV_DIGITS: usize = 12;

fn csv_row<'a>(cells: impl Iterator<Item = &'a str>) -> String {
    let mut line = cells.collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

struct OrderedColumns<'a>(&'a [(String, Vec<f64>)]);

impl Serialize for OrderedColumns<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (name, values) in self.0 {
            map.serialize_entry(name, values)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct TableDocument<'a> {
    metadata: &'a Metadata,
    axis_values: &'a [f64],
    columns: OrderedColumns<'a>,
}

/// Serializes a table. Identical tables give identical bytes.
pub fn emit(table: &SweepTable, format: OutputFormat) -> Vec<u8> {
    match format {
        OutputFormat::Csv => {
            let header = std::iter::once(table.metadata.axis.name())
                .chain(table.columns.iter().map(|(name, _)| name.as_str()));
            let mut out = csv_row(header);
            for (row, axis_value) in table.axis_values.iter().enumerate() {
                let cells: Vec<String> = std::iter::once(*axis_value)
                    .chain(table.columns.iter().map(|(_, values)| values[row]))
                    .map(|v| format_significant(v, CSV_DIGITS))
                    .collect();
                out.push_str(&csv_row(cells.iter().map(String::as_str)));
            }
            out.into_bytes()
        }
        OutputFormat::Json => {
            let doc = TableDocument {
                metadata: &table.metadata,
                axis_values: &table.axis_values,
                columns: OrderedColumns(&table.columns),
            };
            let mut out = serde_json::to_vec_pretty(&doc).expect("table serializes");
            out.push(b'\n');
            out
        }
    }
}

struct OrderedScalars<'a>(&'a [(String, f64)]);

impl Serialize for OrderedScalars<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (name, value) in self.0 {
            map.serialize_entry(name, value)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct PointDocument<'a> {
    config: &'a SystemConfig,
    quadrature: &'a QuadratureConfig,
    values: OrderedScalars<'a>,
}

/// Serializes a single-point evaluation: rates then extras, one row.
pub fn emit_point(
    config: &SystemConfig,
    cfg: &QuadratureConfig,
    point: &PointResult,
    format: OutputFormat,
) -> Vec<u8> {
    let cells: Vec<(String, f64)> = point
        .rates
        .iter()
        .map(|(scheme, rate)| (scheme.name().to_string(), rate.bits()))
        .chain(point.extras.iter().cloned())
        .collect();
    match format {
        OutputFormat::Csv => {
            let mut out = csv_row(cells.iter().map(|(n, _)| n.as_str()));
            let values: Vec<String> = cells
                .iter()
                .map(|(_, v)| format_significant(*v, CSV_DIGITS))
                .collect();
            out.push_str(&csv_row(values.iter().map(String::as_str)));
            out.into_bytes()
        }
        OutputFormat::Json => {
            let doc = PointDocument {
                config,
                quadrature: cfg,
                values: OrderedScalars(&cells),
            };
            let mut out = serde_json::to_vec_pretty(&doc).expect("point serializes");
            out.push(b'\n');
            out
        }
    }
}

/// Parameter sets of the three published sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Rates against the inter-relay gain `mu`, symmetric lags.
    Fig3,
    /// Rates against the MT power, symmetric lags.
    Fig4,
    /// Rates against the MT power, asymmetric lags.
    Fig5,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }

    /// `rho1 = 10 dB, rho2 = 20 dB, alpha = eta = 0.2, beta = gamma = 1`,
    /// unit noise.
    pub fn base_config() -> SystemConfig {
        SystemConfig {
            alpha: 0.2,
            beta: 1.0,
            gamma: 1.0,
            eta: 0.2,
            mu: 0.0,
            power_p: 10.0,
            power_q: 100.0,
            noise1: 1.0,
            noise2: 1.0,
        }
    }

    pub fn spec(self) -> SweepSpec {
        let base = Figure::base_config();
        let spec = match self {
            Figure::Fig3 => SweepSpec::uniform(
                SweepAxis::Mu,
                0.0,
                0.8,
                17,
                base,
                &[Scheme::Cf, Scheme::Af, Scheme::UpperBound],
            ),
            Figure::Fig4 | Figure::Fig5 => {
                let alpha = if self == Figure::Fig5 { 0.6 } else { 0.2 };
                SweepSpec::uniform(
                    SweepAxis::Rho1Db,
                    -10.0,
                    30.0,
                    21,
                    SystemConfig {
                        alpha,
                        mu: 0.8,
                        ..base
                    },
                    &Scheme::ALL,
                )
            }
        };
        spec.expect("preset sweeps are valid")
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Figure::Fig3, Figure::Fig4, Figure::Fig5]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown figure `{s}`")))
    }
}
