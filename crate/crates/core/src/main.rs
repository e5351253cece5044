use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wyner_relay::af::{RelayPowerModel, RingSimulation};
use wyner_relay::sweep::{
    emit, emit_point, run_point_with, run_sweep_with, Figure, OutputFormat, PointOptions, Scheme,
    SweepAxis, SweepSpec,
};
use wyner_relay::{parse_config, Error, KeyValues, QuadratureConfig, SystemConfig};

/// Per-cell sum-rates of relay-aided circular Wyner uplinks.
#[derive(Debug, Parser)]
#[command(name = "wyner-relay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the selected schemes at one configuration.
    Rate {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep one parameter over a uniform grid.
    Sweep {
        #[command(flatten)]
        system: SystemArgs,
        /// mu, power_p, power_q, rho1_db or rho2_db.
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, allow_negative_numbers = true)]
        start: f64,
        #[arg(long, allow_negative_numbers = true)]
        stop: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Reproduce one of the preset sweeps (fig3, fig4, fig5).
    Figure {
        figure: Figure,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// JSON or TOML file with the system parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// MT power in dB.
    #[arg(long = "P-dB", allow_negative_numbers = true)]
    p_db: Option<f64>,
    /// Relay power in dB.
    #[arg(long = "Q-dB", allow_negative_numbers = true)]
    q_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    power_p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    power_q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    noise1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    noise2: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Comma-separated subset of cf, af, af_mu0, upper_bound.
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Output file, `-` for stdout.
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Add finite-ring and Monte Carlo cross-check columns.
    #[arg(long)]
    oracle: bool,
    /// Seed of the Monte Carlo oracle.
    #[arg(long)]
    seed: Option<u64>,
    /// Time steps averaged by the Monte Carlo oracle.
    #[arg(long)]
    mc_symbols: Option<usize>,
    /// Add solver diagnostics.
    #[arg(long)]
    verbose: bool,
    #[arg(long)]
    quad_tol: Option<f64>,
    #[arg(long)]
    quad_max_points: Option<usize>,
    /// ring or quartic.
    #[arg(long, default_value = "ring")]
    relay_power: RelayPowerModel,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Model(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_numerical() { 2 } else { 1 })
        }
    }
}

enum Failure {
    Io(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure::Model(err)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Rate { system, run } => {
            let config = system.resolve()?;
            let cfg = run.quadrature()?;
            let schemes = run.schemes(&Scheme::ALL)?;
            let point = run_point_with(&config, &schemes, &cfg, &run.point_options())?;
            write_output(&run.output, &emit_point(&config, &cfg, &point, run.format))
        }
        Command::Sweep {
            system,
            axis,
            start,
            stop,
            points,
            run,
        } => {
            let base = system.resolve()?;
            let spec =
                SweepSpec::uniform(axis, start, stop, points, base, &run.schemes(&Scheme::ALL)?)?;
            run_spec(&spec, &run)
        }
        Command::Figure { figure, run } => {
            let mut spec = figure.spec();
            spec.schemes = run.schemes(&spec.schemes)?;
            run_spec(&spec, &run)
        }
    }
}

fn run_spec(spec: &SweepSpec, run: &RunArgs) -> Result<(), Failure> {
    if run.jobs == Some(0) {
        return Err(Error::InvalidInput("--jobs must be at least 1".into()).into());
    }
    let table = run_sweep_with(spec, &run.quadrature()?, &run.point_options(), run.jobs)?;
    write_output(&run.output, &emit(&table, run.format))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if path == Path::new("-") {
        let mut stdout = io::stdout().lock();
        stdout
            .write_all(bytes)
            .and_then(|()| stdout.flush())
            .map_err(|e| Failure::Io(format!("writing stdout: {e}")))
    } else {
        fs::write(path, bytes).map_err(|e| Failure::Io(format!("writing {}: {e}", path.display())))
    }
}

impl SystemArgs {
    fn resolve(&self) -> Result<SystemConfig, Failure> {
        let mut doc = match &self.config {
            Some(path) => read_config(path)?,
            None => KeyValues::default(),
        };
        let plain = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("mu", self.mu),
        ];
        for (key, value) in plain {
            if let Some(v) = value {
                doc.set(key, v);
            }
        }
        // An override replaces the quantity whichever unit the file used.
        let powers = [
            ("power_p", "P_dB", self.power_p, self.p_db),
            ("power_q", "Q_dB", self.power_q, self.q_db),
            ("noise1", "noise1_dB", self.noise1, None),
            ("noise2", "noise2_dB", self.noise2, None),
        ];
        for (lin, db, lin_value, db_value) in powers {
            if lin_value.is_some() && db_value.is_some() {
                return Err(Error::Ambiguous {
                    linear: lin.to_string(),
                    db: db.to_string(),
                }
                .into());
            }
            if let Some(v) = lin_value {
                doc.remove(db);
                doc.set(lin, v);
            }
            if let Some(v) = db_value {
                doc.remove(lin);
                doc.set(db, v);
            }
        }
        Ok(parse_config(&doc)?)
    }
}

fn read_config(path: &Path) -> Result<KeyValues, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))?;
    let doc = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => KeyValues::from_toml_str(&text),
        Some("json") => KeyValues::from_json_str(&text),
        _ => {
            return Err(Failure::Io(format!(
                "{}: config files must end in .json or .toml",
                path.display()
            )))
        }
    };
    Ok(doc?)
}

impl RunArgs {
    fn schemes(&self, default: &[Scheme]) -> Result<Vec<Scheme>, Error> {
        match &self.schemes {
            Some(list) => Scheme::parse_list(list),
            None => Ok(default.to_vec()),
        }
    }

    fn quadrature(&self) -> Result<QuadratureConfig, Error> {
        let default = QuadratureConfig::default();
        let max = self.quad_max_points.unwrap_or(default.max_points());
        QuadratureConfig::new(
            default.initial_points().min(max),
            max,
            self.quad_tol.unwrap_or(default.rel_tol()),
        )
    }

    fn point_options(&self) -> PointOptions {
        let oracle = self.oracle.then(|| {
            let mut sim = RingSimulation::default();
            if let Some(seed) = self.seed {
                sim.seed = seed;
            }
            if let Some(symbols) = self.mc_symbols {
                sim.symbols = symbols;
            }
            sim
        });
        PointOptions {
            verbose: self.verbose,
            oracle,
            relay_power: self.relay_power,
        }
    }
}
