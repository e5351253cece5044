use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("field `{key}` is not a finite number")]
    NonFinite { key: String },

    #[error("field `{key}` is invalid: {reason}")]
    InvalidField { key: String, reason: String },

    #[error("`{linear}` and `{db}` both given; use only one")]
    Ambiguous { linear: String, db: String },

    #[error("config document: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integrand is not finite at x = {x}")]
    NonFiniteIntegrand { x: f64 },

    #[error(
        "quadrature did not converge within {points} points \
         (best estimate {estimate}, last change {change:e})"
    )]
    Unconverged {
        estimate: f64,
        points: usize,
        change: f64,
    },

    #[error(
        "root not bracketed on [{lo}, {hi}]: g(lo) - target = {g_lo}, g(hi) - target = {g_hi}"
    )]
    NoStraddle {
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("function evaluation is not finite at x = {x}")]
    NonFiniteEvaluation { x: f64 },

    #[error("water level bracket still below the power budget after {doublings} doublings")]
    BracketGrowth { doublings: u32 },

    #[error("relay gain {gain} outside the stable domain (0, {limit})")]
    GainDomain { gain: f64, limit: f64 },

    #[error("negative radicand {value:e} at f = {f}")]
    NegativeRadicand { value: f64, f: f64 },

    #[error("{scheme}: {source}")]
    Scheme {
        scheme: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep point {axis} = {value}: {source}")]
    SweepPoint {
        axis: &'static str,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonFiniteIntegrand { .. }
            | Error::Unconverged { .. }
            | Error::NoStraddle { .. }
            | Error::NonFiniteEvaluation { .. }
            | Error::BracketGrowth { .. }
            | Error::GainDomain { .. }
            | Error::NegativeRadicand { .. } => true,
            Error::Scheme { source, .. } | Error::SweepPoint { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }

    pub(crate) fn in_scheme(self, scheme: &'static str) -> Error {
        Error::Scheme {
            scheme,
            source: Box::new(self),
        }
    }
}
