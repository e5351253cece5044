//! Per-cell sum-rates of a relay-aided circular Wyner cellular uplink.
//!
//! Mobiles reach the base stations only through dedicated full-duplex relays,
//! and the base stations decode jointly. The crate evaluates
//!
//! * the Wyner multicell-processing rate of one lag, with and without
//!   waterfilling ([`wyner`]),
//! * the cut-set-like upper bound of the two-lag network,
//! * amplify-and-forward with the full-power relay gain ([`af`]),
//! * compress-and-forward through its fixed-point equation ([`cf`]),
//!
//! and sweeps any of them over one parameter ([`sweep`]).

pub mod af;
pub mod cf;
pub mod error;
pub mod model;
pub mod numerics;
pub mod sweep;
pub mod wyner;

pub use error::{Error, Result};
pub use model::{parse_config, KeyValues, LagGains, QuadratureConfig, RateValue, SystemConfig};
