//! Link-level simulation of a multi-antenna OFDM uplink received through
//! low-resolution ADCs and forwarded over a rate-limited fronthaul.
//!
//! The library models one access point that samples the superimposed uplink
//! waveforms of several single-antenna users, quantizes each antenna output
//! with a scalar ADC, and must ship a frequency-domain representation of the
//! received signal to a central processor. Two fronthaul strategies are
//! compared on equal terms:
//!
//! * **benchmark** — transform the quantized time samples to the frequency
//!   domain and forward the data-subcarrier entries directly;
//! * **proposed** — first reconstruct the pre-quantization signal with an
//!   ADMM solver that combines the known linear observation model, the
//!   quantization intervals reported by the ADC, and the finite constellation
//!   of the data symbols, then forward the reconstructed entries.
//!
//! Both forwarded signals are re-quantized at a configurable fronthaul
//! resolution and scored against the clean (noiseless, unquantized) received
//! signal with a power-weighted normalized mean-square error.
//!
//! Module map:
//!
//! * [`rng`] — deterministic per-trial, per-stage random substreams;
//! * [`signal`] — constellations, subcarrier plans, unitary (I)DFTs;
//! * [`channel`] — geometry, pathloss, noise, power-delay profiles, taps;
//! * [`quant`] — scalar quantizers and Lloyd–Max design;
//! * [`linmodel`] — the stacked linear observation model and its real lift;
//! * [`admm`] — the splitting solver over interval and constellation sets;
//! * [`pipeline`] — one end-to-end Monte Carlo realization;
//! * [`config`] — experiment configuration parsing and validation;
//! * [`sweep`] — grid execution, aggregation, CSV emission;
//! * [`selftest`] — fast built-in sanity checks for the CLI.

pub mod admm;
pub mod channel;
pub mod config;
pub mod linmodel;
pub mod pipeline;
pub mod quant;
pub mod rng;
pub mod selftest;
pub mod signal;
pub mod sweep;

/// Errors produced by simulator components.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter is out of its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A subcarrier plan is internally inconsistent.
    #[error("invalid subcarrier plan: {0}")]
    Plan(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Quantizer design could not produce a valid level table.
    #[error("quantizer design failed: {0}")]
    Quantizer(String),

    /// A configuration file line could not be parsed.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    /// The parsed configuration violates a cross-field constraint.
    #[error("config validation: {0}")]
    ConfigValidation(String),

    /// The solver produced a non-finite iterate.
    #[error("solver produced non-finite values at iteration {0}")]
    NonFinite(usize),

    /// A Monte Carlo trial failed; wraps the underlying error.
    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: Box<Error>,
    },

    /// An aggregate was requested over an empty result set.
    #[error("empty result set: {0}")]
    EmptyResult(String),

    /// Underlying I/O failure while reading or writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
