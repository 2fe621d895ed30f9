//! Simulation, fitting and control toolkit for a polarization-circulation
//! speed meter reduced to a single-cavity tabletop configuration.
//!
//! The crate is organized around five subsystems:
//!
//! * [`model`] — closed-form complex frequency response of the cavity with
//!   circulation imperfections (loss, retardation error, phase fluctuation).
//! * [`synth`] — deterministic synthetic transfer-function datasets and
//!   shaped noise time series with known ground truth.
//! * [`fit`] — recovery of the cavity round-trip loss and overall gain from
//!   a measured or synthetic complex transfer function.
//! * [`lockacq`] — discrete-time simulation of the four-loop control system
//!   and the green-locking acquisition sequence.
//! * [`noise`] — Welch spectral estimation, accumulated-RMS curves and the
//!   projection of PCC length noise to an equivalent detuning.
//!
//! All operations are pure functions of their inputs; random generators are
//! explicit seeded values, never global state.

// `!(x > 0.0)` in validations is deliberate: it rejects NaN, which `x <= 0.0`
// would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::manual_is_multiple_of)]

pub mod config;
pub mod fit;
pub mod io;
pub mod lockacq;
pub mod model;
pub mod noise;
pub mod synth;

pub use model::{
    circulation_factor, derive_rates, effective_pcc_loss, effective_pcc_loss_detailed,
    observable_h, position_response, quadrature_map, quadrature_point, reflectivity,
    speed_response_exact, speed_response_firstorder, ComplexResponse, DerivedRates,
    MainCavityParams, PccParams, PhysicalConstants, SPEED_OF_LIGHT,
};

/// Errors shared by all subsystems.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no data points in band [{0} Hz, {1} Hz]")]
    EmptyBand(f64, f64),

    #[error("series too short: {got} samples, need at least {min}")]
    SeriesTooShort { got: usize, min: usize },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("simulation diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
