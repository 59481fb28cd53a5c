//! Tempered Markov chain Monte Carlo: sequential exchange Monte Carlo (SEMC),
//! replica exchange (REMC), SMC samplers and waste-free SMC, with automatic
//! temperature-ladder and step-size tuning and stepping-stone free energies.

pub mod adaptation;
pub mod error;
pub mod evidence;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod problems;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
pub use model::{
    Bounds, Coords, EnsembleSnapshot, ParameterState, Problem, ProblemKind, RunResult, SamplerKind, Support,
    TemperatureLadder,
};
