//! Simulation and analysis of heteroclinic switching between localized
//! frequency synchrony in networks of `M` populations of `N` identical phase
//! oscillators with nonpairwise coupling between neighbouring populations.

pub mod cli;
pub mod conditions;
pub mod error;
pub mod integrate;
pub mod model;
pub mod observables;
pub mod region;
pub mod spectral;

pub use error::{Error, Result};
