//! Scattering and R-matrices of a one-dimensional Schrödinger operator
//! with two leads, computed from boundary Weyl functions and from
//! energy-dependent eigenfunction series.

pub mod cli;
pub mod config;
pub mod error;
pub mod fd;
pub mod mesh;
pub mod profile;
pub mod roots;
pub mod scattering;
pub mod slp;
pub mod spectra;
pub mod sweep;
pub mod weyl;

pub use error::{Error, Result};
