//! Stationary mesoscopic magnetization profiles of an Ising-Kac type model
//! carrying a steady current, and their macroscopic free-boundary limits.

pub mod banded;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod roots;
pub mod thermo;

pub use error::{Error, Result};
pub mod stefan;
pub mod instanton;
pub mod stats;
pub mod meso;
pub mod spectral;
pub mod antisym;
pub mod asym;
pub mod harness;
