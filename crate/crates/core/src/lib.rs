pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod initial_data;
pub mod mckean;
pub mod metrics;
pub mod quadrature;
pub mod report;
pub mod wild;

pub use error::{KacError, Result};
