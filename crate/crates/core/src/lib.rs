pub mod cli;
pub mod diagnostics;
pub mod elastica;
pub mod energy;
pub mod error;
pub mod grid;
pub mod quadrature;
pub mod scheme;
pub mod special_fn;

pub use error::{Error, Result};
pub use grid::{GridFunction, ObstacleSpec};
