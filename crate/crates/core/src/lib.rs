pub mod barriers;
pub mod cli;
pub mod error;
pub mod fraclap;
pub mod mesh;
pub mod semipositone;
pub mod spectral;
pub mod variational;

pub use error::{Error, Result};
pub use fraclap::DiscreteFracLap;
pub use mesh::{FieldFunction, Grid};
