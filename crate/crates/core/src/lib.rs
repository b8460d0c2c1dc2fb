pub mod cli;
pub mod distributions;
pub mod ellipse;
pub mod error;
pub mod fit;
pub mod io;
pub mod quadrature;
pub mod sphere;

pub use error::{Error, Result};
