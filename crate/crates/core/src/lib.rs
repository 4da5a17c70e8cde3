pub mod error;
pub mod estimators;
pub mod experiments;
pub mod fespace;
pub mod flux;
pub mod geometry;
pub mod mesh;
pub mod poly;
pub mod quadrature;
pub mod solver;
pub mod temporal;

pub use error::{Error, Result};
