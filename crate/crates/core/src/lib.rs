//! Halpern iteration experiments: operators and geometries, exact rate certificates, and a
//! verification harness that checks the bounds against computed orbits.

pub mod cli;
pub mod error;
pub mod iteration;
pub mod numeric;
pub mod operators;
pub mod rates;
pub mod schedules;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
