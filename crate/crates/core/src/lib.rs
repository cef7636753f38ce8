//! Young integration against Hölder charges on dyadic cubes of `[0,1]^d`.
//!
//! Charges are materialized by their values on the dyadic cubes of a fixed
//! generation; see [`charge::GridCharge`]. Functions are materialized by cell
//! averages; see [`field::SampledField`].

pub mod bvalpha;
pub mod charge;
pub mod dyadic;
pub mod error;
pub mod fbm;
pub mod field;
pub mod forms;
pub mod sum;
pub mod synthetic;
pub mod young;

pub use charge::{FaberCoeffs, GridCharge};
pub use dyadic::{CubeId, DyadicFigure, HaarMatrix};
pub use error::{Error, Result};
pub use field::{NodeGrid, SampledField};
pub use young::YoungResult;
