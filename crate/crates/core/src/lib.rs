//! Exact symbolic computation of lifts of local differential operators on jet spaces.

pub mod cli;
pub mod crux;
pub mod error;
pub mod forms;
pub mod jet;
pub mod json;
pub mod ldo;
pub mod lifting;
pub mod opcomplex;
pub mod random;
pub mod shlie;
pub mod syntax;

pub use error::{Error, Result};
pub use jet::{LocalFunction, Monomial, MultiIndex, Rational};
pub use ldo::{Ldo, LdoKey};
