pub mod cli;
pub mod covertree;
pub mod dimension;
pub mod error;
pub mod expansion;
pub mod expr;
pub mod real;
pub mod sequences;
pub mod targets;

pub use error::{Error, Result};
pub use expansion::{DigitString, ExactPoint};
pub use real::LogReal;
pub use sequences::{CumulativeCache, SequenceSpec, Target, Term};
