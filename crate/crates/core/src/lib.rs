pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod feasible;
pub mod io;
pub mod objectives;
pub mod policies;
pub mod profile;
pub mod rng;
pub mod scenarios;
pub mod topology;

pub use error::{Error, Result};
