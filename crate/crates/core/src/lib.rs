pub mod baselines;
pub mod engine;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod sug;
pub mod updates;

pub use error::{Error, Result};
