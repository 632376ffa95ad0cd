//! Interacting Skellam and birth-death-migration vector processes, their
//! time-changed (fractional) versions, and independent oracles to check them.

pub mod bdm;
pub mod error;
pub mod interact;
pub mod mc;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod ratefn;
pub mod skellam;
pub mod specfun;
pub mod stats;
pub mod timechange;

pub use error::{Error, Result};
pub use ratefn::RateFunction;
