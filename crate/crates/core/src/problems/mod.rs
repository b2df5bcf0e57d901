//! Concrete [`BatchOracle`](crate::oracle::BatchOracle) implementations.

pub mod linreg;
pub mod logreg;
pub mod toy;

pub use linreg::{datagen_linreg, least_squares_min, GeneratedLinReg, LinRegData, LinRegOracle};
pub use logreg::{LogRegData, LogRegOracle};
pub use toy::ToyOracle;
