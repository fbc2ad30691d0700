//! Exact and inexact Newton-based matrix splitting solvers for the
//! generalized absolute value equation `A x − B|x| = b`.

pub mod bench;
pub mod certify;
pub mod error;
pub mod io;
pub mod linalg;
pub mod problems;
pub mod solver;
pub mod splittings;

pub use error::{GaveError, Result};
