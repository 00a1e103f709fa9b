//! Radial basis function networks with locally imposed constraints.

// `!(x > 0.0)` deliberately rejects NaN alongside nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bench;
pub mod centers;
pub mod constraints;
pub mod error;
pub mod gcnn;
pub mod lif;
pub mod model_io;
pub mod numerics;
pub mod rbf;

pub use error::{Error, Result};
pub use numerics::{Matrix, Vector};
