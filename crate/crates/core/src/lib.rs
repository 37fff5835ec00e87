// `!(x < tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod linop;
pub mod manifold;
pub mod modulation;
pub mod soliton;

pub use error::{Error, Result};
pub use grid::{Grid, VecField, C64};
