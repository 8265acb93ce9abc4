//! Frame certificates for Gabor systems `{pi_{L kappa} g}` on general lattices.
//!
//! The crate evaluates sufficient conditions for boundedness, invertibility
//! and the frame property of generalized Gabor operators, and checks them
//! against a brute-force frame operator assembled on a periodic grid.
// `!(x > 0.0)` guards are kept deliberately: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cert;
pub mod count;
pub mod error;
pub mod gabor;
pub mod grid;
pub mod lattice;
pub mod linalg;
pub mod periodize;
pub mod psido;
pub mod stft;
pub mod verify;
pub mod weight;
pub mod window;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec, C64};
pub use lattice::Lattice;
pub use weight::PolyWeight;
pub use window::{Window, WindowKind};
