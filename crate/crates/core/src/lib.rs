//! Hamiltonian simulation of tensor-product Hamiltonians by block-encodings
//! and quantum singular value transformation, emulated with dense matrices.

// `!(x > bound)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod block_encoding;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod pipelines;
pub mod qsvt;
pub mod resources;
pub mod truncation;
pub mod verify;

pub use error::{Error, Result};
