//! Deterministic and randomized Tucker decompositions with Kronecker-structured
//! sketches, a logical processor-grid simulator with exact cost accounting,
//! and tools for checking probabilistic error bounds.

pub mod analysis;
pub mod dimtree;
pub mod error;
pub mod grid;
pub mod io;
mod kernel;
pub mod linalg;
pub mod sketch;
pub mod synth;
pub mod tucker;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{DenseMatrix, DenseTensor, FactorMatrix, ModeProduct, OrderPolicy};
