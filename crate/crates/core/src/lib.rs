#![no_std]
extern crate alloc;

pub mod classify;
pub mod energy;
pub mod error;
pub mod fractal;
pub mod jets;
pub mod linalg;
pub mod measure;
pub mod sequence;
pub mod spectral;
pub mod symmetry;
pub mod tol;

pub use error::{Error, Result};
pub use fractal::{builtin, Address, Contact, FractalSpec, VertexTable, Word, BUILTINS};
pub use tol::Tol;
