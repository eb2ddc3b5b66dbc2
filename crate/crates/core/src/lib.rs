//! Constructive factorization of invertible matrices over sampled function
//! algebras into products of two matrix exponentials, with certificates.

pub mod algebra;
pub mod certify;
pub mod cli;
pub mod dense;
pub mod error;
pub mod general;
pub mod literal;
pub mod matfunc;
pub mod spectra;
pub mod triangular;

pub use algebra::{make_backend, AlgebraElement, Backend, MatrixOverAlgebra, Space};
pub use error::{Error, Result};
