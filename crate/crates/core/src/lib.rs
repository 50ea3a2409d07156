//! Approximation of functions on `[0,1)` by quantized tensor trains.
//!
//! A function is tensorized by splitting its argument into `d` base-`b` digits
//! and a continuous remainder, and the resulting tensor is stored in the
//! tensor-train format with a polynomial leaf. The crate provides exact
//! encoders for polynomials, splines, wavelets and the sawtooth family,
//! local interpolation, complexity measures with bound audits, and drivers
//! for convergence studies.

pub mod analysis;
pub mod complexity;
pub mod encoders;
pub mod error;
pub mod interpolation;
pub mod linalg;
pub mod poly;
pub mod quadrature;
pub mod spline;
pub mod tensor_train;
pub mod tensorization;

pub use error::{Error, Result};
pub use poly::{BasisKind, PolyBasis};
pub use spline::{BadicKnot, Cell, PiecewisePolynomial};
pub use tensor_train::{Direction, RankProfile, TTCore, TensorTrain};
pub use tensorization::{Grid, LeafIndex, MultiIndexPoint};
