//! Quantics tensor trains with mixed integer bases.
//!
//! A dimension of arbitrary size is factorized into digits of small bases
//! (`20 = 2*2*5`), tensors over such dimensions are stored as trains of
//! dense cores, and arithmetic (addition, Einstein summation, element-wise
//! transforms) is carried out either exactly or under a rank-truncation
//! policy. Structured operators (exponentials, trigonometric functions,
//! polynomials, shift/Toeplitz operators, the DFT matrix) are constructed
//! directly in train form, and eigenvalue/linear systems are solved with
//! sweeping algorithms.

pub mod arithmetic;
pub mod constructors;
pub mod cross;
pub mod decomp;
pub mod error;
pub mod io;
pub mod quantics;
pub mod solvers;
pub mod train;
pub mod trainshape;

pub use arithmetic::{add, einsum, truncate, ApproxPolicy, EinsumSpec, OpReport};
pub use cross::{cross_build, elementwise_div, pow, transform};
pub use decomp::TruncationRule;
pub use error::{Error, Result};
pub use quantics::{Digit, Dimension, Domain, UniformGrid};
pub use solvers::{
    eigsolve, linsolve, min_max, EigResult, LinSolveMethod, LinSolveResult, LinearMap,
    MinMaxResult, SweepPlan,
};
pub use train::{ScalarKind, TensorTrain};
pub use trainshape::{DigitRef, GroupMode, TrainShape};
