//! Reverse-mode automatic differentiation on a tape.
//!
//! Every primitive appends one node to a [`Tape`] and returns a [`Var`]
//! handle. [`Tape::backward`] walks the nodes in reverse recording order and
//! adds d(loss)/d(node) into the gradient slot of each node that requires
//! one. Gradients accumulate: callers clear them explicitly with
//! [`Tape::zero_grads`] or start a fresh tape.
//!
//! ```
//! use lismore::autograd::Tape;
//! use lismore::Tensor;
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::new([3], vec![1.0, -2.0, 0.5]).unwrap());
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(x).unwrap(), &[2.0, -4.0, 1.0]);
//! ```

mod gradcheck;
mod kernels;
mod ops;
mod tape;

pub use gradcheck::{grad_check, grad_check_many, GradCheckEntry, GradCheckOptions, GradCheckReport};
pub use tape::{Tape, Var};
