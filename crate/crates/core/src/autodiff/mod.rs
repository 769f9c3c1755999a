//! Reverse-mode automatic differentiation over dense f64 tensors.
//!
//! Forward ops append nodes to a [`Tape`]; [`Tape::backward`] walks the tape
//! in reverse and accumulates gradients for every named parameter.
//! Everything is 64-bit and bit-deterministic for identical inputs; the
//! [`grad_check`] harness validates any composite against central finite
//! differences.

mod grad_check;
mod tape;
mod tensor;

pub use grad_check::grad_check;
pub use tape::{GradientMap, NodeId, Tape, MASK_FILL};
pub use tensor::Tensor;
