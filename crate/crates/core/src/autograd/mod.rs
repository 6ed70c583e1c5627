//! Minimal reverse-mode automatic differentiation over dense f64 tensors.

mod check;
mod tape;
mod tensor;

pub use check::{grad_check, grad_check_many};
pub use tape::{Mode, Tape, Var};
pub use tensor::Tensor;
