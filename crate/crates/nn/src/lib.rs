//! A small, explicit reverse-mode layer library.
//!
//! Every layer exposes `forward` (returning its output plus whatever the
//! backward pass needs) and `backward` (returning the input gradient and
//! accumulating parameter gradients). Activations are batch-major
//! [`Tensor`]s; trainable state lives in [`Param`]s.

pub mod activation;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod error;
pub mod gradcheck;
pub mod norm;
pub mod optim;
pub mod pool;
pub mod report;
pub mod tensor;

pub use error::{NnError, Result};
pub use tensor::{Param, Tensor};
