//! Tensor-network quantum process tomography.
//!
//! The reconstructed process is a Choi matrix stored as a locally purified
//! density operator (LPDO) whose tensors follow an arbitrary qubit topology.
//! It is trained by gradient descent on single-shot measurement records, and
//! a dense channel simulator provides the reference side for small systems.

pub mod data;
pub mod linalg;
pub mod lpdo;
pub mod planner;
pub mod registry;
pub mod sim;
pub mod tensor;
pub mod topology;
pub mod train;

pub use num_complex::Complex64 as C64;
