//! Numerical toolkit for discounted Hamilton-Jacobi equations
//! `λ(x)u + h(x, u') = c` on the circle.

pub mod characteristics;
pub mod critical;
pub mod error;
pub mod exec;
pub mod grid;
pub mod model;
pub mod optim;
pub mod rates;
pub mod semigroup;
pub mod verify;

pub use error::{Error, Result};
