pub mod error;
pub mod krein;
pub mod linalg;
pub mod sets;
pub mod tensor_sum;
pub mod transversal;
pub mod waveguide2d;

pub use error::{Error, Result};
