pub mod dataset;
pub mod era;
pub mod error;
pub mod fbcsp;
pub mod harness;
pub(crate) mod io;
pub mod sigproc;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Precision, Real, Tensor};
