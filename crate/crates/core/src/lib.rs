//! Quantum R-matrices of Yang and Baxter-Belavin type together with a
//! numerical verification engine for their unitarity, Yang-Baxter and higher
//! order cyclic-product identities.

mod cserde;
pub mod applications;
pub mod error;
pub mod identities;
pub mod perm;
pub mod rmatrix;
pub mod special;
pub mod suite;
pub mod tensor;

pub use error::{Error, Result};
pub use special::C64;
