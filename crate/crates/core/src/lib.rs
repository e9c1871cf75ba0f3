//! H² matrices: construction from kernels, products, recompression, and
//! the same operations over simulated ranks. The guide in `book/` walks
//! through each module.

pub mod basisops;
pub mod construct;
pub mod dense;
pub mod dist;
pub mod fdsolver;
pub mod error;
pub mod geometry;
pub mod h2;
pub mod io;
pub mod matvec;

pub use error::{H2Error, Result};
pub use h2::H2Matrix;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/building.md")]
    pub mod building {}
    #[doc = include_str!("../../../book/src/products.md")]
    pub mod products {}
    #[doc = include_str!("../../../book/src/compression.md")]
    pub mod compression {}
    #[doc = include_str!("../../../book/src/distributed.md")]
    pub mod distributed {}
    #[doc = include_str!("../../../book/src/fractional.md")]
    pub mod fractional {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
