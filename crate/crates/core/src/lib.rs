pub mod error;
pub mod operators;
pub mod penalty;
pub mod problems;
pub mod sampling;
pub mod solver;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};

/// Version of this crate, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/penalties.md")]
    mod penalties {}
    #[doc = include_str!("../../../book/src/operators.md")]
    mod operators {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
}
