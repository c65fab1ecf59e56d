//! Compiles and runs the code samples of the guide in `book/` as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/matrices.md")]
pub mod matrices {}

#[doc = include_str!("../../../book/src/k-matrix.md")]
pub mod k_matrix {}

#[doc = include_str!("../../../book/src/wiener.md")]
pub mod wiener {}

#[doc = include_str!("../../../book/src/perfect-reconstruction.md")]
pub mod perfect_reconstruction {}

#[doc = include_str!("../../../book/src/nonuniform.md")]
pub mod nonuniform {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
