//! The guide's chapters, compiled as doc-tests so their snippets stay in
//! sync with the library.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/circulant-embedding.md")]
pub mod circulant_embedding {}

#[doc = include_str!("../../../book/src/pipeline.md")]
pub mod pipeline {}

#[doc = include_str!("../../../book/src/mixed-precision.md")]
pub mod mixed_precision {}

#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}

#[doc = include_str!("../../../book/src/sweeps.md")]
pub mod sweeps {}

#[doc = include_str!("../../../book/src/partitioning.md")]
pub mod partitioning {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../book/src/file-format.md")]
pub mod file_format {}
