//! Fast matrix-vector products with block lower-triangular Toeplitz
//! operators, with a precision choice per pipeline phase.
//!
//! An operator `F` is given by its first block column `F_1, ..., F_{n_t}`
//! (each `n_d x n_m`). Embedding it in a block circulant of length `2 n_t`
//! turns `d = F m` and `m = F* d` into per-frequency GEMVs between a real
//! FFT and its inverse:
//!
//! ```
//! use fftmatvec::{setup_operator, BlockColumn, BlockVector, PrecisionConfig, ProblemDims};
//!
//! let dims = ProblemDims::new(3, 2, 4)?;
//! let col = BlockColumn::from_fn(dims, |t, i, j| (t + i + j) as f64);
//! let op = setup_operator(&col)?;
//! let m = BlockVector::from_f64(vec![1.0; 12], 3, 4)?;
//! let (d, stats) = op.forward_matvec(&m, "dssdd".parse()?)?;
//! assert_eq!(d.space_extent(), 2);
//! assert_eq!(stats.casts, "dssdd".parse::<PrecisionConfig>()?.transitions());
//! # Ok::<(), fftmatvec::Error>(())
//! ```
//!
//! Module map:
//!
//! - [`precision`], [`layout`]: configs, casts, block vectors.
//! - [`spectral`]: batched real FFTs.
//! - [`kernels`]: strided batched GEMV, naive and tiled.
//! - [`pipeline`]: operator setup and the five-phase matvecs.
//! - [`oracle`]: dense reference for small problems.
//! - [`preclab`]: test data, error metric, config sweeps, Pareto selection.
//! - [`partition`]: `1 x p` column-partitioned execution.
//! - [`io`], [`report`]: vector files and CSV reports.

pub mod error;
pub mod io;
pub mod kernels;
pub mod layout;
pub mod oracle;
pub mod partition;
pub mod pipeline;
pub mod precision;
pub mod preclab;
pub mod report;
pub mod scalar;
pub mod spectral;

pub use error::{ConfigParseError, Error, FormatError, Result};
pub use layout::{reorder, BlockVector, Domain, Layout, ProblemDims};
pub use pipeline::{setup_operator, BlockColumn, Matvec, MatvecKind, MatvecStats, PhaseTimings, SpectralOperator};
pub use precision::{enumerate_configs, parse_precision_config, Buffer, Phase, Precision, PrecisionConfig};
