//! Space-efficient blocked storage of sparse matrices.
//!
//! The crate partitions a sparse matrix into fixed power-of-two blocks,
//! evaluates the exact bit footprint of every blocking storage scheme,
//! searches for the space-optimal configuration, and encodes matrices
//! into a bit-exact blocked container whose payload size equals the
//! modeled footprint. On top of the per-matrix machinery sits a corpus
//! pipeline producing savings and consistency statistics.

pub mod bits;
pub mod block;
pub mod codec;
pub mod fetch;
pub mod matrix;
pub mod optimize;
pub mod report;
pub mod stats;

pub use block::{
    block_format_bits, block_nnz_map, mmf, BlockFormat, BlockSize, FootprintTable, FormatSet,
    Scheme,
};
pub use codec::BlockedContainer;
pub use matrix::{parse_matrix_market, Precision, SparseMatrix, Symmetry};
pub use optimize::{optimal_config, OptimalConfig, SearchSpace};
