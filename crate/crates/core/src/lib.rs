//! Compress a dense weight matrix by pruning and 4-bit codebook
//! quantization, store it as per-PE compressed sparse columns, and run it
//! through a cycle-approximate array of processing elements that skips both
//! zero weights and zero activations.
//!
//! The pipeline, end to end:
//!
//! ```
//! use sparse_eie::compress::{kmeans_codebook, prune_magnitude, KmeansConfig};
//! use sparse_eie::matrix::{gemv_dense_oracle, ActivationVector, DenseMatrix};
//! use sparse_eie::sim::{simulate_spmv, SimConfig};
//! use sparse_eie::sparse::CompressedModel;
//!
//! let w = DenseMatrix::from_rows(&[&[0.5, 0.0, -1.25], &[0.0, 2.0, 0.25]]).unwrap();
//! let mask = prune_magnitude(&w, 0.5).unwrap();
//! let qm = kmeans_codebook(&w, &mask, &KmeansConfig::default()).unwrap();
//! let model = CompressedModel::from_quantized(&qm, 2).unwrap();
//!
//! let x = ActivationVector::from_raw(&[256, 0, 128]);
//! let (y, report) = simulate_spmv(&model, &x, &SimConfig::new(2)).unwrap();
//! assert_eq!(y, gemv_dense_oracle(&qm, &x, false).unwrap());
//! assert!(report.total_cycles >= report.max_pe_macs());
//! ```

pub mod cli;
pub mod compress;
pub mod error;
pub mod fixed;
mod fsutil;
pub mod matrix;
pub mod sim;
pub mod sparse;

pub use error::{Error, Result};
