//! Per-PE compressed-sparse-column storage with 4-bit relative row indices.

mod csc;
mod io;
mod model;
mod storage;

pub use csc::{
    decode_pe_csc, encode_pe_csc, global_row, local_row, local_row_count, partition_rows, IndexGrid, PeSlice, MAX_GAP,
};
pub use io::{decode_model, encode_model, read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use model::CompressedModel;
pub use storage::{storage_stats, StorageStats};
