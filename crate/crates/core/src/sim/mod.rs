//! PE array simulation, the dense baseline, and density sweeps.

mod energy;
mod engine;
mod lnzd;
mod sweep;

pub use energy::{energy_proxy, CostTable, EnergyCounters};
pub use engine::{load_imbalance, simulate_spmv, SimConfig, SimReport, DEFAULT_FIFO_DEPTH};
pub use lnzd::lnzd_scan;
pub use sweep::{density_sweep, random_dense_activations, SweepConfig, SweepRow};

/// Cycles for a dense array with the same PE count doing one MAC per PE per
/// cycle: `ceil(rows / num_pes) * cols`.
pub fn dense_cycle_model(rows: usize, cols: usize, num_pes: usize) -> u64 {
    assert!(num_pes >= 1, "num_pes must be at least 1");
    rows.div_ceil(num_pes) as u64 * cols as u64
}
