use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cost per counted event. Unitless; the defaults are all 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub mac: f64,
    pub weight_read: f64,
    pub index_read: f64,
    pub offset_read: f64,
    pub act_read: f64,
    /// Charged once per accumulator update and once per final output write.
    pub act_write: f64,
}

impl Default for CostTable {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl CostTable {
    pub fn uniform(c: f64) -> Self {
        Self {
            mac: c,
            weight_read: c,
            index_read: c,
            offset_read: c,
            act_read: c,
            act_write: c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.mac,
            self.weight_read,
            self.index_read,
            self.offset_read,
            self.act_read,
            self.act_write,
        ];
        if all.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("energy costs must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Event counts the energy proxy is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnergyCounters {
    pub macs: u64,
    /// Column pointer pairs read, summed over PEs.
    pub columns_visited: u64,
    pub nnz_activations: u64,
    pub outputs: u64,
}

/// Each MAC reads a weight index and a row gap, multiplies, and updates an
/// accumulator; each visited column reads a start and an end pointer.
pub fn energy_proxy(c: &EnergyCounters, cost: &CostTable) -> f64 {
    let per_mac = cost.weight_read + cost.index_read + cost.mac + cost.act_write;
    c.macs as f64 * per_mac
        + c.columns_visited as f64 * 2.0 * cost.offset_read
        + c.nnz_activations as f64 * cost.act_read
        + c.outputs as f64 * cost.act_write
}
