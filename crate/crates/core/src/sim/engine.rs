//! Cycle-approximate PE array.
//!
//! Each cycle every PE first takes one step (pop the next broadcast column
//! if idle, then perform at most one MAC), after which the broadcast unit
//! pushes the next nonzero activation into every FIFO if all of them have
//! room. Because PEs act before the push, the first MAC happens one cycle
//! after the first broadcast.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::dense_cycle_model;
use super::energy::{energy_proxy, CostTable, EnergyCounters};
use super::lnzd::lnzd_scan;
use crate::compress::Codebook;
use crate::error::{Error, Result};
use crate::fixed::{Acc32, Fixed16};
use crate::matrix::{relu_if, ActivationVector};
use crate::sparse::{global_row, storage_stats, CompressedModel, PeSlice, StorageStats};

pub const DEFAULT_FIFO_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_pes: usize,
    pub fifo_depth: usize,
    pub apply_relu: bool,
    /// Charge one cycle per filler entry instead of skipping it for free.
    pub fillers_cost_cycle: bool,
    pub cost_table: CostTable,
}

impl SimConfig {
    pub fn new(num_pes: usize) -> Self {
        Self {
            num_pes,
            fifo_depth: DEFAULT_FIFO_DEPTH,
            apply_relu: false,
            fillers_cost_cycle: false,
            cost_table: CostTable::default(),
        }
    }

    pub fn with_fifo_depth(mut self, depth: usize) -> Self {
        self.fifo_depth = depth;
        self
    }

    pub fn with_relu(mut self, on: bool) -> Self {
        self.apply_relu = on;
        self
    }

    fn validate(&self, model: &CompressedModel) -> Result<()> {
        if self.num_pes != model.num_pes() {
            return Err(Error::ConfigMismatch(format!(
                "config has {} PEs, model was partitioned for {}",
                self.num_pes,
                model.num_pes()
            )));
        }
        if self.fifo_depth == 0 {
            return Err(Error::invalid("fifo_depth must be at least 1"));
        }
        self.cost_table.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub total_cycles: u64,
    pub per_pe_macs: Vec<u64>,
    pub per_pe_idle_cycles: Vec<u64>,
    pub broadcast_stall_cycles: u64,
    pub nnz_activations: u64,
    /// Busiest PE's MACs over the mean; 1.0 when no PE did any work.
    pub load_imbalance: f64,
    /// Cycles spent on filler entries (always 0 unless fillers cost a cycle).
    pub filler_cycles: u64,
    pub events: EnergyCounters,
    pub storage: StorageStats,
    pub energy_proxy: f64,
    pub dense_cycles: u64,
    /// `dense_cycles / total_cycles`; infinite (serialized as null) when
    /// there was nothing to compute.
    pub speedup: f64,
}

impl SimReport {
    pub fn max_pe_macs(&self) -> u64 {
        self.per_pe_macs.iter().copied().max().unwrap_or(0)
    }
}

pub fn load_imbalance(per_pe_macs: &[u64]) -> f64 {
    let total: u64 = per_pe_macs.iter().sum();
    if total == 0 || per_pe_macs.is_empty() {
        return 1.0;
    }
    let mean = total as f64 / per_pe_macs.len() as f64;
    *per_pe_macs.iter().max().unwrap() as f64 / mean
}

#[derive(Debug, Clone, Copy)]
struct Job {
    act: Fixed16,
    cursor: usize,
    end: usize,
    /// Local row of the next entry before its gap is applied.
    pos: usize,
}

/// One PE: its broadcast FIFO, the column in flight, and its accumulators.
#[derive(Debug)]
struct PeState<'m> {
    slice: &'m PeSlice,
    fifo: VecDeque<(usize, Fixed16)>,
    job: Option<Job>,
    acc: Vec<Acc32>,
    macs: u64,
    idle: u64,
    filler_cycles: u64,
    columns_visited: u64,
}

enum Step {
    Mac,
    Filler,
    Starved,
}

impl<'m> PeState<'m> {
    fn new(slice: &'m PeSlice) -> Self {
        Self {
            slice,
            fifo: VecDeque::new(),
            job: None,
            acc: vec![Acc32::default(); slice.local_rows()],
            macs: 0,
            idle: 0,
            filler_cycles: 0,
            columns_visited: 0,
        }
    }

    fn has_work(&self) -> bool {
        self.job.is_some() || !self.fifo.is_empty()
    }

    fn step(&mut self, codebook: &Codebook, fillers_cost_cycle: bool) -> Step {
        loop {
            if let Some(job) = self.job.as_mut() {
                while job.cursor < job.end {
                    let e = job.cursor;
                    job.pos += self.slice.z()[e] as usize;
                    let row = job.pos;
                    job.pos += 1;
                    job.cursor += 1;
                    let index = self.slice.v()[e];
                    let done = job.cursor == job.end;
                    if index == 0 {
                        if fillers_cost_cycle {
                            self.filler_cycles += 1;
                            if done {
                                self.job = None;
                            }
                            return Step::Filler;
                        }
                        continue;
                    }
                    self.acc[row].mac(codebook.decode(index), job.act);
                    self.macs += 1;
                    if done {
                        self.job = None;
                    }
                    return Step::Mac;
                }
                self.job = None;
            }
            let Some((col, act)) = self.fifo.pop_front() else {
                return Step::Starved;
            };
            self.columns_visited += 1;
            let range = self.slice.column_range(col);
            self.job = Some(Job {
                act,
                cursor: range.start,
                end: range.end,
                pos: 0,
            });
        }
    }
}

/// Runs the PE array on one activation vector.
pub fn simulate_spmv(
    model: &CompressedModel,
    x: &ActivationVector,
    cfg: &SimConfig,
) -> Result<(ActivationVector, SimReport)> {
    if x.len() != model.cols() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} columns, activation vector has {} elements",
            model.cols(),
            x.len()
        )));
    }
    cfg.validate(model)?;

    let nonzeros = lnzd_scan(x);
    let codebook = model.codebook();
    let mut pes: Vec<PeState> = model.slices().iter().map(PeState::new).collect();
    let mut next = 0usize;
    let mut cycles = 0u64;
    let mut stalls = 0u64;
    let mut busy = vec![false; pes.len()];

    while next < nonzeros.len() || pes.iter().any(PeState::has_work) {
        cycles += 1;
        for (pe, b) in pes.iter_mut().zip(busy.iter_mut()) {
            *b = !matches!(pe.step(codebook, cfg.fillers_cost_cycle), Step::Starved);
        }
        let n_busy = busy.iter().filter(|&&b| b).count();
        if n_busy > 0 {
            for (pe, &b) in pes.iter_mut().zip(&busy) {
                if !b {
                    pe.idle += 1;
                }
            }
        }
        if next < nonzeros.len() {
            if pes.iter().all(|pe| pe.fifo.len() < cfg.fifo_depth) {
                let item = nonzeros[next];
                for pe in pes.iter_mut() {
                    pe.fifo.push_back(item);
                }
                next += 1;
            } else {
                stalls += 1;
            }
        }
    }

    let q = model.q_format();
    let n = model.num_pes();
    let mut out = vec![Fixed16::ZERO; model.rows()];
    for (pe_id, pe) in pes.iter().enumerate() {
        for (l, acc) in pe.acc.iter().enumerate() {
            out[global_row(l, pe_id, n)] = relu_if(acc.narrow(q), cfg.apply_relu);
        }
    }

    let per_pe_macs: Vec<u64> = pes.iter().map(|p| p.macs).collect();
    let events = EnergyCounters {
        macs: per_pe_macs.iter().sum(),
        columns_visited: pes.iter().map(|p| p.columns_visited).sum(),
        nnz_activations: nonzeros.len() as u64,
        outputs: model.rows() as u64,
    };
    let dense_cycles = dense_cycle_model(model.rows(), model.cols(), n);
    let report = SimReport {
        total_cycles: cycles,
        load_imbalance: load_imbalance(&per_pe_macs),
        per_pe_macs,
        per_pe_idle_cycles: pes.iter().map(|p| p.idle).collect(),
        broadcast_stall_cycles: stalls,
        nnz_activations: nonzeros.len() as u64,
        filler_cycles: pes.iter().map(|p| p.filler_cycles).sum(),
        energy_proxy: energy_proxy(&events, &cfg.cost_table),
        events,
        storage: storage_stats(model),
        dense_cycles,
        speedup: if cycles == 0 {
            f64::INFINITY
        } else {
            dense_cycles as f64 / cycles as f64
        },
    };
    Ok((ActivationVector::new(out), report))
}
