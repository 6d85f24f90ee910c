use std::ffi::OsString;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::{digest_outputs, RunManifest, TOOL_VERSION};
use super::{CompareArgs, CompressArgs, PolicyArg, SimulateArgs, SweepArgs};
use crate::compress::{kmeans_codebook_traced, quantization_sse, KmeansConfig, PrunePolicy};
use crate::error::{Error, Result};
use crate::fixed::{dequantize_value, QFormat};
use crate::fsutil::write_atomic;
use crate::matrix::{encode_dmat, gemv_dense_oracle, parse_matrix_file, parse_vector_file, ActivationVector};
use crate::sim::{density_sweep, simulate_spmv, SimConfig, SimReport, SweepConfig, SweepRow};
use crate::sparse::{encode_model, read_model, storage_stats, CompressedModel, StorageStats};

#[derive(Debug, Clone, Serialize)]
pub struct CompressReport {
    pub rows: usize,
    pub cols: usize,
    pub num_pes: usize,
    pub policy: PrunePolicy,
    pub density_requested: Option<f64>,
    pub kept: usize,
    pub density_actual: f64,
    pub nonzero_indices: usize,
    pub filler_entries: usize,
    pub q_fraction_bits: u8,
    pub codebook: Vec<f32>,
    pub kmeans_iterations: usize,
    pub kmeans_converged: bool,
    pub sse: f64,
    pub storage: StorageStats,
    pub compression_ratio_vs_4bit_dense: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOutcome {
    Match {
        outputs: usize,
    },
    Mismatch {
        index: usize,
        sparse_raw: i16,
        dense_raw: i16,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Writes every output, then the manifest describing them.
fn finish(
    command: &str,
    inputs: &[&Path],
    seed: Option<u64>,
    config: serde_json::Value,
    outputs: Vec<(PathBuf, Vec<u8>)>,
    manifest_path: PathBuf,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        inputs: inputs.iter().map(|p| display(p)).collect(),
        seed,
        config,
        tool_version: TOOL_VERSION.to_string(),
        outputs: outputs.iter().map(|(p, _)| display(p)).collect(),
        output_digest: digest_outputs(outputs.iter().map(|(_, b)| b.as_slice())),
    };
    let manifest_bytes = json_bytes(&manifest)?;
    for (path, bytes) in &outputs {
        write_atomic(path, bytes)?;
    }
    write_atomic(manifest_path, &manifest_bytes)
}

fn check_pes(pes: usize) -> Result<()> {
    if pes == 0 || pes > u16::MAX as usize {
        return Err(Error::invalid(format!("--pes must be in 1..=65535, got {pes}")));
    }
    Ok(())
}

fn parse_nm(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::invalid(format!("--nm expects N:M, got `{s}`"));
    let (n, m) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        n.trim().parse().map_err(|_| bad())?,
        m.trim().parse().map_err(|_| bad())?,
    ))
}

fn resolve_policy(policy: PolicyArg, density: Option<f64>, nm: Option<&str>) -> Result<(PrunePolicy, f64)> {
    match policy {
        PolicyArg::Nm => {
            let spec = nm.ok_or_else(|| Error::invalid("--policy nm requires --nm N:M"))?;
            let (n_keep, m_group) = parse_nm(spec)?;
            Ok((
                PrunePolicy::Nm { n_keep, m_group },
                n_keep as f64 / m_group.max(1) as f64,
            ))
        }
        PolicyArg::Magnitude | PolicyArg::Balanced => {
            let density = density.ok_or_else(|| Error::invalid("--density is required for this policy"))?;
            let p = if policy == PolicyArg::Magnitude {
                PrunePolicy::Magnitude
            } else {
                PrunePolicy::Balanced
            };
            Ok((p, density))
        }
    }
}

pub fn cmd_compress(a: &CompressArgs) -> Result<CompressReport> {
    let q = QFormat::new(a.qbits)?;
    check_pes(a.pes)?;
    let (policy, density) = resolve_policy(a.policy, a.density, a.nm.as_deref())?;
    let w = parse_matrix_file(&a.matrix)?;
    let mask = policy.apply(&w, density, a.pes)?;
    let kcfg = KmeansConfig {
        n_bits: 4,
        max_iter: a.max_iter,
        q_format: q,
        seed: a.seed,
        jitter: 0.0,
    };
    let km = kmeans_codebook_traced(&w, &mask, &kcfg)?;
    let sse = quantization_sse(&w, &mask, &km.matrix)?;
    let model = CompressedModel::from_quantized(&km.matrix, a.pes)?;
    let storage = storage_stats(&model);

    let report = CompressReport {
        rows: w.rows(),
        cols: w.cols(),
        num_pes: a.pes,
        policy,
        density_requested: a.density,
        kept: mask.popcount(),
        density_actual: mask.density(),
        nonzero_indices: km.matrix.nnz(),
        filler_entries: model.slices().iter().map(|s| s.filler_count()).sum(),
        q_fraction_bits: q.frac_bits(),
        codebook: km
            .matrix
            .codebook()
            .entries()
            .iter()
            .map(|&c| dequantize_value(c, q))
            .collect(),
        kmeans_iterations: km.iterations,
        kmeans_converged: km.converged,
        sse,
        storage,
        compression_ratio_vs_4bit_dense: storage.ratio_vs_dense4(),
    };

    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".stats.json"));
    let config = serde_json::json!({
        "policy": policy,
        "density": density,
        "pes": a.pes,
        "qbits": a.qbits,
        "max_iter": a.max_iter,
    });
    finish(
        "compress",
        &[&a.matrix],
        Some(a.seed),
        config,
        vec![
            (a.out.clone(), encode_model(&model)?),
            (report_path, json_bytes(&report)?),
        ],
        with_suffix(&a.out, ".manifest.json"),
    )?;
    Ok(report)
}

fn load_activations(path: &Path, model: &CompressedModel) -> Result<ActivationVector> {
    let xs = parse_vector_file(path)?;
    if xs.len() != model.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{}: {} activations for a model with {} columns",
            path.display(),
            xs.len(),
            model.cols()
        )));
    }
    ActivationVector::quantize(&xs, model.q_format())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<SimReport> {
    let model = read_model(&a.model)?;
    let x = load_activations(&a.activations, &model)?;
    let mut cfg = SimConfig::new(model.num_pes())
        .with_fifo_depth(a.fifo_depth)
        .with_relu(a.relu);
    cfg.fillers_cost_cycle = a.fillers_cost_cycle;
    let (y, report) = simulate_spmv(&model, &x, &cfg)?;

    let out = y.to_f32(model.q_format());
    let report_path = a.report.clone().unwrap_or_else(|| with_suffix(&a.out, ".report.json"));
    finish(
        "simulate",
        &[&a.model, &a.activations],
        None,
        serde_json::to_value(cfg)?,
        vec![
            (a.out.clone(), encode_dmat(out.len(), 1, &out)),
            (report_path, json_bytes(&report)?),
        ],
        with_suffix(&a.out, ".manifest.json"),
    )?;
    Ok(report)
}

pub fn cmd_compare(a: &CompareArgs) -> Result<CompareOutcome> {
    let model = read_model(&a.model)?;
    let reference = match &a.oracle_model {
        Some(p) => {
            let r = read_model(p)?;
            if (r.rows(), r.cols()) != (model.rows(), model.cols()) {
                return Err(Error::DimensionMismatch(format!(
                    "oracle model is {}x{}, model is {}x{}",
                    r.rows(),
                    r.cols(),
                    model.rows(),
                    model.cols()
                )));
            }
            r
        }
        None => model.clone(),
    };
    let x = load_activations(&a.activations, &model)?;
    let cfg = SimConfig::new(model.num_pes())
        .with_fifo_depth(a.fifo_depth)
        .with_relu(a.relu);
    let (sparse, _) = simulate_spmv(&model, &x, &cfg)?;
    let dense = gemv_dense_oracle(&reference.to_quantized()?, &x, a.relu)?;
    let mismatch = sparse.values().iter().zip(dense.values()).position(|(s, d)| s != d);
    Ok(match mismatch {
        None => CompareOutcome::Match { outputs: sparse.len() },
        Some(index) => CompareOutcome::Mismatch {
            index,
            sparse_raw: sparse.values()[index].raw(),
            dense_raw: dense.values()[index].raw(),
        },
    })
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<Vec<SweepRow>> {
    let q = QFormat::new(a.qbits)?;
    check_pes(a.pes)?;
    let policy = match a.policy {
        PolicyArg::Magnitude => PrunePolicy::Magnitude,
        PolicyArg::Balanced => PrunePolicy::Balanced,
        PolicyArg::Nm => return Err(Error::invalid("sweep supports --policy magnitude or balanced")),
    };
    let w = parse_matrix_file(&a.matrix)?;
    let mut cfg = SweepConfig::new(a.pes, a.seed);
    cfg.sim = cfg.sim.with_fifo_depth(a.fifo_depth);
    cfg.kmeans.q_format = q;
    cfg.kmeans.max_iter = a.max_iter;
    let rows = density_sweep(&w, &a.densities, policy, &cfg)?;

    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        writer.serialize(r)?;
    }
    let csv_bytes = writer.into_inner().map_err(|e| Error::io(&a.out, e.into_error()))?;
    finish(
        "sweep",
        &[&a.matrix],
        Some(a.seed),
        serde_json::json!({ "policy": policy, "densities": a.densities, "sweep": cfg }),
        vec![(a.out.clone(), csv_bytes)],
        with_suffix(&a.out, ".manifest.json"),
    )?;
    Ok(rows)
}
