//! 1-D Lloyd k-means over the kept weights of one matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Codebook, PruneMask, QuantizedMatrix};
use crate::error::{Error, Result};
use crate::fixed::{dequantize_value, quantize_value, QFormat};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub n_bits: u8,
    pub max_iter: usize,
    pub q_format: QFormat,
    pub seed: u64,
    /// Initial centroids are perturbed by up to `jitter` times the linear
    /// spacing. Zero (the default) keeps initialization deterministic
    /// regardless of seed.
    pub jitter: f64,
}

impl Default for KmeansConfig {
    fn default() -> Self {
        Self {
            n_bits: 4,
            max_iter: 100,
            q_format: QFormat::Q8_8,
            seed: 0,
            jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub matrix: QuantizedMatrix,
    /// Lloyd iterations executed.
    pub iterations: usize,
    /// True if the assignment reached a fixpoint before `max_iter`.
    pub converged: bool,
    /// SSE against the float centroids: entry 0 after the initial
    /// assignment, then one entry per iteration.
    pub sse_history: Vec<f64>,
}

pub fn kmeans_codebook(w: &DenseMatrix, mask: &PruneMask, cfg: &KmeansConfig) -> Result<QuantizedMatrix> {
    kmeans_codebook_traced(w, mask, cfg).map(|o| o.matrix)
}

pub fn kmeans_codebook_traced(w: &DenseMatrix, mask: &PruneMask, cfg: &KmeansConfig) -> Result<KmeansOutcome> {
    if mask.rows() != w.rows() || mask.cols() != w.cols() {
        return Err(Error::DimensionMismatch(format!(
            "mask {}x{} does not match matrix {}x{}",
            mask.rows(),
            mask.cols(),
            w.rows(),
            w.cols()
        )));
    }
    if cfg.max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if !(cfg.jitter >= 0.0 && cfg.jitter.is_finite()) {
        return Err(Error::invalid("jitter must be finite and nonnegative"));
    }
    // Validates n_bits before any work.
    Codebook::from_learned(cfg.n_bits, cfg.q_format, &[])?;
    if mask.popcount() == 0 {
        return Err(Error::invalid("no kept elements to quantize"));
    }

    // Exact zeros go straight to slot 0 and are not clustered.
    let points: Vec<(usize, f64)> = mask
        .bits()
        .iter()
        .zip(w.values())
        .enumerate()
        .filter(|(_, (&keep, &v))| keep && v != 0.0)
        .map(|(e, (_, &v))| (e, v as f64))
        .collect();
    let k = (1usize << cfg.n_bits) - 1;

    let mut lloyd = Lloyd::new(points.iter().map(|&(_, v)| v).collect(), k, cfg);
    let (iterations, converged) = lloyd.run(cfg.max_iter);

    let q = cfg.q_format;
    let mut learned = lloyd
        .occupied_centroids()
        .map(|c| quantize_value(c as f32, q))
        .collect::<Result<Vec<_>>>()?;
    learned.sort_unstable();
    learned.dedup();
    let raw: Vec<i16> = learned.iter().map(|c| c.raw()).collect();
    let codebook = Codebook::from_learned(cfg.n_bits, q, &raw)?;

    let decoded: Vec<f64> = learned.iter().map(|&c| dequantize_value(c, q) as f64).collect();
    let mut idx = vec![0u8; w.len()];
    for &(e, v) in &points {
        idx[e] = 1 + nearest(&decoded, v) as u8;
    }

    Ok(KmeansOutcome {
        matrix: QuantizedMatrix::new(w.rows(), w.cols(), idx, codebook)?,
        iterations,
        converged,
        sse_history: lloyd.history,
    })
}

/// Index of the closest centroid; ties go to the lower index.
#[inline]
fn nearest(centroids: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = (v - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

struct Lloyd {
    values: Vec<f64>,
    centroids: Vec<f64>,
    assign: Vec<usize>,
    history: Vec<f64>,
}

impl Lloyd {
    fn new(values: Vec<f64>, k: usize, cfg: &KmeansConfig) -> Self {
        let centroids = initial_centroids(&values, k, cfg);
        let assign = values.iter().map(|&v| nearest(&centroids, v)).collect();
        let mut s = Self {
            values,
            centroids,
            assign,
            history: Vec::new(),
        };
        s.history.push(s.sse());
        s
    }

    fn sse(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.assign)
            .map(|(&v, &a)| (v - self.centroids[a]).powi(2))
            .sum()
    }

    fn cluster_sse(&self, cluster: usize, centre: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.assign)
            .filter(|(_, &a)| a == cluster)
            .map(|(&v, _)| (v - centre).powi(2))
            .sum()
    }

    /// Returns (iterations, reached fixpoint).
    fn run(&mut self, max_iter: usize) -> (usize, bool) {
        if self.values.is_empty() {
            return (0, true);
        }
        for it in 1..=max_iter {
            self.update();
            self.history.push(self.sse());
            let changed = self.reassign();
            if !changed {
                return (it, true);
            }
        }
        (max_iter, false)
    }

    fn update(&mut self) {
        let k = self.centroids.len();
        let mut sum = vec![0.0f64; k];
        let mut count = vec![0usize; k];
        for (&v, &a) in self.values.iter().zip(&self.assign) {
            sum[a] += v;
            count[a] += 1;
        }
        for c in 0..k {
            if count[c] == 0 {
                continue;
            }
            let mean = sum[c] / count[c] as f64;
            // The rounded mean can land a hair off the true minimizer; never
            // let that raise the cluster's error.
            if mean != self.centroids[c] && self.cluster_sse(c, mean) <= self.cluster_sse(c, self.centroids[c]) {
                self.centroids[c] = mean;
            }
        }
    }

    fn reassign(&mut self) -> bool {
        let mut changed = false;
        for (v, a) in self.values.iter().zip(self.assign.iter_mut()) {
            let cur = self.centroids[*a];
            let best = nearest(&self.centroids, *v);
            // Only move on a strict improvement so the fixpoint test is stable.
            if best != *a && (*v - self.centroids[best]).abs() < (*v - cur).abs() {
                *a = best;
                changed = true;
            }
        }
        changed
    }

    fn occupied_centroids(&self) -> impl Iterator<Item = f64> + '_ {
        let mut used = vec![false; self.centroids.len()];
        for &a in &self.assign {
            used[a] = true;
        }
        self.centroids.iter().zip(used).filter(|(_, u)| *u).map(|(&c, _)| c)
    }
}

/// Evenly spaced between the smallest and largest value. When there are no
/// more distinct values than clusters, each distinct value seeds its own
/// centroid, which is already the zero-error solution.
fn initial_centroids(values: &[f64], k: usize, cfg: &KmeansConfig) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= k {
        return distinct;
    }
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    let spacing = if k > 1 { (hi - lo) / (k - 1) as f64 } else { 0.0 };
    let mut centroids: Vec<f64> = if k == 1 {
        vec![(lo + hi) / 2.0]
    } else {
        (0..k).map(|i| lo + spacing * i as f64).collect()
    };
    if cfg.jitter > 0.0 && spacing > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for c in centroids.iter_mut() {
            *c += cfg.jitter * spacing * rng.gen_range(-1.0..=1.0);
        }
        centroids.sort_by(f64::total_cmp);
    }
    centroids
}

/// Sum of squared differences between kept float weights and their decoded
/// fixed-point values.
pub fn quantization_sse(w: &DenseMatrix, mask: &PruneMask, qm: &QuantizedMatrix) -> Result<f64> {
    if mask.rows() != w.rows() || mask.cols() != w.cols() || qm.rows() != w.rows() || qm.cols() != w.cols() {
        return Err(Error::DimensionMismatch(
            "matrix, mask and quantized matrix must share dimensions".into(),
        ));
    }
    let q = qm.codebook().q_format();
    Ok(mask
        .bits()
        .iter()
        .zip(w.values())
        .zip(qm.indices())
        .filter(|((&keep, _), _)| keep)
        .map(|((_, &v), &i)| {
            let d = v as f64 - dequantize_value(qm.codebook().decode(i), q) as f64;
            d * d
        })
        .sum())
}
