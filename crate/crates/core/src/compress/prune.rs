use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::PruneMask;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Pruning policy selector used by the CLI and the density sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PrunePolicy {
    Magnitude,
    Balanced,
    Nm { n_keep: usize, m_group: usize },
}

impl PrunePolicy {
    pub fn apply(self, w: &DenseMatrix, density: f64, num_pes: usize) -> Result<PruneMask> {
        match self {
            PrunePolicy::Magnitude => prune_magnitude(w, density),
            PrunePolicy::Balanced => prune_load_balanced(w, density, num_pes),
            PrunePolicy::Nm { n_keep, m_group } => prune_structured_nm(w, n_keep, m_group),
        }
    }
}

fn check_density(density: f64) -> Result<()> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!("density must be in (0, 1], got {density}")));
    }
    Ok(())
}

#[inline]
fn keep_count(density: f64, total: usize) -> usize {
    (density * total as f64).round() as usize
}

/// Larger magnitude first; equal magnitudes keep the smaller row-major index.
#[inline]
fn rank(w: &[f32], a: usize, b: usize) -> Ordering {
    w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b))
}

/// Marks the `k` highest-ranked elements among `candidates`.
fn keep_top(w: &[f32], mut candidates: Vec<usize>, k: usize, keep: &mut [bool]) {
    if k == 0 {
        return;
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, |&a, &b| rank(w, a, b));
        candidates.truncate(k);
    }
    for e in candidates {
        keep[e] = true;
    }
}

/// Keeps the `round(density * rows * cols)` largest-magnitude weights.
pub fn prune_magnitude(w: &DenseMatrix, density: f64) -> Result<PruneMask> {
    check_density(density)?;
    let total = w.len();
    let k = keep_count(density, total);
    if k == 0 {
        return Err(Error::invalid(format!(
            "density {density} keeps no elements of a {}x{} matrix",
            w.rows(),
            w.cols()
        )));
    }
    let mut keep = vec![false; total];
    keep_top(w.values(), (0..total).collect(), k, &mut keep);
    PruneMask::new(w.rows(), w.cols(), keep)
}

/// Magnitude pruning applied independently to each PE's row bucket
/// (row r belongs to PE r mod num_pes), so every PE keeps the same share
/// of its own rows.
pub fn prune_load_balanced(w: &DenseMatrix, density: f64, num_pes: usize) -> Result<PruneMask> {
    check_density(density)?;
    if num_pes == 0 {
        return Err(Error::invalid("num_pes must be at least 1"));
    }
    let (rows, cols) = (w.rows(), w.cols());
    let mut keep = vec![false; w.len()];
    for pe in 0..num_pes {
        let bucket: Vec<usize> = (pe..rows)
            .step_by(num_pes)
            .flat_map(|r| r * cols..(r + 1) * cols)
            .collect();
        let k = keep_count(density, bucket.len());
        keep_top(w.values(), bucket, k, &mut keep);
    }
    let mask = PruneMask::new(rows, cols, keep)?;
    if mask.popcount() == 0 {
        return Err(Error::invalid(format!(
            "density {density} keeps no elements in any of {num_pes} PE buckets"
        )));
    }
    Ok(mask)
}

/// Keeps the `n_keep` largest-magnitude weights of every run of `m_group`
/// consecutive elements within a row.
pub fn prune_structured_nm(w: &DenseMatrix, n_keep: usize, m_group: usize) -> Result<PruneMask> {
    if m_group == 0 || n_keep == 0 || n_keep > m_group {
        return Err(Error::invalid(format!(
            "N:M pattern needs 1 <= N <= M, got {n_keep}:{m_group}"
        )));
    }
    if !w.cols().is_multiple_of(m_group) {
        return Err(Error::invalid(format!(
            "{} columns are not divisible by group size {m_group}",
            w.cols()
        )));
    }
    let mut keep = vec![false; w.len()];
    for start in (0..w.len()).step_by(m_group) {
        keep_top(w.values(), (start..start + m_group).collect(), n_keep, &mut keep);
    }
    PruneMask::new(w.rows(), w.cols(), keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[f32]) -> DenseMatrix {
        DenseMatrix::new(rows, cols, v.to_vec()).unwrap()
    }

    /// Brute force: sort every index by the ranking rule and take a prefix.
    fn oracle_top_k(v: &[f32], k: usize) -> Vec<bool> {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap().then(a.cmp(&b)));
        let mut keep = vec![false; v.len()];
        for &i in &order[..k] {
            keep[i] = true;
        }
        keep
    }

    #[test]
    fn magnitude_examples() {
        let w = mat(2, 2, &[0.1, -2.0, 0.5, 0.05]);
        let m = prune_magnitude(&w, 0.5).unwrap();
        assert_eq!(m.bits(), &[false, true, true, false]);
        assert_eq!(m.bits(), oracle_top_k(w.values(), 2).as_slice());

        assert!(prune_magnitude(&w, 1.0).unwrap().bits().iter().all(|&b| b));

        let tie = mat(1, 2, &[1.0, 1.0]);
        assert_eq!(prune_magnitude(&tie, 0.5).unwrap().bits(), &[true, false]);
    }

    #[test]
    fn magnitude_errors() {
        let w = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(prune_magnitude(&w, 0.0).is_err());
        assert!(prune_magnitude(&w, 1.5).is_err());
        assert!(prune_magnitude(&w, f64::NAN).is_err());
        // round(0.1 * 4) == 0
        assert!(prune_magnitude(&w, 0.1).is_err());
    }

    #[test]
    fn balanced_examples() {
        let w = mat(4, 1, &[10.0, 0.1, 0.2, 9.0]);
        let m = prune_load_balanced(&w, 0.5, 2).unwrap();
        assert_eq!(m.bits(), &[true, false, false, true]);
        assert_eq!(m.per_pe_counts(2), vec![1, 1]);

        let skew = mat(4, 1, &[10.0, 9.0, 0.1, 0.2]);
        let global = prune_magnitude(&skew, 0.5).unwrap();
        assert_eq!(global.per_pe_counts(2), vec![1, 1]);
        let skew2 = mat(4, 1, &[10.0, 0.1, 9.0, 0.2]);
        assert_eq!(prune_magnitude(&skew2, 0.5).unwrap().per_pe_counts(2), vec![2, 0]);
        assert_eq!(
            prune_load_balanced(&skew2, 0.5, 2).unwrap().per_pe_counts(2),
            vec![1, 1]
        );

        assert!(prune_load_balanced(&w, 1.0, 3).unwrap().bits().iter().all(|&b| b));
    }

    #[test]
    fn balanced_allows_empty_buckets() {
        let w = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = prune_load_balanced(&w, 0.5, 4).unwrap();
        assert_eq!(m.per_pe_counts(4), vec![1, 1, 0, 0]);
        assert!(prune_load_balanced(&w, 0.5, 0).is_err());
    }

    #[test]
    fn nm_examples() {
        let w = mat(1, 4, &[0.1, -0.9, 0.3, 0.05]);
        assert_eq!(
            prune_structured_nm(&w, 2, 4).unwrap().bits(),
            &[false, true, true, false]
        );
        assert!(prune_structured_nm(&w, 4, 4).unwrap().bits().iter().all(|&b| b));
        let z = mat(1, 4, &[0.0; 4]);
        assert_eq!(
            prune_structured_nm(&z, 2, 4).unwrap().bits(),
            &[true, true, false, false]
        );
    }

    #[test]
    fn nm_errors() {
        let w = mat(1, 6, &[1.0; 6]);
        assert!(prune_structured_nm(&w, 2, 4).is_err());
        assert!(prune_structured_nm(&w, 0, 2).is_err());
        assert!(prune_structured_nm(&w, 3, 2).is_err());
        assert!(prune_structured_nm(&w, 1, 0).is_err());
    }

    #[test]
    fn policy_dispatch() {
        let w = mat(2, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let nm = PrunePolicy::Nm { n_keep: 1, m_group: 2 }.apply(&w, 0.3, 1).unwrap();
        assert_eq!(nm.popcount(), 4);
        assert_eq!(PrunePolicy::Magnitude.apply(&w, 0.25, 1).unwrap().popcount(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn matrix() -> impl Strategy<Value = DenseMatrix> {
            (1usize..12, 1usize..12).prop_flat_map(|(r, c)| {
                // Coarse values so ties are common.
                proptest::collection::vec(-8i8..8, r * c)
                    .prop_map(move |v| DenseMatrix::new(r, c, v.into_iter().map(|x| x as f32 * 0.5).collect()).unwrap())
            })
        }

        proptest! {
            #[test]
            fn magnitude_matches_sort_oracle(w in matrix(), density in 0.01f64..=1.0) {
                let k = (density * w.len() as f64).round() as usize;
                match prune_magnitude(&w, density) {
                    Ok(m) => {
                        prop_assert_eq!(m.popcount(), k);
                        let expected = oracle_top_k(w.values(), k);
                        prop_assert_eq!(m.bits(), expected.as_slice());
                    }
                    Err(_) => prop_assert_eq!(k, 0),
                }
            }

            #[test]
            fn nm_groups_exact(w in matrix(), m_group in 1usize..5, n_frac in 0.0f64..1.0) {
                let n_keep = 1 + (n_frac * m_group as f64) as usize;
                let n_keep = n_keep.min(m_group);
                let cols = w.cols() - w.cols() % m_group;
                prop_assume!(cols > 0);
                let w = DenseMatrix::new(
                    w.rows(),
                    cols,
                    (0..w.rows()).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|(r, c)| w.get(r, c)).collect(),
                ).unwrap();
                let m = prune_structured_nm(&w, n_keep, m_group).unwrap();
                for g in m.bits().chunks(m_group) {
                    prop_assert_eq!(g.iter().filter(|&&b| b).count(), n_keep);
                }
            }

            #[test]
            fn balanced_tracks_proportional_share(
                w in matrix(), density in 0.05f64..=1.0, num_pes in 1usize..6,
            ) {
                if let Ok(m) = prune_load_balanced(&w, density, num_pes) {
                    let counts = m.per_pe_counts(num_pes);
                    for (pe, &n) in counts.iter().enumerate() {
                        let bucket_rows = (pe..w.rows()).step_by(num_pes).count();
                        let exact = density * (bucket_rows * w.cols()) as f64;
                        prop_assert!((n as f64 - exact).abs() <= 0.5 + 1e-9);
                    }
                }
            }
        }
    }
}
