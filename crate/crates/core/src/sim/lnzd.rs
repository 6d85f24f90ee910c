use crate::fixed::Fixed16;
use crate::matrix::ActivationVector;

/// Leading-nonzero detection: every nonzero activation with its column,
/// in ascending column order.
pub fn lnzd_scan(x: &ActivationVector) -> Vec<(usize, Fixed16)> {
    x.values()
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(j, &v)| (j, v))
        .collect()
}
