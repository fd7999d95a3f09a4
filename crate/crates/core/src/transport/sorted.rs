use super::{check_pair, TransportMap};
use crate::error::{Error, Result};
use crate::measure::ParticleCloud;

/// Indices of a 1-D cloud ordered by (value, original index).
pub(crate) fn stable_order(xs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(a.cmp(&b)));
    idx
}

/// Monotone rearrangement: the r-th smallest source point goes to the
/// r-th smallest target point.
pub fn solve_1d_sorted(src: &ParticleCloud, dst: &ParticleCloud) -> Result<TransportMap> {
    if src.dim() != 1 || dst.dim() != 1 {
        return Err(Error::DimensionError {
            expected: 1,
            found: src.dim().max(dst.dim()),
        });
    }
    check_pair(src, dst)?;
    let src_order = stable_order(src.coords());
    let dst_order = stable_order(dst.coords());
    let mut assignment = vec![0; src.len()];
    for (&i, &j) in src_order.iter().zip(&dst_order) {
        assignment[i] = j;
    }
    Ok(TransportMap::from_assignment(src, dst, assignment))
}

/// Squared W2 between two sorted samples of possibly different sizes,
/// integrating the squared difference of the quantile functions exactly.
pub(crate) fn w2_squared_quantile(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0.0f64;
    let mut total = 0.0;
    while i < n && j < m {
        let next_a = (i + 1) as f64 / n as f64;
        let next_b = (j + 1) as f64 / m as f64;
        let next = next_a.min(next_b);
        let d = a[i] - b[j];
        total += (next - u) * d * d;
        u = next;
        // compare via integer cross-multiplication to avoid rounding drift
        let (ka, kb) = ((i + 1) * m, (j + 1) * n);
        if ka <= kb {
            i += 1;
        }
        if kb <= ka {
            j += 1;
        }
    }
    total
}
