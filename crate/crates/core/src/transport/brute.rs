use super::{check_pair, mean_sq_cost, TransportMap};
use crate::error::{Error, Result};
use crate::measure::ParticleCloud;

/// Largest size accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_MAX: usize = 8;

/// Exhaustive search over all `N!` permutations, visited in lexicographic
/// order; a later permutation only wins if it is strictly cheaper.
pub fn brute_force_assignment(src: &ParticleCloud, dst: &ParticleCloud) -> Result<TransportMap> {
    check_pair(src, dst)?;
    let n = src.len();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            size: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = mean_sq_cost(src, dst, &perm);
    while next_permutation(&mut perm) {
        let c = mean_sq_cost(src, dst, &perm);
        if c < best_cost - 1e-12 * best_cost.abs() {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(TransportMap::from_assignment(src, dst, best))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
