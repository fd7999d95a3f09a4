//! Exact discrete optimal transport under squared Euclidean cost.
//!
//! Equal-size uniform measures always admit a permutation as an optimal
//! plan, so the workhorse here is an assignment solver. One-dimensional
//! problems are solved by sorting; unequal sizes go through a
//! transportation-problem solver whose plan can be turned into a map by
//! barycentric projection.

mod brute;
mod kantorovich;
mod lap;
mod sorted;

use std::io::Write;

pub use brute::{brute_force_assignment, BRUTE_FORCE_MAX};
pub use kantorovich::{barycentric_map, solve_kantorovich, TransportPlan, KANTOROVICH_CAP};
pub use sorted::solve_1d_sorted;

use crate::error::{Error, Result};
use crate::measure::ParticleCloud;

/// Largest `N` accepted by [`solve_assignment`].
pub const ASSIGNMENT_CAP: usize = 20_000;

/// Image of every source particle under a transport map.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportMap {
    assignment: Option<Vec<usize>>,
    images: ParticleCloud,
    cost: f64,
}

impl TransportMap {
    /// Permutation map `i -> dst[assignment[i]]` with its mean squared cost.
    pub(crate) fn from_assignment(
        src: &ParticleCloud,
        dst: &ParticleCloud,
        assignment: Vec<usize>,
    ) -> Self {
        let dim = src.dim();
        let mut coords = Vec::with_capacity(src.coords().len());
        for &j in &assignment {
            coords.extend_from_slice(dst.point(j));
        }
        let cost = mean_sq_cost(src, dst, &assignment);
        let images = ParticleCloud::from_flat(dim, coords).expect("images of a valid cloud");
        Self {
            assignment: Some(assignment),
            images,
            cost,
        }
    }

    pub(crate) fn from_images(images: ParticleCloud, cost: f64) -> Self {
        Self {
            assignment: None,
            images,
            cost,
        }
    }

    /// Target index of each source point, when the map is a permutation.
    pub fn assignment(&self) -> Option<&[usize]> {
        self.assignment.as_deref()
    }

    /// `T(x_i)` for every source point `i`, in source order.
    pub fn images(&self) -> &ParticleCloud {
        &self.images
    }

    /// Mean squared transport cost (`W2^2` for optimal maps).
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Writes `src_id,dst_id,sq_cost` rows for a permutation map.
    pub fn write_csv<W: Write>(&self, src: &ParticleCloud, out: &mut W) -> Result<()> {
        let assignment = self
            .assignment
            .as_ref()
            .ok_or_else(|| Error::Alignment("map is not a permutation".into()))?;
        writeln!(out, "src_id,dst_id,sq_cost")?;
        for (i, &j) in assignment.iter().enumerate() {
            let c = sq_dist(src.point(i), self.images.point(i));
            writeln!(out, "{i},{j},{c}")?;
        }
        Ok(())
    }
}

/// A 2-Wasserstein distance.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct W2Value(f64);

impl W2Value {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn squared(self) -> f64 {
        self.0 * self.0
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn mean_sq_cost(src: &ParticleCloud, dst: &ParticleCloud, assignment: &[usize]) -> f64 {
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| sq_dist(src.point(i), dst.point(j)))
        .sum();
    total / assignment.len() as f64
}

pub(crate) fn check_pair(src: &ParticleCloud, dst: &ParticleCloud) -> Result<()> {
    if src.dim() != dst.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            found: dst.dim(),
        });
    }
    if src.len() != dst.len() {
        return Err(Error::SizeMismatch {
            left: src.len(),
            right: dst.len(),
        });
    }
    Ok(())
}

/// Exact minimum of the mean squared cost over all permutations.
///
/// Among several optimal permutations the lexicographically smallest
/// assignment array is returned.
pub fn solve_assignment(src: &ParticleCloud, dst: &ParticleCloud) -> Result<TransportMap> {
    solve_assignment_warm(src, dst, None).map(|(map, _)| map)
}

/// [`solve_assignment`] seeded with column prices from an earlier, similar
/// problem. Returns the map together with the final column prices.
pub fn solve_assignment_warm(
    src: &ParticleCloud,
    dst: &ParticleCloud,
    warm: Option<&[f64]>,
) -> Result<(TransportMap, Vec<f64>)> {
    check_pair(src, dst)?;
    let n = src.len();
    if n > ASSIGNMENT_CAP {
        return Err(Error::CapExceeded {
            size: n,
            cap: ASSIGNMENT_CAP,
        });
    }
    let warm = warm.filter(|w| w.len() == n);
    let (a, b, dim) = (src.coords(), dst.coords(), src.dim());
    let sol = match dim {
        2 => lap::solve(
            n,
            |i, j| {
                let dx = a[2 * i] - b[2 * j];
                let dy = a[2 * i + 1] - b[2 * j + 1];
                dx * dx + dy * dy
            },
            warm,
        ),
        _ => lap::solve(
            n,
            |i, j| sq_dist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]),
            warm,
        ),
    };
    let prices = sol.v.clone();
    Ok((
        TransportMap::from_assignment(src, dst, sol.row_to_col),
        prices,
    ))
}

/// Optimal map between equal-size clouds: sorting in one dimension,
/// assignment otherwise.
pub fn optimal_map(src: &ParticleCloud, dst: &ParticleCloud) -> Result<TransportMap> {
    if src.dim() == 1 && dst.dim() == 1 {
        solve_1d_sorted(src, dst)
    } else {
        solve_assignment(src, dst)
    }
}

/// 2-Wasserstein distance between two empirical measures.
pub fn w2_distance(a: &ParticleCloud, b: &ParticleCloud) -> Result<W2Value> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let sq = if a.dim() == 1 {
        if a.len() == b.len() {
            solve_1d_sorted(a, b)?.cost()
        } else {
            sorted::w2_squared_quantile(&a.sorted_1d()?, &b.sorted_1d()?)
        }
    } else if a.len() == b.len() {
        solve_assignment(a, b)?.cost()
    } else {
        solve_kantorovich(a, b)?.cost()
    };
    Ok(W2Value(sq.max(0.0).sqrt()))
}
