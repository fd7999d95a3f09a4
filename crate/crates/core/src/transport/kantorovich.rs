//! Transportation problem between uniform measures of different sizes.
//!
//! Masses are scaled to integers (`M/g` units per source, `N/g` per
//! target, `g = gcd(N, M)`) and the problem is solved as a min-cost flow
//! by successive shortest paths with Dijkstra on reduced costs, so the
//! plan is exact up to the rounding of the final division.

use super::{sq_dist, TransportMap};
use crate::error::{Error, Result};
use crate::measure::ParticleCloud;

/// Largest `N * M` accepted by [`solve_kantorovich`].
pub const KANTOROVICH_CAP: usize = 4_000_000;

/// Sparse coupling between a source of `n` and a target of `m` points.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    n: usize,
    m: usize,
    entries: Vec<(usize, usize, f64)>,
    cost: f64,
}

impl TransportPlan {
    /// Builds a plan from `(source, target, mass)` triples. Masses must be
    /// nonnegative; marginals are not enforced here, see
    /// [`TransportPlan::marginal_error`].
    pub fn new(n: usize, m: usize, entries: Vec<(usize, usize, f64)>, cost: f64) -> Result<Self> {
        for &(i, j, w) in &entries {
            if i >= n || j >= m {
                return Err(Error::SizeMismatch {
                    left: i.max(j),
                    right: n.min(m),
                });
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::NonFiniteCoordinate { index: i });
            }
        }
        Ok(Self {
            n,
            m,
            entries,
            cost,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Objective value `sum pi_ij |x_i - y_j|^2`.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        for &(i, _, w) in &self.entries {
            r[i] += w;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.m];
        for &(_, j, w) in &self.entries {
            c[j] += w;
        }
        c
    }

    /// Largest absolute deviation from the uniform marginals.
    pub fn marginal_error(&self) -> f64 {
        let rn = 1.0 / self.n as f64;
        let cm = 1.0 / self.m as f64;
        let r = self
            .row_sums()
            .iter()
            .map(|s| (s - rn).abs())
            .fold(0.0, f64::max);
        let c = self
            .col_sums()
            .iter()
            .map(|s| (s - cm).abs())
            .fold(0.0, f64::max);
        r.max(c)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Exact optimal coupling between two uniform empirical measures.
pub fn solve_kantorovich(src: &ParticleCloud, dst: &ParticleCloud) -> Result<TransportPlan> {
    if src.dim() != dst.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            found: dst.dim(),
        });
    }
    let (n, m) = (src.len(), dst.len());
    if n * m > KANTOROVICH_CAP {
        return Err(Error::CapExceeded {
            size: n * m,
            cap: KANTOROVICH_CAP,
        });
    }
    let g = gcd(n, m);
    let mut supply = vec![(m / g) as u64; n];
    let mut demand = vec![(n / g) as u64; m];
    let total_units = (n * m / g) as u64;
    let cost = |i: usize, j: usize| sq_dist(src.point(i), dst.point(j));

    let mut flow = vec![0u64; n * m];
    // node potentials: reduced cost of i->j is c_ij + ps_i - pt_j >= 0
    let mut ps = vec![0.0f64; n];
    let mut pt: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| cost(i, j)).fold(f64::INFINITY, f64::min))
        .collect();

    let mut dist_s = vec![0.0f64; n];
    let mut dist_t = vec![0.0f64; m];
    let mut done_s = vec![false; n];
    let mut done_t = vec![false; m];
    let mut pred_t = vec![0usize; m]; // source feeding target j on the path
    let mut pred_s = vec![usize::MAX; n]; // target feeding source i (reverse edge), MAX = root

    let mut sent = 0u64;
    while sent < total_units {
        dist_s.fill(f64::INFINITY);
        dist_t.fill(f64::INFINITY);
        done_s.fill(false);
        done_t.fill(false);
        for i in 0..n {
            if supply[i] > 0 {
                dist_s[i] = 0.0;
                pred_s[i] = usize::MAX;
            }
        }
        // dense Dijkstra over sources and targets; the first target with
        // remaining demand to be settled ends the search
        let sink;
        loop {
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..n {
                if !done_s[i] && dist_s[i] < best {
                    best = dist_s[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_t[j] && dist_t[j] < best {
                    best = dist_t[j];
                    pick = Some((false, j));
                }
            }
            match pick.expect("feasible transportation problem stays connected") {
                (true, i) => {
                    done_s[i] = true;
                    for j in 0..m {
                        if done_t[j] {
                            continue;
                        }
                        let nd = best + cost(i, j) + ps[i] - pt[j];
                        if nd < dist_t[j] {
                            dist_t[j] = nd;
                            pred_t[j] = i;
                        }
                    }
                }
                (false, j) => {
                    done_t[j] = true;
                    if demand[j] > 0 {
                        sink = j;
                        break;
                    }
                    for i in 0..n {
                        if done_s[i] || flow[i * m + j] == 0 {
                            continue;
                        }
                        let nd = best - cost(i, j) + pt[j] - ps[i];
                        if nd < dist_s[i] {
                            dist_s[i] = nd;
                            pred_s[i] = j;
                        }
                    }
                }
            }
        }
        let cap = dist_t[sink];
        for i in 0..n {
            if done_s[i] {
                ps[i] += dist_s[i] - cap;
            }
        }
        for j in 0..m {
            if done_t[j] {
                pt[j] += dist_t[j] - cap;
            }
        }

        // bottleneck along the path
        let mut amount = demand[sink];
        let mut j = sink;
        loop {
            let i = pred_t[j];
            match pred_s[i] {
                usize::MAX => {
                    amount = amount.min(supply[i]);
                    break;
                }
                jp => {
                    amount = amount.min(flow[i * m + jp]);
                    j = jp;
                }
            }
        }
        let mut j = sink;
        loop {
            let i = pred_t[j];
            flow[i * m + j] += amount;
            match pred_s[i] {
                usize::MAX => {
                    supply[i] -= amount;
                    break;
                }
                jp => {
                    flow[i * m + jp] -= amount;
                    j = jp;
                }
            }
        }
        demand[sink] -= amount;
        sent += amount;
    }

    let unit = 1.0 / total_units as f64;
    let mut entries = Vec::new();
    let mut objective = 0.0;
    for i in 0..n {
        for j in 0..m {
            let f = flow[i * m + j];
            if f > 0 {
                let w = f as f64 * unit;
                objective += w * cost(i, j);
                entries.push((i, j, w));
            }
        }
    }
    TransportPlan::new(n, m, entries, objective)
}

/// Barycentric projection `T(x_i) = sum_j pi_ij y_j / sum_j pi_ij`.
pub fn barycentric_map(plan: &TransportPlan, dst: &ParticleCloud) -> Result<TransportMap> {
    let (n, m) = plan.shape();
    if dst.len() != m {
        return Err(Error::SizeMismatch {
            left: m,
            right: dst.len(),
        });
    }
    let dim = dst.dim();
    let mut coords = vec![0.0; n * dim];
    let mut mass = vec![0.0; n];
    let mut per_row = vec![0usize; n];
    let mut single = vec![usize::MAX; n];
    for &(i, j, w) in plan.entries() {
        if w == 0.0 {
            continue;
        }
        mass[i] += w;
        per_row[i] += 1;
        single[i] = j;
        for (k, &y) in dst.point(j).iter().enumerate() {
            coords[i * dim + k] += w * y;
        }
    }
    for i in 0..n {
        if mass[i] <= 0.0 {
            return Err(Error::DegenerateRow(i));
        }
        if per_row[i] == 1 {
            coords[i * dim..(i + 1) * dim].copy_from_slice(dst.point(single[i]));
        } else {
            coords[i * dim..(i + 1) * dim]
                .iter_mut()
                .for_each(|c| *c /= mass[i]);
        }
    }
    let images = ParticleCloud::from_flat(dim, coords)?;
    let mut map = TransportMap::from_images(images, plan.cost());
    if n == m && per_row.iter().all(|&c| c == 1) {
        let mut used = vec![false; m];
        if single
            .iter()
            .all(|&j| !std::mem::replace(&mut used[j], true))
        {
            map.assignment = Some(single);
        }
    }
    Ok(map)
}
