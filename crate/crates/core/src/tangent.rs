//! Finite-difference tangent fields built from optimal transport maps.
//!
//! A window around a center time `t0` holds `2k` snapshots taken at
//! `t0 + j h` for `j = -k..=-1, 1..=k`, stored in that order (see
//! [`window_slot`]).

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::ParticleCloud;
use crate::transport::{optimal_map, solve_1d_sorted, solve_assignment_warm};

/// Consecutive offsets solved in one warm-started chain.
const CHAIN_LEN: usize = 20;

/// One velocity vector per particle of a reference cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    dim: usize,
    vectors: Vec<f64>,
    reference_time: f64,
}

impl VelocityField {
    pub fn new(dim: usize, vectors: Vec<f64>, reference_time: f64) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyInput);
        }
        if dim == 0 || !vectors.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: vectors.len(),
            });
        }
        if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index: i / dim });
        }
        Ok(Self {
            dim,
            vectors,
            reference_time,
        })
    }

    pub fn zeros(dim: usize, n: usize, reference_time: f64) -> Self {
        Self {
            dim,
            vectors: vec![0.0; n * dim],
            reference_time,
        }
    }

    /// Same vectors attached to another reference time.
    pub fn at_time(mut self, t: f64) -> Self {
        self.reference_time = t;
        self
    }

    pub fn reference_time(&self) -> f64 {
        self.reference_time
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// `sqrt((1/N) sum_i |v_i|^2)`, the norm in L2 of the reference measure.
    pub fn l2_norm(&self) -> f64 {
        (self.vectors.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    /// L2 distance to another field on the same reference cloud.
    pub fn l2_distance(&self, other: &VelocityField) -> Result<f64> {
        if self.dim != other.dim || self.len() != other.len() {
            return Err(Error::Alignment("fields have different shapes".into()));
        }
        let s: f64 = self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((s / self.len() as f64).sqrt())
    }

    /// Writes `id,x0[,x1],v0[,v1]` rows for the reference cloud.
    pub fn write_csv<W: Write>(&self, reference: &ParticleCloud, out: &mut W) -> Result<()> {
        check_aligned(reference, self)?;
        let axes = |p: &str| {
            (0..self.dim)
                .map(|a| format!("{p}{a}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(out, "id,{},{}", axes("x"), axes("v"))?;
        for (i, p) in reference.points().enumerate() {
            write!(out, "{i}")?;
            for x in p.iter().chain(self.vector(i)) {
                write!(out, ",{x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn check_aligned(cloud: &ParticleCloud, field: &VelocityField) -> Result<()> {
    if cloud.dim() != field.dim() || cloud.len() != field.len() {
        return Err(Error::Alignment(format!(
            "field is {}x{}, cloud is {}x{}",
            field.len(),
            field.dim(),
            cloud.len(),
            cloud.dim()
        )));
    }
    Ok(())
}

/// Position of offset `j` (`1 <= |j| <= k`) inside a window slice.
pub fn window_slot(j: i64, k: usize) -> usize {
    debug_assert!(j != 0 && j.unsigned_abs() as usize <= k);
    if j < 0 {
        (j + k as i64) as usize
    } else {
        k + j as usize - 1
    }
}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveStep(h))
    }
}

fn check_window(center: &ParticleCloud, window: &[ParticleCloud], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::WindowShape("k must be at least 1".into()));
    }
    if window.len() != 2 * k {
        return Err(Error::WindowShape(format!(
            "expected {} snapshots for k = {k}, got {}",
            2 * k,
            window.len()
        )));
    }
    for (s, c) in window.iter().enumerate() {
        if c.len() != center.len() || c.dim() != center.dim() {
            return Err(Error::WindowShape(format!(
                "snapshot {s} is {}x{}, center is {}x{}",
                c.len(),
                c.dim(),
                center.len(),
                center.dim()
            )));
        }
    }
    Ok(())
}

/// `v_i = (T(x_i) - x_i) / h` with `T` the optimal map from `reference` to
/// `ahead`.
pub fn forward_difference_field(
    reference: &ParticleCloud,
    ahead: &ParticleCloud,
    h: f64,
) -> Result<VelocityField> {
    check_step(h)?;
    let map = optimal_map(reference, ahead)?;
    let vectors = map
        .images()
        .coords()
        .iter()
        .zip(reference.coords())
        .map(|(t, x)| (t - x) / h)
        .collect();
    VelocityField::new(reference.dim(), vectors, 0.0)
}

/// Images `T_j(x_i)` of the center under the optimal map to every window
/// snapshot, in window order.
fn window_images(
    center: &ParticleCloud,
    window: &[ParticleCloud],
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    if center.dim() == 1 {
        return window
            .par_iter()
            .map(|c| solve_1d_sorted(center, c).map(|m| m.images().coords().to_vec()))
            .collect();
    }
    // consecutive offsets give nearby problems, so chains along |j| reuse
    // column prices; the chain layout is fixed, so results do not depend
    // on the thread count
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for sign in [-1i64, 1] {
        let slots: Vec<usize> = (1..=k as i64).map(|j| window_slot(sign * j, k)).collect();
        chains.extend(slots.chunks(CHAIN_LEN).map(<[usize]>::to_vec));
    }
    let solved: Vec<Vec<(usize, Vec<f64>)>> = chains
        .par_iter()
        .map(|chain| {
            let mut prices: Option<Vec<f64>> = None;
            let mut out = Vec::with_capacity(chain.len());
            for &slot in chain {
                let (map, v) = solve_assignment_warm(center, &window[slot], prices.as_deref())?;
                prices = Some(v);
                out.push((slot, map.images().coords().to_vec()));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut images = vec![Vec::new(); window.len()];
    for (slot, img) in solved.into_iter().flatten() {
        images[slot] = img;
    }
    Ok(images)
}

fn centered_average(images: &[Vec<f64>], n_coords: usize, h: f64, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_coords];
    for j in 1..=k {
        let plus = &images[window_slot(j as i64, k)];
        let minus = &images[window_slot(-(j as i64), k)];
        let scale = 2.0 * j as f64 * h;
        for (acc, (p, m)) in v.iter_mut().zip(plus.iter().zip(minus)) {
            *acc += (p - m) / scale;
        }
    }
    for x in v.iter_mut() {
        *x /= k as f64;
    }
    v
}

/// Average of `k` centered differences of optimal maps out of the center
/// cloud:
/// `v_i = (1/k) sum_{j=1..k} [T_{+j}(x_i) - T_{-j}(x_i)] / (2 j h)`.
pub fn averaged_centered_field(
    center: &ParticleCloud,
    window: &[ParticleCloud],
    h: f64,
    k: usize,
) -> Result<VelocityField> {
    check_step(h)?;
    check_window(center, window, k)?;
    let images = window_images(center, window, k)?;
    let v = centered_average(&images, center.coords().len(), h, k);
    VelocityField::new(center.dim(), v, 0.0)
}

/// Same average, but from index-aligned trajectories instead of optimal
/// maps: particle `i` at offset `j` is `window[window_slot(j, k)].point(i)`.
pub fn particlewise_field(
    center: &ParticleCloud,
    window: &[ParticleCloud],
    h: f64,
    k: usize,
) -> Result<VelocityField> {
    check_step(h)?;
    check_window(center, window, k)?;
    let images: Vec<Vec<f64>> = window.iter().map(|c| c.coords().to_vec()).collect();
    let v = centered_average(&images, center.coords().len(), h, k);
    VelocityField::new(center.dim(), v, 0.0)
}
