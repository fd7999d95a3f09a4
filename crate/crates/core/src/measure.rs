//! Empirical measures, histogram summaries and seeded per-particle randomness.
//!
//! A [`ParticleCloud`] is the uniform empirical measure on `N` points in
//! `R^d`; every particle carries weight `1/N`. Coordinates are stored
//! row-major in a flat `Vec<f64>`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl ParticleCloud {
    /// Builds a cloud from a list of points, preserving order.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyInput)?;
        let dim = first.as_ref().len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    /// Builds a cloud from row-major coordinates.
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if coords.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: coords.len() % dim,
            });
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoordinate { index: pos / dim });
        }
        Ok(Self { dim, coords })
    }

    /// One-dimensional convenience constructor.
    pub fn from_1d(xs: &[f64]) -> Result<Self> {
        Self::from_flat(1, xs.to_vec())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false: construction rejects empty input.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// Every point shifted by `shift`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: shift.len(),
            });
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(k, &c)| c + shift[k % self.dim])
            .collect();
        Self::from_flat(self.dim, coords)
    }

    /// Coordinates of a one-dimensional cloud in ascending order.
    pub fn sorted_1d(&self) -> Result<Vec<f64>> {
        if self.dim != 1 {
            return Err(Error::DimensionError {
                expected: 1,
                found: self.dim,
            });
        }
        let mut xs = self.coords.clone();
        xs.sort_by(f64::total_cmp);
        Ok(xs)
    }

    /// Mean position.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (acc, &x) in m.iter_mut().zip(p) {
                *acc += x;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }
}

/// Free-function form of [`ParticleCloud::from_points`].
pub fn empirical_from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<ParticleCloud> {
    ParticleCloud::from_points(points)
}

/// Fixed-width counts over `[lo, hi]`. Bins are half-open except the last,
/// which is closed on the right.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    /// Points that fell outside `[lo, hi]`.
    pub out_of_range: usize,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Set when no point of the cloud lies inside the range.
    pub fn no_overlap(&self) -> bool {
        self.total() == 0
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| self.lo + i as f64 * self.bin_width)
            .collect()
    }
}

/// Histogram of a one-dimensional cloud.
pub fn histogram(cloud: &ParticleCloud, bin_width: f64, range: (f64, f64)) -> Result<Histogram> {
    if cloud.dim() != 1 {
        return Err(Error::DimensionError {
            expected: 1,
            found: cloud.dim(),
        });
    }
    histogram_axis(cloud, 0, bin_width, range)
}

/// Histogram of one coordinate axis.
pub fn histogram_axis(
    cloud: &ParticleCloud,
    axis: usize,
    bin_width: f64,
    (lo, hi): (f64, f64),
) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::BadBinWidth(bin_width));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::BadRange { lo, hi });
    }
    if axis >= cloud.dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim(),
            found: axis + 1,
        });
    }
    let nbins = ((hi - lo) / bin_width).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; nbins];
    let mut out_of_range = 0;
    for p in cloud.points() {
        let x = p[axis];
        if x < lo || x > hi {
            out_of_range += 1;
            continue;
        }
        let mut b = ((x - lo) / bin_width).floor() as usize;
        if b >= nbins {
            b = nbins - 1;
        }
        // rounding in the division can land one bin off near an edge
        if b > 0 && x < lo + b as f64 * bin_width {
            b -= 1;
        } else if b + 1 < nbins && x >= lo + (b + 1) as f64 * bin_width {
            b += 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram {
        lo,
        hi,
        bin_width,
        counts,
        out_of_range,
    })
}

/// A seeded ChaCha8 substream. Equal `(seed, stream)` pairs yield
/// identical draw sequences on every platform.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// One substream per particle, keyed by particle id. Adding particles
/// never changes the draws seen by existing ones.
#[derive(Clone, Debug)]
pub struct ParticleRngs {
    seed: u64,
    streams: Vec<RngStream>,
}

impl ParticleRngs {
    pub fn new(seed: u64, n: usize) -> Self {
        Self {
            seed,
            streams: (0..n as u64).map(|id| RngStream::new(seed, id)).collect(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    pub fn get_mut(&mut self, id: usize) -> &mut RngStream {
        &mut self.streams[id]
    }

    pub fn iter_mut(&mut self) -> std::slice::IterMut<'_, RngStream> {
        self.streams.iter_mut()
    }

    pub fn as_mut_slice(&mut self) -> &mut [RngStream] {
        &mut self.streams
    }
}
