//! Reflected Brownian motion in a box, by Euler-Maruyama.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{Bounds, InitialCondition, MicroSim, ReinitPolicy, PAR_CHUNK};
use crate::error::{Error, Result};
use crate::measure::{ParticleCloud, ParticleRngs};

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionParams {
    pub n: usize,
    pub dim: usize,
    /// Speed scale multiplying the `N(0, h)` increment.
    pub v_c: f64,
    /// Micro step `h` in seconds.
    pub dt: f64,
    pub bounds: Bounds,
    pub init: InitialCondition,
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n_particles", "must be at least 1"));
        }
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::config("model", "diffusion supports d = 1 or 2"));
        }
        if !(self.v_c > 0.0 && self.v_c.is_finite()) {
            return Err(Error::config("v_c", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("micro_dt", "must be positive"));
        }
        Bounds::new(self.bounds.lo, self.bounds.hi)?;
        Ok(())
    }
}

/// Advances `coords` (row-major, `dim` per particle) by one micro step:
/// every coordinate gets `v_c * Z` with `Z ~ N(0, h)`, then is folded back
/// into the box. Returns the number of clamped coordinates.
pub fn diffusion_step(
    coords: &mut [f64],
    dim: usize,
    v_c: f64,
    dt: f64,
    bounds: &Bounds,
    rngs: &mut ParticleRngs,
) -> u64 {
    let scale = v_c * dt.sqrt();
    coords
        .par_chunks_exact_mut(dim)
        .zip(rngs.as_mut_slice())
        .with_min_len(PAR_CHUNK)
        .map(|(p, rng)| {
            let mut clamped = 0;
            for x in p.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                let (y, _, c) = bounds.reflect(*x + scale * z);
                *x = y;
                clamped += c as u64;
            }
            clamped
        })
        .sum()
}

#[derive(Debug)]
pub struct Diffusion {
    params: DiffusionParams,
    clamps: AtomicU64,
}

impl Diffusion {
    pub fn new(params: DiffusionParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            clamps: AtomicU64::new(0),
        })
    }

    pub fn params(&self) -> &DiffusionParams {
        &self.params
    }
}

impl MicroSim for Diffusion {
    type State = Vec<f64>;

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn n_particles(&self) -> usize {
        self.params.n
    }

    fn bounds(&self) -> Bounds {
        self.params.bounds
    }

    fn initial_state(&self, rngs: &mut ParticleRngs) -> Result<Vec<f64>> {
        let mut xs = self
            .params
            .init
            .sample(self.params.n, self.params.dim, rngs)?;
        for x in xs.iter_mut() {
            *x = self.params.bounds.reflect(*x).0;
        }
        Ok(xs)
    }

    fn step(&self, state: &mut Vec<f64>, rngs: &mut ParticleRngs) {
        let p = &self.params;
        let c = diffusion_step(state, p.dim, p.v_c, p.dt, &p.bounds, rngs);
        if c > 0 {
            self.clamps.fetch_add(c, Ordering::Relaxed);
        }
    }

    fn positions(&self, state: &Vec<f64>) -> ParticleCloud {
        ParticleCloud::from_flat(self.params.dim, state.clone()).expect("diffusion state is finite")
    }

    fn reinit(
        &self,
        pre_push: &Vec<f64>,
        predicted: &ParticleCloud,
        policy: ReinitPolicy,
        _horizon: f64,
        _rngs: &mut ParticleRngs,
    ) -> Result<Vec<f64>> {
        if policy != ReinitPolicy::None {
            return Err(Error::config(
                "reinit",
                "diffusion carries no internal state; use reinit = \"none\"",
            ));
        }
        if predicted.dim() != self.params.dim || predicted.coords().len() != pre_push.len() {
            return Err(Error::Alignment(
                "predicted cloud does not match the micro state".into(),
            ));
        }
        Ok(predicted.coords().to_vec())
    }

    fn clamp_events(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }
}
