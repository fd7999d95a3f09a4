//! One-dimensional run-and-tumble bacteria with a two-variable
//! excitation/adaptation signalling cartoon.
//!
//! Each bacterium senses `l = beta * S(x)` where `S` is a Gaussian
//! chemoattractant profile. A fast excitation `u1` and a slow adaptation
//! `u2` follow
//!
//! ```text
//! du1/dt = (l - u2 - u1) / t_e
//! du2/dt = (l - u2) / t_a
//! ```
//!
//! so `u1` is positive while the sensed signal is rising. Six flagella
//! switch between clockwise (0) and counter-clockwise (1) as independent
//! two-state Markov chains with rates
//!
//! ```text
//! CW  -> CCW : lambda0 * exp( gain * u1)
//! CCW -> CW  : lambda0 * exp(-gain * u1)
//! ```
//!
//! A bacterium runs at `v_cell` along its heading while more than three
//! flagella turn counter-clockwise, and otherwise tumbles, drawing a
//! fresh heading from {-1, +1}.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::{Bounds, InitialCondition, MicroSim, ReinitPolicy, PAR_CHUNK};
use crate::error::{Error, Result};
use crate::measure::{ParticleCloud, ParticleRngs, RngStream};

pub const FLAGELLA: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct ChemotaxisParams {
    pub n: usize,
    /// Micro step `h` in seconds.
    pub dt: f64,
    pub v_cell: f64,
    pub bounds: Bounds,
    pub chemo_mean: f64,
    pub chemo_sd: f64,
    /// Excitation time scale (s).
    pub t_e: f64,
    /// Adaptation time scale (s).
    pub t_a: f64,
    /// Base flagellar switching rate (1/s).
    pub lambda0: f64,
    /// Sensitivity of the switching rates to `u1`.
    pub gain: f64,
    /// Sensing gain `beta` in `l = beta * S(x)`.
    pub beta: f64,
    pub init: InitialCondition,
}

impl ChemotaxisParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n_particles", "must be at least 1"));
        }
        let positive = [
            ("micro_dt", self.dt),
            ("v_cell", self.v_cell),
            ("chemo_sd", self.chemo_sd),
            ("t_e", self.t_e),
            ("t_a", self.t_a),
            ("lambda0", self.lambda0),
            ("gain", self.gain),
            ("beta", self.beta),
        ];
        for (key, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(key, format!("must be positive, got {value}")));
            }
        }
        if !self.chemo_mean.is_finite() {
            return Err(Error::config("chemo_mean", "must be finite"));
        }
        Bounds::new(self.bounds.lo, self.bounds.hi)?;
        Ok(())
    }

    /// Chemoattractant profile: Gaussian density with the configured mean
    /// and standard deviation.
    pub fn profile(&self, x: f64) -> f64 {
        let z = (x - self.chemo_mean) / self.chemo_sd;
        (-0.5 * z * z).exp() / (self.chemo_sd * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Sensed signal `beta * S(x)`; also the adapted value of `u2`.
    pub fn signal(&self, x: f64) -> f64 {
        self.beta * self.profile(x)
    }

    /// One explicit Euler step of the signalling ODEs at constant signal.
    pub fn internal_step(&self, u1: f64, u2: f64, signal: f64) -> (f64, f64) {
        let du1 = (signal - u2 - u1) / self.t_e;
        let du2 = (signal - u2) / self.t_a;
        (u1 + self.dt * du1, u2 + self.dt * du2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bacterium {
    pub x: f64,
    pub u1: f64,
    pub u2: f64,
    /// Bit `k` set means flagellum `k` turns counter-clockwise.
    pub flagella: u8,
    /// +1 or -1.
    pub heading: i8,
}

impl Bacterium {
    pub fn ccw_count(&self) -> u32 {
        self.flagella.count_ones()
    }

    pub fn is_running(&self) -> bool {
        self.ccw_count() > 3
    }

    pub fn flagella_bits(&self) -> [u8; FLAGELLA] {
        std::array::from_fn(|k| (self.flagella >> k) & 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChemotaxisState {
    pub cells: Vec<Bacterium>,
}

fn random_heading(rng: &mut RngStream) -> i8 {
    if rng.next_u32() & 1 == 0 {
        -1
    } else {
        1
    }
}

/// Six 21-bit uniforms from two 64-bit draws.
fn six_uniforms(rng: &mut RngStream) -> [f64; FLAGELLA] {
    const MASK: u64 = (1 << 21) - 1;
    const SCALE: f64 = 1.0 / (1u64 << 21) as f64;
    let a = rng.next_u64();
    let b = rng.next_u64();
    [
        (a & MASK) as f64 * SCALE,
        ((a >> 21) & MASK) as f64 * SCALE,
        ((a >> 42) & MASK) as f64 * SCALE,
        (b & MASK) as f64 * SCALE,
        ((b >> 21) & MASK) as f64 * SCALE,
        ((b >> 42) & MASK) as f64 * SCALE,
    ]
}

fn step_cell(p: &ChemotaxisParams, cell: &mut Bacterium, rng: &mut RngStream) -> bool {
    let signal = p.signal(cell.x);
    let (u1, u2) = p.internal_step(cell.u1, cell.u2, signal);
    cell.u1 = u1;
    cell.u2 = u2;

    // motion uses the flagellar state at the start of the step
    let mut clamped = false;
    if cell.is_running() {
        let (x, reflections, c) = p
            .bounds
            .reflect(cell.x + p.v_cell * p.dt * f64::from(cell.heading));
        cell.x = x;
        if reflections % 2 == 1 {
            cell.heading = -cell.heading;
        }
        clamped = c;
    } else {
        cell.heading = random_heading(rng);
    }

    let bias = (p.gain * cell.u1).exp();
    let p_to_ccw = -(-p.lambda0 * bias * p.dt).exp_m1();
    let p_to_cw = -(-p.lambda0 / bias * p.dt).exp_m1();
    let draws = six_uniforms(rng);
    for (k, &u) in draws.iter().enumerate() {
        let ccw = (cell.flagella >> k) & 1 == 1;
        let flip = if ccw { u < p_to_cw } else { u < p_to_ccw };
        if flip {
            cell.flagella ^= 1 << k;
        }
    }
    clamped
}

/// Advances every bacterium by one micro step. Returns the number of
/// clamped positions.
pub fn chemotaxis_step(
    p: &ChemotaxisParams,
    state: &mut ChemotaxisState,
    rngs: &mut ParticleRngs,
) -> u64 {
    state
        .cells
        .par_iter_mut()
        .zip(rngs.as_mut_slice())
        .with_min_len(PAR_CHUNK)
        .map(|(cell, rng)| step_cell(p, cell, rng) as u64)
        .sum()
}

fn check_aligned(n: usize, predicted: &ParticleCloud) -> Result<()> {
    if predicted.dim() != 1 {
        return Err(Error::Alignment(format!(
            "chemotaxis is one-dimensional, predicted cloud has d = {}",
            predicted.dim()
        )));
    }
    if predicted.len() != n {
        return Err(Error::Alignment(format!(
            "{} predicted positions for {n} bacteria",
            predicted.len()
        )));
    }
    Ok(())
}

/// Keeps flagella and heading from the state the prediction started at,
/// zeroes `u1` and advances `u2` by one Euler step of length `horizon`
/// along its own ODE.
pub fn reinit_history_dependent(
    pre_step: &ChemotaxisState,
    predicted: &ParticleCloud,
    horizon: f64,
    params: &ChemotaxisParams,
) -> Result<ChemotaxisState> {
    check_aligned(pre_step.cells.len(), predicted)?;
    let cells = pre_step
        .cells
        .iter()
        .zip(predicted.coords())
        .map(|(old, &x)| {
            let du2 = (params.signal(old.x) - old.u2) / params.t_a;
            Bacterium {
                x,
                u1: 0.0,
                u2: old.u2 + horizon * du2,
                flagella: old.flagella,
                heading: old.heading,
            }
        })
        .collect();
    Ok(ChemotaxisState { cells })
}

/// Position-only re-initialisation: `u1 = 0`, `u2` adapted to the signal
/// at the predicted position, all flagella clockwise, random heading.
pub fn reinit_history_independent(
    predicted: &ParticleCloud,
    params: &ChemotaxisParams,
    rngs: &mut ParticleRngs,
) -> Result<ChemotaxisState> {
    check_aligned(rngs.len(), predicted)?;
    let cells = predicted
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &x)| Bacterium {
            x,
            u1: 0.0,
            u2: params.signal(x),
            flagella: 0,
            heading: random_heading(rngs.get_mut(i)),
        })
        .collect();
    Ok(ChemotaxisState { cells })
}

#[derive(Debug)]
pub struct Chemotaxis {
    params: ChemotaxisParams,
    clamps: AtomicU64,
}

impl Chemotaxis {
    pub fn new(params: ChemotaxisParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            clamps: AtomicU64::new(0),
        })
    }

    pub fn params(&self) -> &ChemotaxisParams {
        &self.params
    }
}

impl MicroSim for Chemotaxis {
    type State = ChemotaxisState;

    fn dt(&self) -> f64 {
        self.params.dt
    }

    fn dim(&self) -> usize {
        1
    }

    fn n_particles(&self) -> usize {
        self.params.n
    }

    fn bounds(&self) -> Bounds {
        self.params.bounds
    }

    /// Adapted bacteria (`u1 = 0`, `u2 = l(x)`) with flagella drawn from
    /// the unbiased stationary distribution.
    fn initial_state(&self, rngs: &mut ParticleRngs) -> Result<ChemotaxisState> {
        let p = &self.params;
        let xs = p.init.sample(p.n, 1, rngs)?;
        let cells = xs
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                let rng = rngs.get_mut(i);
                let x = p.bounds.reflect(x).0;
                Bacterium {
                    x,
                    u1: 0.0,
                    u2: p.signal(x),
                    flagella: rng.random::<u8>() & 0b11_1111,
                    heading: random_heading(rng),
                }
            })
            .collect();
        Ok(ChemotaxisState { cells })
    }

    fn step(&self, state: &mut ChemotaxisState, rngs: &mut ParticleRngs) {
        let c = chemotaxis_step(&self.params, state, rngs);
        if c > 0 {
            self.clamps.fetch_add(c, Ordering::Relaxed);
        }
    }

    fn positions(&self, state: &ChemotaxisState) -> ParticleCloud {
        let xs: Vec<f64> = state.cells.iter().map(|c| c.x).collect();
        ParticleCloud::from_flat(1, xs).expect("bacteria positions are finite")
    }

    fn reinit(
        &self,
        pre_push: &ChemotaxisState,
        predicted: &ParticleCloud,
        policy: ReinitPolicy,
        horizon: f64,
        rngs: &mut ParticleRngs,
    ) -> Result<ChemotaxisState> {
        match policy {
            ReinitPolicy::HistoryDependent => {
                reinit_history_dependent(pre_push, predicted, horizon, &self.params)
            }
            ReinitPolicy::HistoryIndependent => {
                reinit_history_independent(predicted, &self.params, rngs)
            }
            ReinitPolicy::None => Err(Error::config(
                "reinit",
                "chemotaxis needs history_dependent or history_independent",
            )),
        }
    }

    fn clamp_events(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }
}
