//! Micro-scale particle simulators behind one stepping interface.

mod chemotaxis;
mod diffusion;

pub use chemotaxis::{
    chemotaxis_step, reinit_history_dependent, reinit_history_independent, Bacterium, Chemotaxis,
    ChemotaxisParams, ChemotaxisState, FLAGELLA,
};
pub use diffusion::{diffusion_step, Diffusion, DiffusionParams};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ParticleCloud, ParticleRngs};

/// Particles per parallel work item when stepping.
const PAR_CHUNK: usize = 512;

/// Reflections attempted before a coordinate is clamped.
pub const MAX_REFLECTIONS: usize = 100;

/// Axis-aligned box `[lo, hi]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(
                "bounds",
                format!("need lo < hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Mirrors `x` across the nearest violated wall until it lies inside.
    /// Returns the folded value, the number of reflections, and whether
    /// the iteration cap forced a clamp.
    pub fn reflect(&self, mut x: f64) -> (f64, usize, bool) {
        for k in 0..MAX_REFLECTIONS {
            if x > self.hi {
                x = 2.0 * self.hi - x;
            } else if x < self.lo {
                x = 2.0 * self.lo - x;
            } else {
                return (x, k, false);
            }
        }
        if self.contains(x) {
            (x, MAX_REFLECTIONS, false)
        } else {
            (x.clamp(self.lo, self.hi), MAX_REFLECTIONS, true)
        }
    }
}

/// How a simulator rebuilds its internal state after an extrapolation step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReinitPolicy {
    /// Positions only; valid for position-only models.
    None,
    HistoryDependent,
    HistoryIndependent,
}

/// Starting configuration of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// Every particle at the same point.
    Point(Vec<f64>),
    /// Independent uniform draws on `[lo, hi]` along every axis.
    Uniform { lo: f64, hi: f64 },
    /// Explicit positions.
    Positions(ParticleCloud),
}

impl InitialCondition {
    pub(crate) fn sample(&self, n: usize, dim: usize, rngs: &mut ParticleRngs) -> Result<Vec<f64>> {
        match self {
            InitialCondition::Point(p) => {
                if p.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: p.len(),
                    });
                }
                Ok(p.iter().copied().cycle().take(n * dim).collect())
            }
            InitialCondition::Uniform { lo, hi } => {
                let mut xs = Vec::with_capacity(n * dim);
                for i in 0..n {
                    let rng = rngs.get_mut(i);
                    for _ in 0..dim {
                        xs.push(rng.random_range(*lo..*hi));
                    }
                }
                Ok(xs)
            }
            InitialCondition::Positions(c) => {
                if c.dim() != dim || c.len() != n {
                    return Err(Error::Alignment(format!(
                        "initial positions are {}x{}, model expects {n}x{dim}",
                        c.len(),
                        c.dim()
                    )));
                }
                Ok(c.coords().to_vec())
            }
        }
    }
}

/// A stochastic particle simulator advanced in fixed micro steps.
///
/// `step` advances every particle by exactly `dt()` seconds and must keep
/// particle count and positions inside `bounds()`. Particle `i` draws only
/// from substream `i` of the supplied [`ParticleRngs`].
pub trait MicroSim: Sync {
    type State: Clone + Send;

    fn dt(&self) -> f64;
    fn dim(&self) -> usize;
    fn n_particles(&self) -> usize;
    fn bounds(&self) -> Bounds;

    fn initial_state(&self, rngs: &mut ParticleRngs) -> Result<Self::State>;
    fn step(&self, state: &mut Self::State, rngs: &mut ParticleRngs);
    fn positions(&self, state: &Self::State) -> ParticleCloud;

    /// Rebuilds a state at the predicted positions. `pre_push` is the
    /// micro state the prediction was extrapolated from, index-aligned
    /// with `predicted`; `horizon` is the extrapolation length.
    fn reinit(
        &self,
        pre_push: &Self::State,
        predicted: &ParticleCloud,
        policy: ReinitPolicy,
        horizon: f64,
        rngs: &mut ParticleRngs,
    ) -> Result<Self::State>;

    /// Coordinates clamped after exhausting the reflection cap.
    fn clamp_events(&self) -> u64 {
        0
    }
}
