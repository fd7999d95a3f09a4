//! Experiment configuration: a flat TOML file with an optional
//! `[schedule]` table.
//!
//! ```toml
//! model = "diffusion1d"
//! n_particles = 2000
//! micro_dt = 0.0625
//! v_c = 0.125
//! bounds = [0.0, 10.0]
//! init_point = [5.0]
//! seed = 1
//! mode = "ot"
//! stride = 10.0
//! out = "runs/diffusion1d_ot"
//!
//! [schedule]
//! S = 30.0
//! k = 80
//! H = 85.0
//! H_R = 30.0
//! N_T = 16
//! R = 50.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::micro::{
    Bounds, Chemotaxis, ChemotaxisParams, Diffusion, DiffusionParams, InitialCondition,
    ReinitPolicy,
};
use crate::scheduler::{run_control, run_projective, to_ticks, FieldMode, RunRecord, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Diffusion1d,
    Diffusion2d,
    Chemotaxis,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::Diffusion2d => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Control,
    Ot,
    Particlewise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(rename = "S")]
    pub s: f64,
    pub k: usize,
    #[serde(rename = "H")]
    pub big_h: f64,
    #[serde(rename = "H_R")]
    pub h_r: f64,
    #[serde(rename = "N_T")]
    pub n_t: usize,
    #[serde(rename = "R")]
    pub r: f64,
}

fn default_bounds() -> [f64; 2] {
    [0.0, 10.0]
}
fn default_chemo_mean() -> f64 {
    6.5
}
fn default_chemo_sd() -> f64 {
    1.35
}
fn default_t_e() -> f64 {
    0.1
}
fn default_t_a() -> f64 {
    10.0
}
fn default_lambda0() -> f64 {
    1.0
}
fn default_gain() -> f64 {
    2.0
}
fn default_beta() -> f64 {
    1.0
}
fn default_reinit() -> ReinitPolicy {
    ReinitPolicy::None
}
fn default_out() -> String {
    "run".into()
}

/// One experiment. Every field is written back to `run.json`, so a run
/// can be repeated from its own output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n_particles: usize,
    pub micro_dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_cell: Option<f64>,
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 2],
    /// Every particle starts here; defaults to the box center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_point: Option<Vec<f64>>,
    /// Independent uniform start on `[lo, hi]` per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_uniform: Option<[f64; 2]>,
    #[serde(default = "default_chemo_mean")]
    pub chemo_mean: f64,
    #[serde(default = "default_chemo_sd")]
    pub chemo_sd: f64,
    #[serde(default = "default_t_e")]
    pub t_e: f64,
    #[serde(default = "default_t_a")]
    pub t_a: f64,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    pub mode: Mode,
    #[serde(default = "default_reinit")]
    pub reinit: ReinitPolicy,
    /// Snapshot spacing in seconds.
    pub stride: f64,
    #[serde(default = "default_out")]
    pub out: String,
    /// End time of a control run; defaults to the schedule's end time.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
}

/// A validated simulator.
pub enum Simulator {
    Diffusion(Diffusion),
    Chemotaxis(Chemotaxis),
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` entry of a `run.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
            let cfg = v
                .get("config")
                .ok_or_else(|| Error::config("config", "run.json has no config entry"))?;
            let cfg: Self =
                serde_json::from_value(cfg.clone()).map_err(|e| Error::Parse(e.to_string()))?;
            cfg.validate()?;
            Ok(cfg)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn positive(key: &str, value: f64) -> Result<()> {
        if value > 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(Error::config(key, format!("must be positive, got {value}")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::config("n_particles", "must be at least 1"));
        }
        Self::positive("micro_dt", self.micro_dt)?;
        Bounds::new(self.bounds[0], self.bounds[1])?;
        match self.model {
            ModelKind::Diffusion1d | ModelKind::Diffusion2d => {
                Self::positive(
                    "v_c",
                    self.v_c
                        .ok_or_else(|| Error::config("v_c", "required for diffusion"))?,
                )?;
                if self.v_cell.is_some() {
                    return Err(Error::config("v_cell", "only used by the chemotaxis model"));
                }
            }
            ModelKind::Chemotaxis => {
                Self::positive(
                    "v_cell",
                    self.v_cell
                        .ok_or_else(|| Error::config("v_cell", "required for chemotaxis"))?,
                )?;
                if self.v_c.is_some() {
                    return Err(Error::config("v_c", "only used by the diffusion models"));
                }
            }
        }
        if self.init_point.is_some() && self.init_uniform.is_some() {
            return Err(Error::config(
                "init_uniform",
                "give either init_point or init_uniform",
            ));
        }
        if let Some(p) = &self.init_point {
            if p.len() != self.model.dim() {
                return Err(Error::config(
                    "init_point",
                    format!("needs {} coordinates", self.model.dim()),
                ));
            }
        }
        if let Some([lo, hi]) = self.init_uniform {
            if !(lo < hi && lo >= self.bounds[0] && hi <= self.bounds[1]) {
                return Err(Error::config(
                    "init_uniform",
                    "must be an interval inside bounds",
                ));
            }
        }

        let needs_reinit = self.model == ModelKind::Chemotaxis && self.mode != Mode::Control;
        match (needs_reinit, self.reinit) {
            (true, ReinitPolicy::None) => {
                return Err(Error::config(
                    "reinit",
                    "chemotaxis approximation needs history_dependent or history_independent",
                ))
            }
            (false, p) if p != ReinitPolicy::None => {
                return Err(Error::config(
                    "reinit",
                    "only chemotaxis approximation runs re-initialize internal state",
                ))
            }
            _ => {}
        }

        to_ticks("stride", self.stride, self.micro_dt)?;
        if self.stride <= 0.0 {
            return Err(Error::config("stride", "must be positive"));
        }
        let sched = self.schedule()?;
        match (self.mode, sched) {
            (Mode::Control, None) => {
                let t = self
                    .t_end
                    .ok_or_else(|| Error::config("T", "control run needs T or a schedule"))?;
                to_ticks("T", t, self.micro_dt)?;
            }
            (Mode::Control, Some(_)) => {
                if let Some(t) = self.t_end {
                    to_ticks("T", t, self.micro_dt)?;
                }
            }
            (_, None) => {
                return Err(Error::config(
                    "schedule",
                    "approximation runs need a [schedule] table",
                ))
            }
            (_, Some(s)) => {
                if self
                    .t_end
                    .is_some_and(|t| (t - s.total_time()).abs() > 1e-9 * t.max(1.0))
                {
                    return Err(Error::config(
                        "T",
                        format!("schedule ends at {}", s.total_time()),
                    ));
                }
            }
        }
        self.simulator().map(|_| ())
    }

    pub fn schedule(&self) -> Result<Option<Schedule>> {
        self.schedule
            .as_ref()
            .map(|s| Schedule::new(self.micro_dt, s.k, s.s, s.big_h, s.h_r, s.n_t, s.r))
            .transpose()
    }

    /// Simulated end time.
    pub fn end_time(&self) -> Result<f64> {
        match (self.t_end, self.schedule()?) {
            (Some(t), _) => Ok(t),
            (None, Some(s)) => Ok(s.total_time()),
            (None, None) => Err(Error::config("T", "no end time")),
        }
    }

    fn initial_condition(&self) -> InitialCondition {
        match (&self.init_point, self.init_uniform) {
            (Some(p), _) => InitialCondition::Point(p.clone()),
            (None, Some([lo, hi])) => InitialCondition::Uniform { lo, hi },
            (None, None) => {
                let c = 0.5 * (self.bounds[0] + self.bounds[1]);
                InitialCondition::Point(vec![c; self.model.dim()])
            }
        }
    }

    pub fn simulator(&self) -> Result<Simulator> {
        let bounds = Bounds::new(self.bounds[0], self.bounds[1])?;
        let init = self.initial_condition();
        Ok(match self.model {
            ModelKind::Diffusion1d | ModelKind::Diffusion2d => {
                Simulator::Diffusion(Diffusion::new(DiffusionParams {
                    n: self.n_particles,
                    dim: self.model.dim(),
                    v_c: self.v_c.unwrap_or(0.0),
                    dt: self.micro_dt,
                    bounds,
                    init,
                })?)
            }
            ModelKind::Chemotaxis => Simulator::Chemotaxis(Chemotaxis::new(ChemotaxisParams {
                n: self.n_particles,
                dt: self.micro_dt,
                v_cell: self.v_cell.unwrap_or(0.0),
                bounds,
                chemo_mean: self.chemo_mean,
                chemo_sd: self.chemo_sd,
                t_e: self.t_e,
                t_a: self.t_a,
                lambda0: self.lambda0,
                gain: self.gain,
                beta: self.beta,
                init,
            })?),
        })
    }

    /// Runs the experiment described by this config.
    pub fn execute(&self) -> Result<RunRecord> {
        self.validate()?;
        match self.simulator()? {
            Simulator::Diffusion(sim) => self.execute_with(&sim),
            Simulator::Chemotaxis(sim) => self.execute_with(&sim),
        }
    }

    fn execute_with<M: crate::micro::MicroSim>(&self, sim: &M) -> Result<RunRecord> {
        match self.mode {
            Mode::Control => run_control(sim, self.end_time()?, self.stride, self.seed),
            Mode::Ot | Mode::Particlewise => {
                let sched = self.schedule()?.expect("validated");
                let field = if self.mode == Mode::Ot {
                    FieldMode::Ot
                } else {
                    FieldMode::Particlewise
                };
                run_projective(sim, &sched, field, self.reinit, self.stride, self.seed)
            }
        }
    }
}
