//! Projective integration: short micro-simulation bursts estimate a tangent
//! field, an Euler push jumps ahead, and the micro model recovers.
//!
//! Time is tracked in integer ticks of the micro step `h`, so the clock
//! never drifts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{ParticleCloud, ParticleRngs};
use crate::micro::{Bounds, MicroSim, ReinitPolicy};
use crate::tangent::{averaged_centered_field, check_aligned, particlewise_field, VelocityField};

/// Relative slack when checking that a duration is a multiple of `h`.
const TICK_TOLERANCE: f64 = 1e-9;

/// Converts a duration into a whole number of micro steps.
pub fn to_ticks(key: &str, value: f64, h: f64) -> Result<u64> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::config(
            key,
            format!("must be a nonnegative duration, got {value}"),
        ));
    }
    let ticks = (value / h).round();
    if (ticks * h - value).abs() > TICK_TOLERANCE * value.abs().max(h) {
        return Err(Error::config(
            key,
            format!("{value} is not a multiple of micro_dt = {h}"),
        ));
    }
    Ok(ticks as u64)
}

/// Projective-integration parameters, stored in micro steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    h: f64,
    k: usize,
    startup: u64,
    jump: u64,
    recovery: u64,
    n_steps: usize,
    final_recovery: u64,
}

impl Schedule {
    /// Durations `s`, `big_h`, `h_r` and `r` are in seconds and must be
    /// multiples of `h`.
    pub fn new(h: f64, k: usize, s: f64, big_h: f64, h_r: f64, n_t: usize, r: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::config("micro_dt", "must be positive"));
        }
        if k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        Ok(Self {
            h,
            k,
            startup: to_ticks("S", s, h)?,
            jump: to_ticks("H", big_h, h)?,
            recovery: to_ticks("H_R", h_r, h)?,
            n_steps: n_t,
            final_recovery: to_ticks("R", r, h)?,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s(&self) -> f64 {
        self.startup as f64 * self.h
    }

    pub fn big_h(&self) -> f64 {
        self.jump as f64 * self.h
    }

    pub fn h_r(&self) -> f64 {
        self.recovery as f64 * self.h
    }

    pub fn n_t(&self) -> usize {
        self.n_steps
    }

    pub fn r(&self) -> f64 {
        self.final_recovery as f64 * self.h
    }

    /// Half-width of the derivative window, `k h`.
    pub fn h_s(&self) -> f64 {
        self.k as f64 * self.h
    }

    /// Time between consecutive pushes, `H_S + H + H_R`.
    pub fn delta(&self) -> f64 {
        self.delta_ticks() as f64 * self.h
    }

    fn delta_ticks(&self) -> u64 {
        self.k as u64 + self.jump + self.recovery
    }

    fn total_ticks(&self) -> u64 {
        self.startup + self.n_steps as u64 * self.delta_ticks() + self.final_recovery
    }

    /// Simulated end time `S + N_T Delta + R`.
    pub fn total_time(&self) -> f64 {
        self.total_ticks() as f64 * self.h
    }

    /// Micro steps executed by a projective run:
    /// `S/h + N_T (2k + 1 + H_R/h) + R/h`.
    pub fn micro_steps(&self) -> u64 {
        self.startup
            + self.n_steps as u64 * (2 * self.k as u64 + 1 + self.recovery)
            + self.final_recovery
    }
}

/// How the tangent field is estimated from a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldMode {
    Ot,
    Particlewise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Startup,
    Window,
    Push,
    Recover,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Time at which the event starts.
    pub t: f64,
    pub kind: EventKind,
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    PostPush,
    PostRecovery,
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    pub kind: CheckpointKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub cloud: ParticleCloud,
}

/// Everything a run produced. Snapshot times are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub micro_dt: f64,
    pub snapshots: Vec<Snapshot>,
    pub checkpoints: Vec<Checkpoint>,
    pub events: Vec<Event>,
    pub micro_steps_used: u64,
    pub clamp_events: u64,
}

impl RunRecord {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&ParticleCloud> {
        self.snapshots
            .iter()
            .find(|s| same_time(s.t, t))
            .map(|s| &s.cloud)
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("a run records at least its start")
    }

    pub fn checkpoint_times(&self, kind: CheckpointKind) -> Vec<f64> {
        self.checkpoints
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.t)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.snapshots[0].cloud.dim()
    }
}

pub(crate) fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= TICK_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// `x_i + H v_i`, folded back into `bounds`.
pub fn euler_push(
    cloud: &ParticleCloud,
    field: &VelocityField,
    big_h: f64,
    bounds: &Bounds,
) -> Result<ParticleCloud> {
    check_aligned(cloud, field)?;
    if !(big_h >= 0.0 && big_h.is_finite()) {
        return Err(Error::NonPositiveStep(big_h));
    }
    let xs = cloud
        .coords()
        .iter()
        .zip(field.vectors())
        .map(|(x, v)| bounds.reflect(x + big_h * v).0)
        .collect();
    ParticleCloud::from_flat(cloud.dim(), xs)
}

struct Runner<'a, M: MicroSim> {
    sim: &'a M,
    state: M::State,
    rngs: ParticleRngs,
    tick: u64,
    stride: u64,
    record: RunRecord,
}

impl<'a, M: MicroSim> Runner<'a, M> {
    fn start(sim: &'a M, seed: u64, stride: u64) -> Result<Self> {
        let mut rngs = ParticleRngs::new(seed, sim.n_particles());
        let state = sim.initial_state(&mut rngs)?;
        let mut runner = Self {
            sim,
            state,
            rngs,
            tick: 0,
            stride,
            record: RunRecord {
                seed,
                micro_dt: sim.dt(),
                snapshots: Vec::new(),
                checkpoints: Vec::new(),
                events: Vec::new(),
                micro_steps_used: 0,
                clamp_events: 0,
            },
        };
        runner.save();
        Ok(runner)
    }

    fn time(&self) -> f64 {
        self.tick as f64 * self.sim.dt()
    }

    fn save(&mut self) {
        let t = self.time();
        if self
            .record
            .snapshots
            .last()
            .is_some_and(|s| same_time(s.t, t))
        {
            return;
        }
        let cloud = self.sim.positions(&self.state);
        self.record.snapshots.push(Snapshot { t, cloud });
    }

    fn checkpoint(&mut self, kind: CheckpointKind) {
        self.save();
        let t = self.time();
        self.record.checkpoints.push(Checkpoint { t, kind });
    }

    fn event(&mut self, kind: EventKind, steps: u64) {
        let t = self.time();
        self.record.events.push(Event { t, kind, steps });
        self.record.micro_steps_used += steps;
    }

    fn step(&mut self) {
        self.sim.step(&mut self.state, &mut self.rngs);
        self.tick += 1;
    }

    /// Steps along the recorded trajectory, saving at stride multiples.
    fn advance(&mut self, kind: EventKind, steps: u64) {
        self.event(kind, steps);
        for _ in 0..steps {
            self.step();
            if self.tick.is_multiple_of(self.stride) {
                self.save();
            }
        }
    }

    fn finish(mut self) -> RunRecord {
        self.checkpoint(CheckpointKind::End);
        self.record.clamp_events = self.sim.clamp_events();
        self.record
    }
}

fn stride_ticks(stride: f64, h: f64) -> Result<u64> {
    let ticks = to_ticks("stride", stride, h)?;
    if ticks == 0 {
        return Err(Error::config("stride", "must be at least one micro step"));
    }
    Ok(ticks)
}

/// Plain micro simulation to time `t_end`, recording every `stride`
/// seconds plus the final state.
pub fn run_control<M: MicroSim>(sim: &M, t_end: f64, stride: f64, seed: u64) -> Result<RunRecord> {
    let h = sim.dt();
    let steps = to_ticks("T", t_end, h)?;
    let mut runner = Runner::start(sim, seed, stride_ticks(stride, h)?)?;
    runner.advance(EventKind::Startup, steps);
    Ok(runner.finish())
}

/// Projective integration with the given schedule.
///
/// Each of the `N_T` cycles takes `2k + 1` micro steps from the window
/// start `S + r Delta`; the states after steps `0..=2k` form the window
/// centered at `t0 = S + r Delta + H_S` and the last step leaves the
/// window. The field at `t0` pushes the center cloud to `t0 + H`, the
/// micro state is rebuilt there and recovers for `H_R`. Window states
/// after `t0` are off the predicted trajectory and are not recorded.
pub fn run_projective<M: MicroSim>(
    sim: &M,
    sched: &Schedule,
    mode: FieldMode,
    policy: ReinitPolicy,
    stride: f64,
    seed: u64,
) -> Result<RunRecord> {
    let h = sim.dt();
    if !same_time(h, sched.h()) {
        return Err(Error::ScheduleOverrun(format!(
            "schedule step {} differs from the simulator step {h}",
            sched.h()
        )));
    }
    let k = sched.k();
    let mut runner = Runner::start(sim, seed, stride_ticks(stride, h)?)?;
    runner.advance(EventKind::Startup, sched.startup);

    for _ in 0..sched.n_t() {
        let window_start = runner.tick;
        runner.event(EventKind::Window, 2 * k as u64 + 1);
        let mut clouds = Vec::with_capacity(2 * k + 1);
        clouds.push(sim.positions(&runner.state));
        let mut center_state = None;
        for j in 1..=2 * k + 1 {
            runner.step();
            if j <= k && runner.tick % runner.stride == 0 {
                runner.save();
            }
            if j == k {
                center_state = Some(runner.state.clone());
            }
            if j <= 2 * k {
                clouds.push(sim.positions(&runner.state));
            }
        }
        let center_state = center_state.expect("k >= 1");
        let center = clouds.remove(k);
        let t0_tick = window_start + k as u64;
        let t0 = t0_tick as f64 * h;
        let field = match mode {
            FieldMode::Ot => averaged_centered_field(&center, &clouds, h, k)?,
            FieldMode::Particlewise => particlewise_field(&center, &clouds, h, k)?,
        }
        .at_time(t0);
        if !same_time(field.reference_time(), t0) {
            return Err(Error::ScheduleOverrun(
                "field and center cloud disagree in time".into(),
            ));
        }

        runner.tick = t0_tick;
        runner.event(EventKind::Push, 0);
        let predicted = euler_push(&center, &field, sched.big_h(), &sim.bounds())?;
        runner.state = sim.reinit(
            &center_state,
            &predicted,
            policy,
            sched.big_h(),
            &mut runner.rngs,
        )?;
        runner.tick = t0_tick + sched.jump;
        runner.checkpoint(CheckpointKind::PostPush);

        runner.advance(EventKind::Recover, sched.recovery);
        runner.checkpoint(CheckpointKind::PostRecovery);
    }
    if sched.final_recovery > 0 {
        runner.advance(EventKind::Recover, sched.final_recovery);
    }
    debug_assert_eq!(runner.tick, sched.total_ticks());
    Ok(runner.finish())
}
