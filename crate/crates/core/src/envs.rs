//! Toy control tasks with known ground-truth rewards.
//!
//! The reward of a step is a function of the state the action was taken in
//! and of the action, so a segment's true return lines up with its
//! `(state, action)` rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Segment;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
    /// Episode length `T`.
    pub horizon: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

pub const POINT_MASS_DT: f64 = 0.05;
pub const POINT_MASS_DAMPING: f64 = 0.95;
pub const POINT_MASS_LIMIT: f64 = 2.0;

/// Damped double integrator in the plane; the goal is the origin.
#[derive(Clone, Debug, Default)]
pub struct PointMassReach {
    pos: [f64; 2],
    vel: [f64; 2],
    t: usize,
}

impl PointMassReach {
    pub const SPEC: EnvSpec = EnvSpec {
        name: "point_mass_reach",
        state_dim: 4,
        action_dim: 2,
        action_low: -1.0,
        action_high: 1.0,
        horizon: 100,
    };

    pub fn reward(state: &[f64]) -> f64 {
        (-(state[0] * state[0] + state[1] * state[1])).exp()
    }

    /// Places the mass at `pos` with velocity `vel`.
    pub fn set_state(&mut self, pos: [f64; 2], vel: [f64; 2]) {
        self.pos = pos;
        self.vel = vel;
        self.t = 0;
    }

    fn state(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }

    fn advance(&mut self, a: &[f64]) {
        for i in 0..2 {
            self.vel[i] = POINT_MASS_DAMPING * self.vel[i] + POINT_MASS_DT * a[i];
            self.pos[i] = (self.pos[i] + POINT_MASS_DT * self.vel[i]).clamp(-POINT_MASS_LIMIT, POINT_MASS_LIMIT);
        }
    }
}

pub const PENDULUM_DT: f64 = 0.05;
pub const PENDULUM_GRAVITY: f64 = 10.0;
pub const PENDULUM_MAX_TORQUE: f64 = 2.0;
pub const PENDULUM_MAX_SPEED: f64 = 8.0;

/// Unit-length, unit-mass pendulum; `theta = 0` is upright and every episode
/// starts hanging at rest.
#[derive(Clone, Debug)]
pub struct PendulumSwingUp {
    theta: f64,
    omega: f64,
    t: usize,
}

impl Default for PendulumSwingUp {
    fn default() -> Self {
        PendulumSwingUp {
            theta: std::f64::consts::PI,
            omega: 0.0,
            t: 0,
        }
    }
}

impl PendulumSwingUp {
    pub const SPEC: EnvSpec = EnvSpec {
        name: "pendulum_swing_up",
        state_dim: 3,
        action_dim: 1,
        action_low: -1.0,
        action_high: 1.0,
        horizon: 200,
    };

    pub fn reward(state: &[f64], action: &[f64]) -> f64 {
        (1.0 + state[0]) / 2.0 - 0.01 * state[2] * state[2] - 0.001 * action[0] * action[0]
    }

    pub fn set_state(&mut self, theta: f64, omega: f64) {
        self.theta = theta;
        self.omega = omega;
        self.t = 0;
    }

    fn state(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.omega]
    }

    /// Semi-implicit Euler with the angle wrapped to `[-pi, pi)`.
    fn advance(&mut self, a: &[f64]) {
        let accel = PENDULUM_GRAVITY * self.theta.sin() + PENDULUM_MAX_TORQUE * a[0];
        self.omega = (self.omega + PENDULUM_DT * accel).clamp(-PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED);
        let th = self.theta + PENDULUM_DT * self.omega;
        self.theta = th - std::f64::consts::TAU * ((th + std::f64::consts::PI) / std::f64::consts::TAU).floor();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    PointMassReach,
    PendulumSwingUp,
}

impl EnvKind {
    pub fn spec(self) -> EnvSpec {
        match self {
            EnvKind::PointMassReach => PointMassReach::SPEC,
            EnvKind::PendulumSwingUp => PendulumSwingUp::SPEC,
        }
    }

    pub fn name(self) -> &'static str {
        self.spec().name
    }

    pub fn make(self) -> Env {
        match self {
            EnvKind::PointMassReach => Env::PointMass(PointMassReach::default()),
            EnvKind::PendulumSwingUp => Env::Pendulum(PendulumSwingUp::default()),
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point_mass_reach" | "PointMassReach" => Ok(EnvKind::PointMassReach),
            "pendulum_swing_up" | "PendulumSwingUp" => Ok(EnvKind::PendulumSwingUp),
            other => Err(Error::Config(format!("unknown environment {other:?}"))),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub enum Env {
    PointMass(PointMassReach),
    Pendulum(PendulumSwingUp),
}

impl Env {
    pub fn kind(&self) -> EnvKind {
        match self {
            Env::PointMass(_) => EnvKind::PointMassReach,
            Env::Pendulum(_) => EnvKind::PendulumSwingUp,
        }
    }

    pub fn spec(&self) -> EnvSpec {
        self.kind().spec()
    }

    pub fn time(&self) -> usize {
        match self {
            Env::PointMass(e) => e.t,
            Env::Pendulum(e) => e.t,
        }
    }

    pub fn state(&self) -> Vec<f64> {
        match self {
            Env::PointMass(e) => e.state(),
            Env::Pendulum(e) => e.state(),
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<f64> {
        match self {
            Env::PointMass(e) => {
                let pos = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
                e.set_state(pos, [0.0, 0.0]);
            }
            Env::Pendulum(e) => *e = PendulumSwingUp::default(),
        }
        self.state()
    }

    /// Clips `action` to the bounds, advances one step and returns the reward
    /// of the pre-step state and clipped action.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        let spec = self.spec();
        if action.len() != spec.action_dim {
            return Err(Error::dim(format!(
                "{} expects {} action values, got {}",
                spec.name,
                spec.action_dim,
                action.len()
            )));
        }
        if self.time() >= spec.horizon {
            return Err(Error::contract("episode finished; call reset"));
        }
        let a: Vec<f64> = action
            .iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(spec.action_low, spec.action_high) })
            .collect();
        let s = self.state();
        let (reward, t) = match self {
            Env::PointMass(e) => {
                let r = PointMassReach::reward(&s);
                e.advance(&a);
                e.t += 1;
                (r, e.t)
            }
            Env::Pendulum(e) => {
                let r = PendulumSwingUp::reward(&s, &a);
                e.advance(&a);
                e.t += 1;
                (r, e.t)
            }
        };
        Ok(StepOutcome {
            next_state: self.state(),
            reward,
            done: t >= spec.horizon,
        })
    }
}

/// Drawable 2-D coordinates, one per segment step. Pendulum bob positions
/// use screen orientation (y grows downward), so upright is `(0, -1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<[f64; 2]>,
}

pub fn render_trajectory(kind: EnvKind, seg: &Segment) -> Result<Trajectory> {
    let spec = kind.spec();
    if seg.state_dim() != spec.state_dim || seg.action_dim() != spec.action_dim {
        return Err(Error::dim(format!(
            "segment with dims {}/{} does not come from {}",
            seg.state_dim(),
            seg.action_dim(),
            spec.name
        )));
    }
    let points = (0..seg.len())
        .map(|t| {
            let s = seg.state(t);
            match kind {
                EnvKind::PointMassReach => [s[0], s[1]],
                EnvKind::PendulumSwingUp => {
                    let norm = s[0].hypot(s[1]);
                    [s[1] / norm, -s[0] / norm]
                }
            }
        })
        .collect();
    Ok(Trajectory { points })
}
