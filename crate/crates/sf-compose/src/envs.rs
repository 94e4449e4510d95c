//! Batch-vectorized Pointmass (2D/3D) and planar Pointer environments.
//!
//! Both environments share the relative state representation of
//! [`RobotState`]: position, velocity, orientation and angular velocity of
//! the robot relative to the goal. Rewards are always `r_w = φᵀw` with the
//! feature vector φ defined by a [`FeatureSetSpec`].
//!
//! Dynamics (all explicit Euler, velocity first):
//!
//! - Pointmass: unit-mass double integrator, per-axis force `a·max_force`.
//! - Pointer (planar): heading driven by a yaw-rate command, nonnegative
//!   thrust along the heading, linear drag to bound speeds.
//!
//! Episodes have a fixed horizon; there is no early termination on success,
//! so returns stay comparable across agents. Positions are clamped to the
//! arena box and the velocity component into a wall is zeroed on contact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance threshold for the binary success feature (meters).
pub const SUCCESS_RADIUS: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pointmass2d,
    Pointmass3d,
    Pointer,
}

impl EnvKind {
    /// Spatial dimensions of position/velocity.
    pub fn spatial_dims(self) -> usize {
        match self {
            EnvKind::Pointmass2d => 2,
            EnvKind::Pointmass3d => 3,
            EnvKind::Pointer => 2,
        }
    }

    pub fn action_dim(self) -> usize {
        match self {
            EnvKind::Pointmass2d => 2,
            EnvKind::Pointmass3d => 3,
            EnvKind::Pointer => 2, // (thrust, yaw rate)
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pointmass2d => "pointmass2d",
            EnvKind::Pointmass3d => "pointmass3d",
            EnvKind::Pointer => "pointer",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Regular,
    Simple,
    Augment,
}

/// Resolved feature layout for one environment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureSetSpec {
    pub kind: EnvKind,
    pub set: FeatureSet,
}

/// What one feature component measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureDescriptor {
    /// −|ΔX_axis| for one position axis.
    PosAxisAbs(usize),
    /// −‖ΔX‖₂.
    PosNorm,
    /// −|ΔV_axis| for one velocity axis.
    VelAxisAbs(usize),
    /// −‖ΔV‖₂.
    VelNorm,
    /// −‖ΔΘ‖₂ (planar: −|Δθ|).
    OrientNorm,
    /// −‖ΔΩ‖₂ (planar: −|Δω|).
    AngVelNorm,
    /// 1 if ‖ΔX‖₂ < 1 else 0.
    Success,
}

impl FeatureSetSpec {
    pub fn new(kind: EnvKind, set: FeatureSet) -> Result<Self> {
        if kind == EnvKind::Pointer && set != FeatureSet::Regular {
            return Err(Error::config(
                "pointer only defines the regular feature set",
            ));
        }
        Ok(FeatureSetSpec { kind, set })
    }

    /// Fixed feature order; gating and task weights index into this.
    pub fn descriptors(&self) -> Vec<FeatureDescriptor> {
        use FeatureDescriptor::*;
        let nx = self.kind.spatial_dims();
        match (self.kind, self.set) {
            (EnvKind::Pointer, _) => vec![PosNorm, VelNorm, OrientNorm, AngVelNorm, Success],
            (_, FeatureSet::Regular) => {
                let mut d: Vec<_> = (0..nx).map(PosAxisAbs).collect();
                d.push(VelNorm);
                d.push(Success);
                d
            }
            (_, FeatureSet::Simple) => (0..nx).map(PosAxisAbs).collect(),
            (_, FeatureSet::Augment) => {
                let mut d: Vec<_> = (0..nx).map(PosAxisAbs).collect();
                d.push(PosNorm);
                d.extend((0..nx).map(VelAxisAbs));
                d.push(VelNorm);
                d.push(Success);
                d
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.descriptors().len()
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors()
            .iter()
            .map(|d| match d {
                FeatureDescriptor::PosAxisAbs(a) => format!("neg_abs_dx{a}"),
                FeatureDescriptor::PosNorm => "neg_norm_dx".into(),
                FeatureDescriptor::VelAxisAbs(a) => format!("neg_abs_dv{a}"),
                FeatureDescriptor::VelNorm => "neg_norm_dv".into(),
                FeatureDescriptor::OrientNorm => "neg_norm_dtheta".into(),
                FeatureDescriptor::AngVelNorm => "neg_norm_domega".into(),
                FeatureDescriptor::Success => "success".into(),
            })
            .collect()
    }
}

/// Relative state of one environment instance.
#[derive(Clone, Debug, Default)]
pub struct RobotState {
    /// ΔX = X_robot − X_goal.
    pub rel_pos: Vec<f32>,
    /// ΔV = V_robot − V_target.
    pub rel_vel: Vec<f32>,
    /// ΔΘ; planar environments use one component.
    pub rel_orient: Vec<f32>,
    /// ΔΩ; planar environments use one component.
    pub rel_ang_vel: Vec<f32>,
}

impl RobotState {
    pub fn distance(&self) -> f32 {
        self.rel_pos.iter().map(|v| v * v).sum::<f32>().sqrt()
    }

    pub fn speed_error(&self) -> f32 {
        self.rel_vel.iter().map(|v| v * v).sum::<f32>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub feature_set: FeatureSet,
    /// Integration step (s).
    pub dt: f64,
    /// Fixed episode horizon in steps.
    pub episode_steps: usize,
    pub mass: f64,
    /// Pointmass force scale (N).
    pub max_force: f64,
    /// Pointer thrust scale (N).
    pub max_thrust: f64,
    /// Pointer yaw-rate scale (rad/s).
    pub max_yaw_rate: f64,
    /// Goal/initial-position sampling box half-extent (m).
    pub arena_half_extent: f64,
    /// Magnitude of the per-episode target velocity (m/s), along +x.
    pub target_speed: f64,
    /// Pointer linear drag coefficient (1/s).
    pub drag: f64,
    pub batch: usize,
    pub seed: u64,
}

impl EnvConfig {
    pub fn defaults(kind: EnvKind) -> Self {
        EnvConfig {
            kind,
            feature_set: FeatureSet::Regular,
            dt: 0.05,
            episode_steps: 500,
            mass: 1.0,
            max_force: 10.0,
            max_thrust: 15.0,
            max_yaw_rate: 2.0,
            arena_half_extent: 20.0,
            target_speed: 2.0,
            drag: 0.1,
            batch: 1,
            seed: 0,
        }
    }

    pub fn feature_spec(&self) -> Result<FeatureSetSpec> {
        FeatureSetSpec::new(self.kind, self.feature_set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(Error::config("env.dt must be > 0"));
        }
        if self.batch < 1 {
            return Err(Error::config("env.batch must be >= 1"));
        }
        if self.episode_steps == 0 {
            return Err(Error::config("env.episode_steps must be > 0"));
        }
        self.feature_spec().map(|_| ())
    }

    /// Upper bounds on each feature's magnitude, derived from the arena
    /// geometry and actuator limits; conditions the SF critics' output range.
    pub fn feature_value_bounds(&self) -> Result<Vec<f64>> {
        let spec = self.feature_spec()?;
        let nx = self.kind.spatial_dims() as f64;
        let pos = 2.0 * self.arena_half_extent;
        let accel = match self.kind {
            EnvKind::Pointer => self.max_thrust / self.mass,
            _ => self.max_force / self.mass,
        };
        // Top speed reachable inside the arena, plus the target offset.
        let vel = (2.0 * accel * 2.0 * pos).sqrt() + self.target_speed;
        Ok(spec
            .descriptors()
            .iter()
            .map(|d| match d {
                FeatureDescriptor::PosAxisAbs(_) => pos,
                FeatureDescriptor::PosNorm => pos * nx.sqrt(),
                FeatureDescriptor::VelAxisAbs(_) | FeatureDescriptor::VelNorm => vel,
                FeatureDescriptor::OrientNorm => std::f64::consts::PI,
                FeatureDescriptor::AngVelNorm => self.max_yaw_rate,
                FeatureDescriptor::Success => 1.0,
            })
            .collect())
    }

    /// Observation width fed to the networks.
    pub fn obs_dim(&self) -> usize {
        let nx = self.kind.spatial_dims();
        match self.kind {
            EnvKind::Pointer => 2 * nx + 2,
            _ => 2 * nx,
        }
    }
}

/// Outcome of one synchronized batch step.
pub struct StepOutcome {
    /// Features of each transition, row-major `(batch, d)`, evaluated on the
    /// next state.
    pub features: Vec<f32>,
    /// Distance to goal per instance after the step (read before any
    /// horizon reset).
    pub distances: Vec<f32>,
    /// True when the fixed horizon was reached; the batch auto-resets after
    /// this step is reported.
    pub episode_done: bool,
}

/// A batch of independent environment instances stepped in lockstep, one RNG
/// stream per instance. Instance `i` of a batch seeded with `s` evolves
/// bit-identically to a single-instance batch seeded with `s + i`.
pub struct EnvBatch {
    pub cfg: EnvConfig,
    spec: FeatureSetSpec,
    nx: usize,
    pos: Vec<f32>,
    goal: Vec<f32>,
    vel: Vec<f32>,
    v_target: Vec<f32>,
    heading: Vec<f32>,
    yaw_rate: Vec<f32>,
    step_in_episode: usize,
    rngs: Vec<ChaCha8Rng>,
}

impl EnvBatch {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.feature_spec()?;
        let nx = cfg.kind.spatial_dims();
        let b = cfg.batch;
        let rngs = (0..b)
            .map(|i| ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64)))
            .collect();
        let mut env = EnvBatch {
            cfg,
            spec,
            nx,
            pos: vec![0.0; b * nx],
            goal: vec![0.0; b * nx],
            vel: vec![0.0; b * nx],
            v_target: vec![0.0; b * nx],
            heading: vec![0.0; b],
            yaw_rate: vec![0.0; b],
            step_in_episode: 0,
            rngs,
        };
        env.reset_all();
        Ok(env)
    }

    pub fn batch(&self) -> usize {
        self.cfg.batch
    }

    pub fn feature_dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn feature_spec(&self) -> FeatureSetSpec {
        self.spec
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.kind.action_dim()
    }

    pub fn step_in_episode(&self) -> usize {
        self.step_in_episode
    }

    /// Samples fresh goals and initial positions uniformly in the arena box;
    /// velocities start at zero. Deterministic per instance seed.
    pub fn reset_all(&mut self) {
        let half = self.cfg.arena_half_extent;
        for i in 0..self.cfg.batch {
            let rng = &mut self.rngs[i];
            for a in 0..self.nx {
                self.pos[i * self.nx + a] = rng.gen_range(-half..half) as f32;
            }
            for a in 0..self.nx {
                self.goal[i * self.nx + a] = rng.gen_range(-half..half) as f32;
            }
            for a in 0..self.nx {
                self.vel[i * self.nx + a] = 0.0;
                self.v_target[i * self.nx + a] = 0.0;
            }
            self.v_target[i * self.nx] = self.cfg.target_speed as f32;
            if self.cfg.kind == EnvKind::Pointer {
                self.heading[i] = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) as f32;
                self.yaw_rate[i] = 0.0;
            }
        }
        self.step_in_episode = 0;
    }

    /// Steps every instance with its action row. Actions are in (−1,1)^|A|;
    /// non-finite actions are an error naming the instance.
    pub fn step(&mut self, actions: &[f32]) -> Result<StepOutcome> {
        let adim = self.action_dim();
        assert_eq!(
            actions.len(),
            self.cfg.batch * adim,
            "action buffer length {} does not match batch {} x action_dim {adim}",
            actions.len(),
            self.cfg.batch
        );
        for (idx, a) in actions.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite action in env instance {}",
                    idx / adim
                )));
            }
        }

        match self.cfg.kind {
            EnvKind::Pointmass2d | EnvKind::Pointmass3d => self.step_pointmass(actions),
            EnvKind::Pointer => self.step_pointer(actions),
        }

        self.step_in_episode += 1;
        let features = self.features_now();
        let distances = (0..self.cfg.batch).map(|i| self.distance(i)).collect();
        let episode_done = self.step_in_episode >= self.cfg.episode_steps;
        if episode_done {
            self.reset_all();
        }
        Ok(StepOutcome {
            features,
            distances,
            episode_done,
        })
    }

    /// Double integrator: `v += (a·max_force/m)·dt`, `x += v·dt`.
    fn step_pointmass(&mut self, actions: &[f32]) {
        let dt = self.cfg.dt as f32;
        let scale = (self.cfg.max_force / self.cfg.mass) as f32;
        let half = self.cfg.arena_half_extent as f32;
        let nx = self.nx;
        for i in 0..self.cfg.batch {
            for a in 0..nx {
                let j = i * nx + a;
                self.vel[j] += actions[i * nx + a] * scale * dt;
                self.pos[j] += self.vel[j] * dt;
                if self.pos[j] > half {
                    self.pos[j] = half;
                    self.vel[j] = self.vel[j].min(0.0);
                } else if self.pos[j] < -half {
                    self.pos[j] = -half;
                    self.vel[j] = self.vel[j].max(0.0);
                }
            }
        }
    }

    /// Planar unidirectional robot: yaw-rate command, nonnegative thrust
    /// along the heading, linear drag.
    fn step_pointer(&mut self, actions: &[f32]) {
        let dt = self.cfg.dt as f32;
        let half = self.cfg.arena_half_extent as f32;
        let drag = self.cfg.drag as f32;
        let inv_mass = (1.0 / self.cfg.mass) as f32;
        let max_thrust = self.cfg.max_thrust as f32;
        let max_yaw = self.cfg.max_yaw_rate as f32;
        for i in 0..self.cfg.batch {
            let a_thrust = actions[i * 2];
            let a_yaw = actions[i * 2 + 1];
            let thrust = (a_thrust + 1.0) * 0.5 * max_thrust;
            let omega = a_yaw * max_yaw;
            self.yaw_rate[i] = omega;
            self.heading[i] = wrap_angle(self.heading[i] + omega * dt);
            let (sin_h, cos_h) = self.heading[i].sin_cos();
            let accel = [thrust * inv_mass * cos_h, thrust * inv_mass * sin_h];
            for a in 0..2 {
                let j = i * 2 + a;
                self.vel[j] += (accel[a] - drag * self.vel[j]) * dt;
                self.pos[j] += self.vel[j] * dt;
                if self.pos[j] > half {
                    self.pos[j] = half;
                    self.vel[j] = self.vel[j].min(0.0);
                } else if self.pos[j] < -half {
                    self.pos[j] = -half;
                    self.vel[j] = self.vel[j].max(0.0);
                }
            }
        }
    }

    /// Relative state of instance `i`.
    pub fn state(&self, i: usize) -> RobotState {
        let nx = self.nx;
        let rel_pos: Vec<f32> = (0..nx)
            .map(|a| self.pos[i * nx + a] - self.goal[i * nx + a])
            .collect();
        let rel_vel: Vec<f32> = (0..nx)
            .map(|a| self.vel[i * nx + a] - self.v_target[i * nx + a])
            .collect();
        let (rel_orient, rel_ang_vel) = if self.cfg.kind == EnvKind::Pointer {
            // Goal orientation points at the goal.
            let to_goal_x = -rel_pos[0];
            let to_goal_y = -rel_pos[1];
            let desired = to_goal_y.atan2(to_goal_x);
            (
                vec![wrap_angle(self.heading[i] - desired)],
                vec![self.yaw_rate[i]],
            )
        } else {
            (vec![], vec![])
        };
        RobotState {
            rel_pos,
            rel_vel,
            rel_orient,
            rel_ang_vel,
        }
    }

    /// Distance to goal for instance `i`.
    pub fn distance(&self, i: usize) -> f32 {
        let nx = self.nx;
        (0..nx)
            .map(|a| {
                let d = self.pos[i * nx + a] - self.goal[i * nx + a];
                d * d
            })
            .sum::<f32>()
            .sqrt()
    }

    /// Features of all instances evaluated on the current (next) state.
    pub fn features_now(&self) -> Vec<f32> {
        let d = self.spec.dim();
        let mut out = vec![0.0f32; self.cfg.batch * d];
        for i in 0..self.cfg.batch {
            let state = self.state(i);
            compute_features(&state, &state, self.spec, &mut out[i * d..(i + 1) * d]);
        }
        out
    }

    /// Scaled observation rows fed to the networks: positions are divided by
    /// the arena half-extent, velocities by 10 m/s, angles by π and angular
    /// rates by the yaw-rate limit. Fixed constants, no data-dependent
    /// normalization.
    pub fn observations(&self) -> Vec<f32> {
        let b = self.cfg.batch;
        let odim = self.cfg.obs_dim();
        let mut out = vec![0.0f32; b * odim];
        let pos_scale = 1.0 / self.cfg.arena_half_extent as f32;
        let vel_scale = 0.1f32;
        for i in 0..b {
            let s = self.state(i);
            let row = &mut out[i * odim..(i + 1) * odim];
            let nx = self.nx;
            for a in 0..nx {
                row[a] = s.rel_pos[a] * pos_scale;
                row[nx + a] = s.rel_vel[a] * vel_scale;
            }
            if self.cfg.kind == EnvKind::Pointer {
                row[2 * nx] = s.rel_orient[0] / std::f32::consts::PI;
                row[2 * nx + 1] = s.rel_ang_vel[0] / self.cfg.max_yaw_rate as f32;
            }
        }
        out
    }
}

fn wrap_angle(a: f32) -> f32 {
    let two_pi = 2.0 * std::f32::consts::PI;
    let mut x = a % two_pi;
    if x > std::f32::consts::PI {
        x -= two_pi;
    } else if x <= -std::f32::consts::PI {
        x += two_pi;
    }
    x
}

/// Evaluates the feature vector of a transition on its next state.
///
/// Cost features are ≤ 0; `Success` is 1 iff ‖ΔX‖₂ < 1.
pub fn compute_features(
    _prev: &RobotState,
    next: &RobotState,
    spec: FeatureSetSpec,
    out: &mut [f32],
) {
    let descriptors = spec.descriptors();
    assert_eq!(out.len(), descriptors.len(), "feature buffer length");
    for (k, desc) in descriptors.iter().enumerate() {
        out[k] = match desc {
            FeatureDescriptor::PosAxisAbs(a) => -next.rel_pos[*a].abs(),
            FeatureDescriptor::PosNorm => -next.distance(),
            FeatureDescriptor::VelAxisAbs(a) => -next.rel_vel[*a].abs(),
            FeatureDescriptor::VelNorm => -next.speed_error(),
            FeatureDescriptor::OrientNorm => {
                -next.rel_orient.iter().map(|v| v * v).sum::<f32>().sqrt()
            }
            FeatureDescriptor::AngVelNorm => {
                -next.rel_ang_vel.iter().map(|v| v * v).sum::<f32>().sqrt()
            }
            FeatureDescriptor::Success => {
                if (next.distance() as f64) < SUCCESS_RADIUS {
                    1.0
                } else {
                    0.0
                }
            }
        };
    }
}

/// Exact dot product `φᵀw`.
#[inline]
pub fn reward(phi: &[f32], w: &[f32]) -> f32 {
    assert_eq!(phi.len(), w.len(), "feature/weight dimension mismatch");
    phi.iter().zip(w).map(|(p, q)| p * q).sum()
}

/// Time-varying navigation/hover task weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureTaskSpec {
    pub w_nav: Vec<f32>,
    pub w_hov: Vec<f32>,
    /// Navigation applies at distances ≥ this radius (m).
    pub switch_radius: f32,
}

impl MixtureTaskSpec {
    /// Paper defaults for each environment's regular feature set.
    pub fn defaults(spec: FeatureSetSpec) -> Result<Self> {
        use FeatureDescriptor::*;
        let descriptors = spec.descriptors();
        if spec.set == FeatureSet::Simple {
            return Err(Error::config(
                "mixture task needs velocity and success features; use regular or augment",
            ));
        }
        let mut w_nav = vec![0.0f32; descriptors.len()];
        let mut w_hov = vec![0.0f32; descriptors.len()];
        for (k, d) in descriptors.iter().enumerate() {
            match d {
                PosAxisAbs(_) | PosNorm => w_nav[k] = 1.0,
                VelAxisAbs(_) | VelNorm => w_hov[k] = 1.0,
                OrientNorm => w_nav[k] = 0.5,
                AngVelNorm => {}
                Success => {
                    w_nav[k] = 10.0;
                    w_hov[k] = 10.0;
                }
            }
        }
        Ok(MixtureTaskSpec {
            w_nav,
            w_hov,
            switch_radius: 3.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.w_nav.len()
    }
}

/// Returns the navigation weight iff the robot is at or beyond the switch
/// radius, the hover weight inside it.
pub fn task_weight<'a>(mix: &'a MixtureTaskSpec, state: &RobotState) -> &'a [f32] {
    if state.distance() >= mix.switch_radius {
        &mix.w_nav
    } else {
        &mix.w_hov
    }
}

/// A task usable for training or evaluation; mixture weights vary with the
/// per-instance state.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskSpec {
    Fixed(Vec<f32>),
    Mixture(MixtureTaskSpec),
}

impl TaskSpec {
    pub fn dim(&self) -> usize {
        match self {
            TaskSpec::Fixed(w) => w.len(),
            TaskSpec::Mixture(m) => m.dim(),
        }
    }

    pub fn weights_for<'a>(&'a self, state: &RobotState) -> &'a [f32] {
        match self {
            TaskSpec::Fixed(w) => w,
            TaskSpec::Mixture(m) => task_weight(m, state),
        }
    }
}

/// Default training task per environment: velocity control.
pub fn default_train_weights(spec: FeatureSetSpec) -> Vec<f32> {
    use FeatureDescriptor::*;
    spec.descriptors()
        .iter()
        .map(|d| match d {
            VelNorm | VelAxisAbs(_) => 1.0,
            OrientNorm if spec.kind == EnvKind::Pointer => 0.5,
            _ => 0.0,
        })
        .collect()
}
