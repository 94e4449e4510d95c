//! Evaluation protocol: deterministic-mean rollouts on a task spec, with
//! evaluation seeds disjoint from training seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compose::{ActMode, Composer, Method, PrimitiveSet};
use crate::envs::{reward, EnvBatch, EnvConfig, TaskSpec};
use crate::error::Result;
use crate::metrics::{KappaWriter, TrajectoryWriter};

/// Offset separating evaluation RNG streams from training streams.
pub const EVAL_SEED_OFFSET: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub mean_return: f64,
    pub mean_final_distance: f64,
    pub success_rate: f64,
}

/// Anything that can act on a batch of environment instances.
pub trait Actor {
    fn act(&mut self, env: &EnvBatch, obs: &[f32], ws: &[f32], rng: &mut ChaCha8Rng)
        -> Result<Vec<f32>>;

    fn reset_episode(&mut self) {}

    /// κ diagnostics from the last act call, if this actor produces them.
    fn diagnostics(&self) -> Option<&crate::compose::ActDiagnostics> {
        None
    }
}

/// Acts through a composition rule with distribution means; argmax-style
/// selection steps keep running.
pub struct ComposerActor<'a> {
    pub prims: &'a PrimitiveSet,
    pub composer: Composer,
    pub mode: ActMode,
}

impl<'a> ComposerActor<'a> {
    pub fn deterministic(prims: &'a PrimitiveSet, method: Method, batch: usize) -> Self {
        ComposerActor {
            prims,
            composer: Composer::new(method, batch),
            mode: ActMode::Deterministic,
        }
    }
}

impl Actor for ComposerActor<'_> {
    fn act(
        &mut self,
        _env: &EnvBatch,
        obs: &[f32],
        ws: &[f32],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f32>> {
        let batch = obs.len() / self.prims.obs_dim;
        self.composer
            .act(self.prims, obs, ws, batch, self.mode, rng)
    }

    fn reset_episode(&mut self) {
        self.composer.reset_episode();
    }

    fn diagnostics(&self) -> Option<&crate::compose::ActDiagnostics> {
        if self.composer.collect_diagnostics {
            Some(&self.composer.last_diagnostics)
        } else {
            None
        }
    }
}

/// Uniform random actions; the zero-capability baseline.
pub struct RandomActor;

impl Actor for RandomActor {
    fn act(
        &mut self,
        env: &EnvBatch,
        _obs: &[f32],
        _ws: &[f32],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f32>> {
        Ok((0..env.batch() * env.action_dim())
            .map(|_| rng.gen_range(-1.0f32..1.0))
            .collect())
    }
}

/// Hand-coded proportional-derivative controller for Pointmass navigation;
/// the sanity ceiling for the evaluation plumbing.
pub struct PdController {
    pub kp: f32,
    pub kd: f32,
}

impl Default for PdController {
    fn default() -> Self {
        PdController { kp: 2.0, kd: 3.0 }
    }
}

impl Actor for PdController {
    fn act(
        &mut self,
        env: &EnvBatch,
        _obs: &[f32],
        _ws: &[f32],
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f32>> {
        let adim = env.action_dim();
        let scale = (env.cfg.mass / env.cfg.max_force) as f32;
        let mut out = vec![0.0f32; env.batch() * adim];
        for i in 0..env.batch() {
            let s = env.state(i);
            for a in 0..adim {
                // Damp the robot's absolute velocity, not the tracking error.
                let v = s.rel_vel[a] + if a == 0 { env.cfg.target_speed as f32 } else { 0.0 };
                let accel = -self.kp * s.rel_pos[a] - self.kd * v;
                out[i * adim + a] = (accel * scale).clamp(-1.0, 1.0);
            }
        }
        Ok(out)
    }
}

/// Optional per-step CSV sinks for [`evaluate`].
#[derive(Default)]
pub struct EvalDumps<'a> {
    pub trajectory: Option<&'a mut TrajectoryWriter>,
    pub kappa: Option<&'a mut KappaWriter>,
}

/// Runs `episodes` evaluation episodes (one environment instance each, fixed
/// horizon) and reports mean undiscounted return under the task's
/// (possibly time-varying) weights, mean final distance and success rate.
pub fn evaluate(
    actor: &mut dyn Actor,
    env_cfg: &EnvConfig,
    task: &TaskSpec,
    episodes: usize,
    seed: u64,
    mut dumps: EvalDumps<'_>,
) -> Result<EvalMetrics> {
    if episodes == 0 {
        return Ok(EvalMetrics::default());
    }
    let mut cfg = env_cfg.clone();
    cfg.batch = episodes;
    cfg.seed = seed.wrapping_add(EVAL_SEED_OFFSET);
    let mut env = EnvBatch::new(cfg)?;
    let d = env.feature_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(EVAL_SEED_OFFSET));

    let mut returns = vec![0.0f64; episodes];
    actor.reset_episode();
    for step in 0..env.cfg.episode_steps {
        let obs = env.observations();
        // Task weights at the decision state.
        let mut ws = vec![0.0f32; episodes * d];
        let mut phases = Vec::with_capacity(episodes);
        for i in 0..episodes {
            let state = env.state(i);
            let w = task.weights_for(&state);
            ws[i * d..(i + 1) * d].copy_from_slice(w);
            phases.push(match task {
                TaskSpec::Mixture(m) => {
                    if state.distance() >= m.switch_radius {
                        "nav"
                    } else {
                        "hov"
                    }
                }
                TaskSpec::Fixed(_) => "fixed",
            });
        }
        let states_before: Vec<_> = (0..episodes).map(|i| env.state(i)).collect();
        let actions = actor.act(&env, &obs, &ws, &mut rng)?;
        let outcome = env.step(&actions)?;
        for i in 0..episodes {
            let phi = &outcome.features[i * d..(i + 1) * d];
            let r = reward(phi, &ws[i * d..(i + 1) * d]);
            returns[i] += r as f64;
            if let Some(tw) = dumps.trajectory.as_deref_mut() {
                let s = &states_before[i];
                let state_cols: Vec<f32> = s
                    .rel_pos
                    .iter()
                    .chain(&s.rel_vel)
                    .chain(&s.rel_orient)
                    .chain(&s.rel_ang_vel)
                    .copied()
                    .collect();
                let adim = env.cfg.kind.action_dim();
                tw.write_row(
                    i,
                    step,
                    &state_cols,
                    &actions[i * adim..(i + 1) * adim],
                    phi,
                    r,
                    phases[i],
                )?;
            }
        }
        if let (Some(kw), Some(diag)) = (dumps.kappa.as_deref_mut(), actor.diagnostics()) {
            if !diag.kappa.is_empty() {
                let adim = env.cfg.kind.action_dim();
                let per = diag.kappa.len() / episodes;
                for i in 0..episodes {
                    kw.write_row(
                        i,
                        step,
                        &states_before[i].rel_pos,
                        &diag.kappa[i * per..(i + 1) * per],
                        adim,
                        diag.p_hat_mean.get(i).copied().unwrap_or(0.0),
                    )?;
                }
            }
        }
        if outcome.episode_done {
            let final_distances = outcome.distances;
            if let Some(tw) = dumps.trajectory.as_deref_mut() {
                tw.flush()?;
            }
            if let Some(kw) = dumps.kappa.as_deref_mut() {
                kw.flush()?;
            }
            let successes = final_distances.iter().filter(|d| **d < 1.0).count();
            return Ok(EvalMetrics {
                episodes,
                mean_return: returns.iter().sum::<f64>() / episodes as f64,
                mean_final_distance: final_distances.iter().map(|d| *d as f64).sum::<f64>()
                    / episodes as f64,
                success_rate: successes as f64 / episodes as f64,
            });
        }
    }
    unreachable!("fixed horizon always ends with episode_done");
}
