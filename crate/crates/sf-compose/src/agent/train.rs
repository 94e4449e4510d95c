//! The end-to-end training loop: uniform exploration, composition acting,
//! per-primitive soft policy iteration, Polyak targets, periodic
//! deterministic evaluation and checkpointing.
//!
//! One "environment step" advances the whole instance batch, contributing
//! `env.batch` transitions; `total_steps`, `exploration_steps` and
//! `eval_interval` all count transitions. Gradient updates start once the
//! replay buffer can fill a minibatch; each environment step then performs
//! exactly `utd` gradient steps per primitive.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{evaluate, ComposerActor, EvalDumps, EvalMetrics};
use super::replay::ReplayBuffer;
use crate::compose::{ActMode, Composer, Method, PrimitiveSet};
use crate::envs::{reward, EnvBatch, EnvConfig, TaskSpec};
use crate::error::{Error, Result};
use crate::metrics::{run_dir, MetricsRow, MetricsWriter};
use crate::nnet::{entry_map, read_checkpoint, write_checkpoint};
use crate::sflearn::{Hyperparams, NetConfig};

/// Everything one training run needs.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub method: Method,
    pub env: EnvConfig,
    pub seed: u64,
    /// Total environment transitions.
    pub total_steps: u64,
    /// Transitions acted uniformly at random before the composition policy
    /// takes over.
    pub exploration_steps: u64,
    pub replay_capacity: usize,
    pub hp: Hyperparams,
    pub net: NetConfig,
    /// Training task; also the SAC reward projection.
    pub w_train: Vec<f32>,
    pub eval_task: TaskSpec,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub checkpoint_interval: u64,
    pub gpi_cross_eval: bool,
}

impl RunConfig {
    pub fn defaults(method: Method, env: EnvConfig) -> Result<Self> {
        let spec = env.feature_spec()?;
        let w_train = crate::envs::default_train_weights(spec);
        let eval_task = TaskSpec::Fixed(w_train.clone());
        Ok(RunConfig {
            method,
            env,
            seed: 0,
            total_steps: 200_000,
            exploration_steps: 10_000,
            replay_capacity: 1_000_000,
            hp: Hyperparams::default(),
            net: NetConfig::default(),
            w_train,
            eval_task,
            eval_interval: 5_000,
            eval_episodes: 20,
            checkpoint_interval: 100_000,
            gpi_cross_eval: false,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        let d = self.env.feature_spec()?.dim();
        if self.w_train.len() != d {
            return Err(Error::config(format!(
                "w_train has {} entries but the feature set has {d}",
                self.w_train.len()
            )));
        }
        if self.eval_task.dim() != d {
            return Err(Error::config(format!(
                "eval task has {} entries but the feature set has {d}",
                self.eval_task.dim()
            )));
        }
        if self.hp.batch_size == 0 {
            return Err(Error::config("agent.batch_size must be > 0"));
        }
        if !(0.0..1.0).contains(&self.hp.gamma) {
            return Err(Error::config("agent.gamma must be in [0, 1)"));
        }
        if self.method == Method::Msf && self.w_train.iter().any(|v| *v < 0.0) {
            return Err(Error::config("msf training requires nonnegative w_train"));
        }
        Ok(())
    }
}

/// A trained primitive set plus what is needed to act with it.
pub struct TrainedAgent {
    pub prims: PrimitiveSet,
    pub method: Method,
    pub env_cfg: EnvConfig,
    pub w_train: Vec<f32>,
    pub gpi_cross_eval: bool,
}

impl TrainedAgent {
    /// Fresh, untrained agent with the run's network layout.
    pub fn init(cfg: &RunConfig) -> Result<Self> {
        let d = cfg.env.feature_spec()?.dim();
        let (n, prim_feat) = match cfg.method {
            Method::Sac => (1, 1),
            _ => (d, d),
        };
        let mut net_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        net_rng.set_stream(STREAM_NET_INIT);
        // Uniform critic output conditioning; the scale itself comes from
        // config (nnet.critic_value_scale). Absolute-calibration noise in
        // the SF advantages grows with the scale, so it stays moderate
        // rather than tracking the worst-case feature bound.
        let value_scales = vec![1.0; prim_feat];
        let prims = PrimitiveSet::new(
            n,
            cfg.env.obs_dim(),
            cfg.env.kind.action_dim(),
            prim_feat,
            &cfg.net,
            &value_scales,
            &mut net_rng,
        );
        Ok(TrainedAgent {
            prims,
            method: cfg.method,
            env_cfg: cfg.env.clone(),
            w_train: cfg.w_train.clone(),
            gpi_cross_eval: cfg.gpi_cross_eval,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        write_checkpoint(path, &self.prims.export_tensors())
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<()> {
        let entries = read_checkpoint(path)?;
        self.prims.load_tensors(&entry_map(&entries))
    }

    /// Deterministic-mean evaluation on an arbitrary task.
    pub fn evaluate(
        &self,
        task: &TaskSpec,
        episodes: usize,
        seed: u64,
        dumps: EvalDumps<'_>,
    ) -> Result<EvalMetrics> {
        let mut actor = ComposerActor::deterministic(&self.prims, self.method, episodes);
        actor.composer.gpi_cross_eval = self.gpi_cross_eval;
        actor.composer.collect_diagnostics = dumps.kappa.is_some();
        evaluate(&mut actor, &self.env_cfg, task, episodes, seed, dumps)
    }
}

/// Counters that pin down the loop accounting.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrainStats {
    /// Batched environment steps taken.
    pub env_steps: u64,
    /// Environment transitions collected.
    pub transitions: u64,
    /// Environment steps on which gradient updates ran.
    pub update_steps: u64,
    /// Gradient steps taken per primitive.
    pub grad_steps_per_primitive: u64,
    /// Policy forward passes issued while exploring uniformly.
    pub policy_forwards_during_exploration: u64,
}

pub struct TrainOutput {
    pub agent: TrainedAgent,
    pub rows: Vec<MetricsRow>,
    pub stats: TrainStats,
    pub final_eval: EvalMetrics,
    pub run_dir: Option<PathBuf>,
}

const STREAM_NET_INIT: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_ACT: u64 = 3;
const STREAM_UPDATE: u64 = 4;
const STREAM_REPLAY: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs one training job. With `out_root` set, writes `metrics.csv` and
/// checkpoints under `run-<seed>-<method>/`.
pub fn train(cfg: &RunConfig, out_root: Option<&Path>) -> Result<TrainOutput> {
    cfg.validate()?;
    let start = std::time::Instant::now();

    let mut env_cfg = cfg.env.clone();
    env_cfg.seed = cfg.seed;
    let mut env = EnvBatch::new(env_cfg)?;
    let d = env.feature_dim();
    let batch = env.batch();
    let adim = env.action_dim();
    let obs_dim = env.cfg.obs_dim();

    let mut agent = TrainedAgent::init(cfg)?;
    let mut composer = Composer::new(cfg.method, batch);
    composer.gpi_cross_eval = cfg.gpi_cross_eval;
    let mut replay = ReplayBuffer::new(cfg.replay_capacity, obs_dim, adim, d);

    let mut explore_rng = stream(cfg.seed, STREAM_EXPLORE);
    let mut act_rng = stream(cfg.seed, STREAM_ACT);
    let mut update_rng = stream(cfg.seed, STREAM_UPDATE);
    let mut replay_rng = stream(cfg.seed, STREAM_REPLAY);

    let run_path = out_root.map(|root| run_dir(root, cfg.seed, cfg.method));
    let mut writer = match &run_path {
        Some(dir) => Some(MetricsWriter::create(&dir.join("metrics.csv"))?),
        None => None,
    };

    // Per-instance task weights for acting; the training task is fixed.
    let ws_train: Vec<f32> = cfg
        .w_train
        .iter()
        .cycle()
        .take(batch * d)
        .copied()
        .collect();
    let sac_projection = match cfg.method {
        Method::Sac => Some(cfg.w_train.clone()),
        _ => None,
    };

    let mut stats = TrainStats::default();
    let mut alpha = cfg.hp.alpha;
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut returns_acc = vec![0.0f64; batch];
    let mut last_train_return = 0.0f64;
    let mut loss_acc = (0.0f64, 0.0f64, 0u64); // (sf, pi, count)
    let mut next_eval = cfg.eval_interval.max(1);
    let mut next_checkpoint = cfg.checkpoint_interval.max(1);
    let sim_ms_per_env_step = env.cfg.dt * 1000.0;

    let total_iters = cfg.total_steps.div_ceil(batch as u64);
    for iter in 0..total_iters {
        let transitions_before = iter * batch as u64;
        let exploring = transitions_before < cfg.exploration_steps;
        let obs = env.observations();

        let policy_calls_before = agent.prims.policy_forward_count();
        let actions = if exploring {
            (0..batch * adim)
                .map(|_| explore_rng.gen_range(-1.0f32..1.0))
                .collect::<Vec<f32>>()
        } else {
            composer.act(
                &agent.prims,
                &obs,
                &ws_train,
                batch,
                ActMode::Stochastic,
                &mut act_rng,
            )?
        };
        if exploring {
            stats.policy_forwards_during_exploration +=
                agent.prims.policy_forward_count() - policy_calls_before;
        }

        let outcome = env.step(&actions)?;
        let next_obs = env.observations();
        for i in 0..batch {
            let phi = &outcome.features[i * d..(i + 1) * d];
            replay.push(
                &obs[i * obs_dim..(i + 1) * obs_dim],
                &actions[i * adim..(i + 1) * adim],
                phi,
                &next_obs[i * obs_dim..(i + 1) * obs_dim],
                outcome.episode_done,
            );
            returns_acc[i] += reward(phi, &cfg.w_train) as f64;
        }
        if outcome.episode_done {
            last_train_return = returns_acc.iter().sum::<f64>() / batch as f64;
            returns_acc.iter_mut().for_each(|v| *v = 0.0);
            composer.reset_episode();
        }
        stats.env_steps += 1;
        stats.transitions += batch as u64;

        if replay.len() >= cfg.hp.batch_size {
            for _ in 0..cfg.hp.utd {
                let minibatch =
                    replay.sample(cfg.hp.batch_size, sac_projection.as_deref(), &mut replay_rng);
                let mut mean_logp = 0.0f64;
                let mut diverged: Option<String> = None;
                for prim in &mut agent.prims.prims {
                    let step_stats = prim.update(&minibatch, &cfg.hp, alpha, &mut update_rng);
                    if !step_stats.sf_loss.is_finite() || !step_stats.pi_objective.is_finite() {
                        diverged = Some(format!(
                            "non-finite loss at transition {} (primitive {}): sf_loss={}, pi_obj={}",
                            stats.transitions, prim.index, step_stats.sf_loss, step_stats.pi_objective
                        ));
                        break;
                    }
                    loss_acc.0 += step_stats.sf_loss;
                    loss_acc.1 += step_stats.pi_objective;
                    loss_acc.2 += 1;
                    mean_logp += step_stats.mean_log_prob;
                }
                if let Some(msg) = diverged {
                    // Diagnostic snapshot of the diverged parameters.
                    if let Some(dir) = &run_path {
                        let _ = agent.save_checkpoint(&dir.join("checkpoint_diverged.ckpt"));
                    }
                    return Err(Error::numerical(msg));
                }
                if cfg.hp.auto_alpha {
                    // Simple dual ascent toward the standard −|A| entropy
                    // target, shared across primitives.
                    mean_logp /= agent.prims.n() as f64;
                    let target = -(adim as f64);
                    let log_alpha = alpha.ln() + cfg.net.lr_pi * (mean_logp + target);
                    alpha = log_alpha.exp().clamp(1e-4, 10.0);
                }
                stats.grad_steps_per_primitive += 1;
            }
            stats.update_steps += 1;
        }

        let transitions_now = transitions_before + batch as u64;
        let is_last = iter + 1 == total_iters;
        if transitions_now >= next_eval || is_last {
            while transitions_now >= next_eval {
                next_eval += cfg.eval_interval.max(1);
            }
            let eval = agent.evaluate(
                &cfg.eval_task,
                cfg.eval_episodes,
                cfg.seed,
                EvalDumps::default(),
            )?;
            let (sf_mean, pi_mean) = if loss_acc.2 > 0 {
                (loss_acc.0 / loss_acc.2 as f64, loss_acc.1 / loss_acc.2 as f64)
            } else {
                (0.0, 0.0)
            };
            loss_acc = (0.0, 0.0, 0);
            let row = MetricsRow {
                step: transitions_now,
                wall_ms: (stats.env_steps as f64 * sim_ms_per_env_step) as u64,
                method: cfg.method,
                train_return: last_train_return,
                eval_return: eval.mean_return,
                eval_final_dist: eval.mean_final_distance,
                eval_success: eval.success_rate,
                sf_loss_mean: sf_mean,
                pi_obj_mean: pi_mean,
                alpha,
            };
            if let Some(w) = writer.as_mut() {
                w.append(&row)?;
            }
            rows.push(row);
        }
        if transitions_now >= next_checkpoint && !is_last {
            next_checkpoint += cfg.checkpoint_interval.max(1);
            if let Some(dir) = &run_path {
                agent.save_checkpoint(&dir.join(format!("checkpoint_{transitions_now}.ckpt")))?;
            }
        }
    }

    if let Some(dir) = &run_path {
        agent.save_checkpoint(&dir.join("checkpoint_final.ckpt"))?;
    }
    let final_eval = match rows.last() {
        Some(row) => EvalMetrics {
            episodes: cfg.eval_episodes,
            mean_return: row.eval_return,
            mean_final_distance: row.eval_final_dist,
            success_rate: row.eval_success,
        },
        None => agent.evaluate(
            &cfg.eval_task,
            cfg.eval_episodes,
            cfg.seed,
            EvalDumps::default(),
        )?,
    };
    println!(
        "[{}] seed {} finished: {} transitions, {} grad steps/primitive, {:.1}s host time, final eval return {:.2}",
        cfg.method,
        cfg.seed,
        stats.transitions,
        stats.grad_steps_per_primitive,
        start.elapsed().as_secs_f64(),
        final_eval.mean_return
    );

    Ok(TrainOutput {
        agent,
        rows,
        stats,
        final_eval,
        run_dir: run_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvKind;

    fn tiny_cfg(method: Method) -> RunConfig {
        let mut env = EnvConfig::defaults(EnvKind::Pointmass2d);
        env.batch = 4;
        env.episode_steps = 25;
        let mut cfg = RunConfig::defaults(method, env).unwrap();
        cfg.total_steps = 400;
        cfg.exploration_steps = 200;
        cfg.eval_interval = 200;
        cfg.eval_episodes = 2;
        cfg.hp.batch_size = 16;
        cfg.net.hidden = vec![8, 8];
        cfg
    }

    #[test]
    fn zero_utd_leaves_parameters_unchanged() {
        let mut cfg = tiny_cfg(Method::Msf);
        cfg.hp.utd = 0;
        let before = TrainedAgent::init(&cfg).unwrap();
        let out = train(&cfg, None).unwrap();
        assert_eq!(out.stats.grad_steps_per_primitive, 0);
        for (a, b) in out.agent.prims.prims.iter().zip(&before.prims.prims) {
            let mut pa = Vec::new();
            a.policy.for_each_param(|v| pa.push(v));
            let mut pb = Vec::new();
            b.policy.for_each_param(|v| pb.push(v));
            assert_eq!(pa, pb);
        }
    }

    #[test]
    fn same_seed_gives_identical_metrics() {
        let cfg = tiny_cfg(Method::SfGpi);
        let a = train(&cfg, None).unwrap();
        let b = train(&cfg, None).unwrap();
        let rows_a: Vec<String> = a.rows.iter().map(|r| r.to_csv()).collect();
        let rows_b: Vec<String> = b.rows.iter().map(|r| r.to_csv()).collect();
        assert_eq!(rows_a, rows_b);
        assert!(!rows_a.is_empty());
    }

    #[test]
    fn gradient_step_accounting_matches_utd() {
        let mut cfg = tiny_cfg(Method::Dac);
        cfg.hp.utd = 2;
        let out = train(&cfg, None).unwrap();
        assert_eq!(
            out.stats.grad_steps_per_primitive,
            out.stats.update_steps * 2
        );
        assert!(out.stats.update_steps > 0);
    }

    #[test]
    fn exploration_phase_never_queries_policies() {
        let mut cfg = tiny_cfg(Method::Dac);
        cfg.total_steps = 200;
        cfg.exploration_steps = 10_000; // entire run explores
        cfg.eval_interval = 1_000_000; // suppress mid-run evals
        cfg.eval_episodes = 0;
        let out = train(&cfg, None).unwrap();
        assert_eq!(out.stats.policy_forwards_during_exploration, 0);
    }

    #[test]
    fn sac_reduction_matches_single_feature_critic_targets() {
        // With d=1 and w=1, SAC's projected scalar reward equals the raw
        // feature, so its TD pipeline is the 1-feature SF critic's.
        let mut env = EnvConfig::defaults(EnvKind::Pointmass2d);
        env.feature_set = crate::envs::FeatureSet::Simple;
        env.batch = 2;
        let spec = env.feature_spec().unwrap();
        assert_eq!(spec.dim(), 2);
        let mut cfg = RunConfig::defaults(Method::Sac, env).unwrap();
        cfg.w_train = vec![1.0, 0.0];
        cfg.eval_task = TaskSpec::Fixed(vec![1.0, 0.0]);
        let mut buf = ReplayBuffer::new(8, 4, 2, 2);
        buf.push(&[0.1; 4], &[0.5, -0.5], &[2.0, 7.0], &[0.2; 4], false);
        let mut rng = stream(0, STREAM_REPLAY);
        let b = buf.sample(3, Some(&cfg.w_train), &mut rng);
        assert_eq!(b.phi, vec![2.0, 2.0, 2.0]);
    }
}
