//! Run configuration: a TOML file with `run.*`, `env.*`, `agent.*`,
//! `nnet.*` and `oracle.*` sections. Unknown keys are rejected, every
//! default is overridable, and parse→serialize→parse is a fixed point.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::RunConfig;
use crate::compose::Method;
use crate::envs::{EnvConfig, EnvKind, FeatureSet, MixtureTaskSpec, TaskSpec};
use crate::error::{Error, Result};
use crate::nnet::Activation;
use crate::sflearn::{Hyperparams, NetConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub run: RunSection,
    pub env: EnvSection,
    pub agent: AgentSection,
    pub nnet: NnetSection,
    pub oracle: OracleSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Required for `train`/`eval`: sac|sfgpi|msf|dac|dacgpi.
    pub method: Option<Method>,
    pub seed: u64,
    /// Total environment transitions.
    pub steps: u64,
    pub out_dir: String,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub checkpoint_interval: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            method: None,
            seed: 0,
            steps: 200_000,
            out_dir: "runs".into(),
            eval_interval: 5_000,
            eval_episodes: 20,
            checkpoint_interval: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    /// Required: pointmass2d|pointmass3d|pointer.
    pub kind: Option<EnvKind>,
    pub feature_set: FeatureSet,
    pub dt: f64,
    pub episode_steps: usize,
    pub mass: f64,
    pub max_force: f64,
    pub max_thrust: f64,
    pub max_yaw_rate: f64,
    pub arena_half_extent: f64,
    pub target_speed: f64,
    pub drag: f64,
    pub batch: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            kind: None,
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
            batch: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    /// Defaults to the environment's velocity-control task.
    pub w_train: Option<Vec<f32>>,
    /// train | mixture | fixed (fixed requires eval_w).
    pub eval_task: String,
    pub eval_w: Option<Vec<f32>>,
    pub exploration_steps: u64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub utd: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub auto_alpha: bool,
    pub tau: f64,
    pub gpi_cross_eval: bool,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            w_train: None,
            eval_task: "train".into(),
            eval_w: None,
            exploration_steps: 10_000,
            replay_capacity: 1_000_000,
            batch_size: 256,
            utd: 1,
            gamma: 0.99,
            alpha: 0.2,
            auto_alpha: false,
            tau: 0.995,
            gpi_cross_eval: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnetSection {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub critic_layernorm: bool,
    pub critic_dropout: f32,
    pub policy_layernorm: bool,
    pub policy_dropout: f32,
    pub lr_psi: f64,
    pub lr_pi: f64,
    pub critic_value_scale: f64,
}

impl Default for NnetSection {
    fn default() -> Self {
        NnetSection {
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            critic_layernorm: true,
            critic_dropout: 0.01,
            policy_layernorm: false,
            policy_dropout: 0.0,
            lr_psi: 3e-4,
            lr_pi: 3e-4,
            critic_value_scale: 30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub grid: usize,
    pub gamma: f64,
    pub alphas: Vec<f64>,
    pub w: Vec<f64>,
    /// Goal cells; defaults to opposite corners.
    pub goals: Option<Vec<usize>>,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            grid: 4,
            gamma: 0.9,
            alphas: vec![0.0, 0.1],
            w: vec![0.5, 0.5],
            goals: None,
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    /// Applies `section.key=value` overrides (CLI flags win over file
    /// values). Values are parsed as TOML literals, falling back to strings.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&self)
            .map_err(|e| Error::config(format!("config to table: {e}")))?;
        let parts: Vec<&str> = key.split('.').collect();
        if parts.len() != 2 {
            return Err(Error::config(format!(
                "override key '{key}' must look like section.key"
            )));
        }
        let section = table
            .get_mut(parts[0])
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| Error::config(format!("unknown config section '{}'", parts[0])))?;
        let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("parsed table has v"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        section.insert(parts[1].to_string(), parsed);
        *self = table
            .try_into()
            .map_err(|e| Error::config(format!("override {key}={value}: {e}")))?;
        Ok(())
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        let kind = self
            .env
            .kind
            .ok_or_else(|| Error::config("missing required key env.kind"))?;
        Ok(EnvConfig {
            kind,
            feature_set: self.env.feature_set,
            dt: self.env.dt,
            episode_steps: self.env.episode_steps,
            mass: self.env.mass,
            max_force: self.env.max_force,
            max_thrust: self.env.max_thrust,
            max_yaw_rate: self.env.max_yaw_rate,
            arena_half_extent: self.env.arena_half_extent,
            target_speed: self.env.target_speed,
            drag: self.env.drag,
            batch: self.env.batch,
            seed: self.run.seed,
        })
    }

    pub fn eval_task(&self, env: &EnvConfig, w_train: &[f32]) -> Result<TaskSpec> {
        match self.agent.eval_task.as_str() {
            "train" => Ok(TaskSpec::Fixed(w_train.to_vec())),
            "mixture" => Ok(TaskSpec::Mixture(MixtureTaskSpec::defaults(
                env.feature_spec()?,
            )?)),
            "fixed" => {
                let w = self.agent.eval_w.clone().ok_or_else(|| {
                    Error::config("agent.eval_task = \"fixed\" requires agent.eval_w")
                })?;
                Ok(TaskSpec::Fixed(w))
            }
            other => Err(Error::config(format!(
                "unknown agent.eval_task '{other}' (expected train|mixture|fixed)"
            ))),
        }
    }

    /// Resolves the full training run configuration, checking required keys
    /// and dimensional consistency.
    pub fn resolve_run(&self) -> Result<RunConfig> {
        let method = self
            .run
            .method
            .ok_or_else(|| Error::config("missing required key run.method"))?;
        let env = self.env_config()?;
        let spec = env.feature_spec()?;
        let w_train = match &self.agent.w_train {
            Some(w) => w.clone(),
            None => crate::envs::default_train_weights(spec),
        };
        let eval_task = self.eval_task(&env, &w_train)?;
        let cfg = RunConfig {
            method,
            env,
            seed: self.run.seed,
            total_steps: self.run.steps,
            exploration_steps: self.agent.exploration_steps,
            replay_capacity: self.agent.replay_capacity,
            hp: Hyperparams {
                gamma: self.agent.gamma,
                alpha: self.agent.alpha,
                tau: self.agent.tau,
                batch_size: self.agent.batch_size,
                utd: self.agent.utd,
                auto_alpha: self.agent.auto_alpha,
            },
            net: NetConfig {
                hidden: self.nnet.hidden.clone(),
                activation: self.nnet.activation,
                critic_layernorm: self.nnet.critic_layernorm,
                critic_dropout: self.nnet.critic_dropout,
                policy_layernorm: self.nnet.policy_layernorm,
                policy_dropout: self.nnet.policy_dropout,
                lr_psi: self.nnet.lr_psi,
                lr_pi: self.nnet.lr_pi,
                critic_value_scale: self.nnet.critic_value_scale,
            },
            w_train,
            eval_task,
            eval_interval: self.run.eval_interval,
            eval_episodes: self.run.eval_episodes,
            checkpoint_interval: self.run.checkpoint_interval,
            gpi_cross_eval: self.agent.gpi_cross_eval,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn oracle_goals(&self) -> Vec<usize> {
        match &self.oracle.goals {
            Some(g) => g.clone(),
            None => vec![0, self.oracle.grid * self.oracle.grid - 1],
        }
    }
}

/// The commented reference of every key and its default. A test keeps this
/// in sync with the actual `Default` implementations.
pub fn reference() -> String {
    r#"# sf-compose run configuration reference.
# Every key is optional unless marked required; values shown are defaults.
# CLI flags mirror these keys and take precedence.

[run]
# method = "dac"          # REQUIRED for train/eval: sac|sfgpi|msf|dac|dacgpi
seed = 0
steps = 200000             # total environment transitions
out_dir = "runs"           # run directories land here (env SF_COMPOSE_RUNDIR overrides)
eval_interval = 5000       # transitions between deterministic evaluations
eval_episodes = 20
checkpoint_interval = 100000

[env]
# kind = "pointmass2d"     # REQUIRED: pointmass2d|pointmass3d|pointer
feature_set = "regular"    # regular|simple|augment (pointer: regular only)
dt = 0.05                  # integration step (s)
episode_steps = 500        # fixed horizon
mass = 1.0                 # kg
max_force = 10.0           # pointmass force scale (N)
max_thrust = 15.0          # pointer thrust scale (N)
max_yaw_rate = 2.0         # pointer yaw-rate scale (rad/s)
arena_half_extent = 20.0   # goal/initial sampling box (m)
target_speed = 2.0         # hover target velocity magnitude (m/s)
drag = 0.1                 # pointer linear drag (1/s)
batch = 20                 # parallel environment instances

[agent]
# w_train = [0.0, 0.0, 1.0, 0.0]  # defaults to the velocity-control task
eval_task = "train"        # train|mixture|fixed (fixed requires eval_w)
# eval_w = [1.0, 1.0, 0.0, 10.0]
exploration_steps = 10000  # uniform-action transitions before the policy acts
replay_capacity = 1000000
batch_size = 256
utd = 1                    # gradient steps per environment step
gamma = 0.99
alpha = 0.2                # entropy temperature (fixed unless auto_alpha)
auto_alpha = false
tau = 0.995                # target retention per Polyak update
gpi_cross_eval = false     # score every candidate under every critic

[nnet]
hidden = [64, 64]
activation = "tanh"        # linear|tanh|relu
critic_layernorm = true
critic_dropout = 0.01
policy_layernorm = false
policy_dropout = 0.0
lr_psi = 0.0003
lr_pi = 0.0003
critic_value_scale = 30.0  # SF output conditioning (raw net range multiplier)

[oracle]
grid = 4                   # gridworld side length
gamma = 0.9
alphas = [0.0, 0.1]        # temperatures to verify
w = [0.5, 0.5]             # transfer task weight
# goals = [0, 15]          # goal cells; defaults to opposite corners
"#
    .to_string()
}
