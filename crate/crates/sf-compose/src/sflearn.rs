//! Successor-feature critics and the losses that train the primitives.
//!
//! Each primitive `i` is a squashed-Gaussian policy paired with a
//! double-critic successor-feature estimate `ψ^{π_i}(s,a) ∈ R^d` (two online
//! networks, two Polyak-averaged targets). Primitives train by soft policy
//! iteration on their own base task `e_i`:
//!
//! - evaluation: `ψ̂ = φ + γ·(min ψ̄(s′,a′) − α·log π_i(a′|s′)·𝟏_d)` with
//!   `a′` drawn fresh from the primitive, the entropy scalar broadcast across
//!   feature dimensions, and no gradient through the target;
//! - improvement: ascend `J_π = E[ e_iᵀ·min ψ(s,a) − α·log π_i(a|s) ]` with
//!   reparameterized actions.
//!
//! TD targets are plain values, so gradient leakage through them is
//! impossible by construction; the tests pin this down anyway.

use rand::Rng;

use crate::nnet::{
    AdamConfig, AdamState, Activation, ForwardCache, GaussianHead, GradStore, LayerSpec, Mlp,
    Scalar, TensorEntry, LOG_STD_MAX, LOG_STD_MIN,
};

/// Generalized policy evaluation: the value of a policy with successor
/// features `ψ` on any task `w` is the dot product `ψᵀw`.
#[inline]
pub fn gpe<F: Scalar>(psi: &[F], w: &[F]) -> F {
    assert_eq!(psi.len(), w.len(), "gpe dimension mismatch");
    let mut q = F::zero();
    for (p, wk) in psi.iter().zip(w) {
        q += *p * *wk;
    }
    q
}

/// Elementwise minimum of the two critic outputs (batch × d rows).
#[inline]
pub fn elementwise_min<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.min(*y)).collect()
}

/// Base tasks `e_i`; rows of the identity by default so the primitives form
/// a basis in policy space.
#[derive(Clone, Debug)]
pub struct BaseTaskMatrix {
    pub rows: Vec<Vec<f32>>,
}

impl BaseTaskMatrix {
    pub fn identity(d: usize) -> Self {
        let rows = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        BaseTaskMatrix { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// A transfer task must overlap the span of the base tasks; with the
    /// identity basis that means some nonzero component.
    pub fn overlaps(&self, w: &[f32]) -> bool {
        self.rows
            .iter()
            .any(|e| e.iter().zip(w).map(|(a, b)| a * b).sum::<f32>() != 0.0)
    }
}

/// Training hyperparameters shared by all primitives.
#[derive(Clone, Copy, Debug)]
pub struct Hyperparams {
    pub gamma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Gradient steps per environment step.
    pub utd: usize,
    pub auto_alpha: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.99,
            alpha: 0.2,
            tau: 0.995,
            batch_size: 256,
            utd: 1,
            auto_alpha: false,
        }
    }
}

/// Network architecture and learning rates for policies and SF critics.
#[derive(Clone, Debug)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub critic_layernorm: bool,
    pub critic_dropout: f32,
    pub policy_layernorm: bool,
    pub policy_dropout: f32,
    pub lr_psi: f64,
    pub lr_pi: f64,
    /// Output conditioning for the SF critics: raw network outputs are
    /// multiplied by this so value-scale targets are reachable from Xavier
    /// init. Larger values reach faster but cost absolute resolution.
    pub critic_value_scale: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
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

impl NetConfig {
    fn critic_specs(&self, feat_dim: usize) -> Vec<LayerSpec> {
        let mut specs: Vec<LayerSpec> = self
            .hidden
            .iter()
            .map(|&w| LayerSpec {
                width: w,
                activation: self.activation,
                layernorm: self.critic_layernorm,
                dropout: self.critic_dropout,
            })
            .collect();
        specs.push(LayerSpec::plain(feat_dim, Activation::Linear));
        specs
    }

    fn policy_specs(&self, act_dim: usize) -> Vec<LayerSpec> {
        let mut specs: Vec<LayerSpec> = self
            .hidden
            .iter()
            .map(|&w| LayerSpec {
                width: w,
                activation: self.activation,
                layernorm: self.policy_layernorm,
                dropout: self.policy_dropout,
            })
            .collect();
        specs.push(LayerSpec::plain(2 * act_dim, Activation::Linear));
        specs
    }
}

/// Double-critic successor-feature estimate for one primitive.
#[derive(Clone)]
pub struct SfCritic<F> {
    pub online: [Mlp<F>; 2],
    pub targets: [Mlp<F>; 2],
    pub feat_dim: usize,
}

impl<F: Scalar> SfCritic<F> {
    /// `value_scales` conditions each SF output component; pass ones to
    /// train on raw target magnitudes.
    pub fn new<R: Rng>(
        obs_dim: usize,
        act_dim: usize,
        feat_dim: usize,
        cfg: &NetConfig,
        value_scales: &[f64],
        rng: &mut R,
    ) -> Self {
        assert_eq!(value_scales.len(), feat_dim, "one value scale per feature");
        let scales: Vec<f64> = value_scales
            .iter()
            .map(|s| s * cfg.critic_value_scale)
            .collect();
        let specs = cfg.critic_specs(feat_dim);
        let n1 = Mlp::new(obs_dim + act_dim, &specs, rng).with_output_scales(&scales);
        let n2 = Mlp::new(obs_dim + act_dim, &specs, rng).with_output_scales(&scales);
        let targets = [n1.clone(), n2.clone()];
        SfCritic {
            online: [n1, n2],
            targets,
            feat_dim,
        }
    }

    /// `min(ψ_{θ1}, ψ_{θ2})` elementwise per feature, batched.
    pub fn sf_min(&self, obs_act: &[F], batch: usize) -> Vec<F> {
        let a = self.online[0].forward_eval(obs_act, batch);
        let b = self.online[1].forward_eval(obs_act, batch);
        elementwise_min(&a, &b)
    }

    /// Min over the *target* networks, used for TD targets.
    pub fn sf_min_target(&self, obs_act: &[F], batch: usize) -> Vec<F> {
        let a = self.targets[0].forward_eval(obs_act, batch);
        let b = self.targets[1].forward_eval(obs_act, batch);
        elementwise_min(&a, &b)
    }
}

/// One policy/critic pair plus its optimizer state.
pub struct Primitive<F> {
    pub index: usize,
    pub policy: Mlp<F>,
    pub critic: SfCritic<F>,
    pub opt_psi: [AdamState<F>; 2],
    pub opt_pi: AdamState<F>,
    pub act_dim: usize,
    pub obs_dim: usize,
}

/// Scalar diagnostics of one gradient step.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepStats {
    pub sf_loss: f64,
    pub pi_objective: f64,
    pub mean_log_prob: f64,
}

/// A minibatch of transitions in network layout.
pub struct TransitionBatch<F> {
    pub obs: Vec<F>,
    pub act: Vec<F>,
    pub phi: Vec<F>,
    pub next_obs: Vec<F>,
    pub batch: usize,
}

impl<F: Scalar> Primitive<F> {
    pub fn new<R: Rng>(
        index: usize,
        obs_dim: usize,
        act_dim: usize,
        feat_dim: usize,
        cfg: &NetConfig,
        value_scales: &[f64],
        rng: &mut R,
    ) -> Self {
        let policy = Mlp::new(obs_dim, &cfg.policy_specs(act_dim), rng);
        let critic = SfCritic::new(obs_dim, act_dim, feat_dim, cfg, value_scales, rng);
        let opt_psi = [
            AdamState::new(&critic.online[0], AdamConfig::with_lr(cfg.lr_psi)),
            AdamState::new(&critic.online[1], AdamConfig::with_lr(cfg.lr_psi)),
        ];
        let opt_pi = AdamState::new(&policy, AdamConfig::with_lr(cfg.lr_pi));
        Primitive {
            index,
            policy,
            critic,
            opt_psi,
            opt_pi,
            act_dim,
            obs_dim,
        }
    }

    /// Policy heads for a batch of observations (eval-mode forward).
    pub fn heads(&self, obs: &[F], batch: usize) -> Vec<GaussianHead<F>> {
        let raw = self.policy.forward_eval(obs, batch);
        let width = 2 * self.act_dim;
        (0..batch)
            .map(|b| GaussianHead::from_raw(&raw[b * width..(b + 1) * width]))
            .collect()
    }

    /// TD targets `ψ̂ = φ + γ·(min ψ̄(s′,a′) − α·log π(a′|s′))` with `a′`
    /// drawn fresh from this primitive at `s′`. Plain values; nothing flows
    /// back through them.
    pub fn td_targets<R: Rng>(
        &self,
        next_obs: &[F],
        phi: &[F],
        batch: usize,
        gamma: f64,
        alpha: f64,
        rng: &mut R,
    ) -> Vec<F> {
        let d = self.critic.feat_dim;
        assert_eq!(phi.len(), batch * d, "phi length");
        let heads = self.heads(next_obs, batch);
        let mut next_act = vec![F::zero(); batch * self.act_dim];
        let mut log_probs = vec![F::zero(); batch];
        let mut noise = vec![F::zero(); self.act_dim];
        for b in 0..batch {
            for n in noise.iter_mut() {
                *n = F::standard_normal(rng);
            }
            let sample = heads[b].sample(&noise);
            next_act[b * self.act_dim..(b + 1) * self.act_dim].copy_from_slice(&sample.action);
            log_probs[b] = sample.log_prob;
        }
        let xa = concat_rows(next_obs, &next_act, batch, self.obs_dim, self.act_dim);
        let min_t = self.critic.sf_min_target(&xa, batch);
        let g = F::c(gamma);
        let al = F::c(alpha);
        let mut out = vec![F::zero(); batch * d];
        for b in 0..batch {
            let entropy_term = al * log_probs[b];
            for k in 0..d {
                let j = b * d + k;
                out[j] = phi[j] + g * (min_t[j] - entropy_term);
            }
        }
        out
    }

    /// One full soft-policy-iteration step on a minibatch: critic regression
    /// toward the shared TD target, policy ascent on the base-task objective,
    /// Polyak update of both targets.
    pub fn update<R: Rng>(
        &mut self,
        batch: &TransitionBatch<F>,
        hp: &Hyperparams,
        alpha: f64,
        rng: &mut R,
    ) -> StepStats {
        let targets = self.td_targets(&batch.next_obs, &batch.phi, batch.batch, hp.gamma, alpha, rng);
        let xa = concat_rows(&batch.obs, &batch.act, batch.batch, self.obs_dim, self.act_dim);
        let (sf_loss, grads) = sf_loss_and_grads(&self.critic, &xa, &targets, batch.batch, rng);
        for (c, g) in grads.into_iter().enumerate() {
            self.opt_psi[c].step(&mut self.critic.online[c], &g);
        }

        let (pi_objective, pi_grads, mean_log_prob) =
            primitive_objective_and_grads(self, &batch.obs, batch.batch, alpha, rng);
        self.opt_pi.step(&mut self.policy, &pi_grads);

        for c in 0..2 {
            let (targets_c, online_c) = (&mut self.critic.targets[c], &self.critic.online[c]);
            crate::nnet::polyak_update(targets_c, online_c, hp.tau).expect("tau validated");
        }

        StepStats {
            sf_loss,
            pi_objective,
            mean_log_prob,
        }
    }

}

impl Primitive<f32> {
    /// Checkpoint tensors for this primitive under `prim{index}.`.
    pub fn export_tensors(&self) -> Vec<TensorEntry> {
        let p = self.index;
        let mut out = self.policy.export_tensors(&format!("prim{p}.policy"));
        for c in 0..2 {
            out.extend(
                self.critic.online[c].export_tensors(&format!("prim{p}.critic{c}")),
            );
            out.extend(
                self.critic.targets[c].export_tensors(&format!("prim{p}.target{c}")),
            );
        }
        out
    }

    pub fn load_tensors(
        &mut self,
        entries: &std::collections::BTreeMap<String, &TensorEntry>,
    ) -> crate::Result<()> {
        let p = self.index;
        self.policy
            .load_tensors(&format!("prim{p}.policy"), entries)?;
        for c in 0..2 {
            self.critic.online[c].load_tensors(&format!("prim{p}.critic{c}"), entries)?;
            self.critic.targets[c].load_tensors(&format!("prim{p}.target{c}"), entries)?;
        }
        Ok(())
    }
}

/// Mean squared error of both online critics against a shared target,
/// summed over feature dimensions, averaged over the batch and over the two
/// networks. Returns the per-network gradients.
pub fn sf_loss_and_grads<F: Scalar, R: Rng>(
    critic: &SfCritic<F>,
    obs_act: &[F],
    targets: &[F],
    batch: usize,
    rng: &mut R,
) -> (f64, [GradStore<F>; 2]) {
    let d = critic.feat_dim;
    assert_eq!(targets.len(), batch * d, "target length");
    let inv_b = F::c(1.0 / batch as f64);
    let mut losses = [0.0f64; 2];
    let mut grads: Vec<GradStore<F>> = Vec::with_capacity(2);
    for c in 0..2 {
        let net = &critic.online[c];
        let masks = if net.has_dropout() {
            Some(net.sample_masks(batch, rng))
        } else {
            None
        };
        let mut cache = ForwardCache::default();
        let psi = net.forward(obs_act, batch, masks.as_ref(), Some(&mut cache));
        let mut upstream = vec![F::zero(); batch * d];
        let mut loss = 0.0f64;
        for j in 0..batch * d {
            let err = psi[j] - targets[j];
            loss += (err * err).as_f64();
            upstream[j] = err * inv_b;
        }
        losses[c] = loss / batch as f64;
        let (g, _) = net.backward(&cache, &upstream);
        grads.push(g);
    }
    let mut it = grads.into_iter();
    let g0 = it.next().unwrap();
    let g1 = it.next().unwrap();
    ((losses[0] + losses[1]) / 2.0, [g0, g1])
}

/// The primitive improvement objective
/// `J = E[ e_iᵀ·min ψ(s,a) − α·log π(a|s) ]` with reparameterized actions,
/// plus the gradients of `−J` w.r.t. the policy parameters (ready for a
/// minimizing optimizer).
pub fn primitive_objective_and_grads<F: Scalar, R: Rng>(
    prim: &Primitive<F>,
    obs: &[F],
    batch: usize,
    alpha: f64,
    rng: &mut R,
) -> (f64, GradStore<F>, f64) {
    let act_dim = prim.act_dim;
    let obs_dim = prim.obs_dim;
    let width = 2 * act_dim;
    let i = prim.index;
    let al = F::c(alpha);

    let mut policy_cache = ForwardCache::default();
    let raw = prim
        .policy
        .forward(obs, batch, None, Some(&mut policy_cache));

    // Reparameterized draws per row.
    let mut actions = vec![F::zero(); batch * act_dim];
    let mut all_noise = vec![F::zero(); batch * act_dim];
    let mut log_probs = vec![F::zero(); batch];
    let mut stds = vec![F::zero(); batch * act_dim];
    let mut means = vec![F::zero(); batch * act_dim];
    for b in 0..batch {
        let head = GaussianHead::from_raw(&raw[b * width..(b + 1) * width]);
        let noise_row = &mut all_noise[b * act_dim..(b + 1) * act_dim];
        for n in noise_row.iter_mut() {
            *n = F::standard_normal(rng);
        }
        let sample = head.sample(noise_row);
        actions[b * act_dim..(b + 1) * act_dim].copy_from_slice(&sample.action);
        log_probs[b] = sample.log_prob;
        for (j, s) in head.std().into_iter().enumerate() {
            stds[b * act_dim + j] = s;
        }
        means[b * act_dim..(b + 1) * act_dim].copy_from_slice(&head.mean);
    }

    // Q path through the elementwise-min critic, component e_i only.
    let xa = concat_rows(obs, &actions, batch, obs_dim, act_dim);
    let mut caches = [ForwardCache::default(), ForwardCache::default()];
    let psi0 = prim.critic.online[0].forward(&xa, batch, None, Some(&mut caches[0]));
    let psi1 = prim.critic.online[1].forward(&xa, batch, None, Some(&mut caches[1]));
    let d = prim.critic.feat_dim;

    let mut objective = 0.0f64;
    let mut upstream0 = vec![F::zero(); batch * d];
    let mut upstream1 = vec![F::zero(); batch * d];
    for b in 0..batch {
        let q0 = psi0[b * d + i];
        let q1 = psi1[b * d + i];
        let q = q0.min(q1);
        objective += (q - al * log_probs[b]).as_f64();
        if q0 <= q1 {
            upstream0[b * d + i] = F::one();
        } else {
            upstream1[b * d + i] = F::one();
        }
    }
    objective /= batch as f64;

    let dq_xa0 = prim.critic.online[0].backward_input_only(&caches[0], &upstream0);
    let dq_xa1 = prim.critic.online[1].backward_input_only(&caches[1], &upstream1);

    // Chain dJ/da and the entropy terms back onto the raw head outputs.
    // For a = tanh(mean + std·noise):
    //   dJ/da_j       = dq/da_j − α·2a_j/(1−a_j²)   (squash correction)
    //   dJ/dmean_j    = dJ/da_j · (1−a_j²)
    //   dJ/dlog_std_j = dJ/da_j · (1−a_j²)·std_j·noise_j + α
    // then through the soft mean bound and with the log_std gradient gated
    // to zero where the clamp was active.
    let inv_b = F::c(1.0 / batch as f64);
    let mut head_upstream = vec![F::zero(); batch * width];
    for b in 0..batch {
        for j in 0..act_dim {
            let a = crate::nnet::clamp_action(actions[b * act_dim + j]);
            let one_m_a2 = F::one() - a * a;
            let dq_da = dq_xa0[b * (obs_dim + act_dim) + obs_dim + j]
                + dq_xa1[b * (obs_dim + act_dim) + obs_dim + j];
            let dj_da = dq_da - al * F::c(2.0) * a / one_m_a2;
            let d_mean = dj_da * one_m_a2 * crate::nnet::mean_gate(means[b * act_dim + j]);
            let raw_log_std = raw[b * width + act_dim + j];
            let gated = raw_log_std.as_f64() > LOG_STD_MIN && raw_log_std.as_f64() < LOG_STD_MAX;
            let d_log_std = if gated {
                dj_da * one_m_a2 * stds[b * act_dim + j] * all_noise[b * act_dim + j] + al
            } else {
                F::zero()
            };
            // Gradients of −J/batch for the minimizing optimizer.
            head_upstream[b * width + j] = -d_mean * inv_b;
            head_upstream[b * width + act_dim + j] = -d_log_std * inv_b;
        }
    }

    let (pi_grads, _) = prim.policy.backward(&policy_cache, &head_upstream);
    let mean_log_prob =
        log_probs.iter().map(|v| v.as_f64()).sum::<f64>() / batch as f64;
    (objective, pi_grads, mean_log_prob)
}

/// Row-wise concatenation `[obs ‖ act]` in network input layout.
pub fn concat_rows<F: Scalar>(
    obs: &[F],
    act: &[F],
    batch: usize,
    obs_dim: usize,
    act_dim: usize,
) -> Vec<F> {
    assert_eq!(obs.len(), batch * obs_dim, "obs length");
    assert_eq!(act.len(), batch * act_dim, "act length");
    let width = obs_dim + act_dim;
    let mut out = vec![F::zero(); batch * width];
    for b in 0..batch {
        out[b * width..b * width + obs_dim].copy_from_slice(&obs[b * obs_dim..(b + 1) * obs_dim]);
        out[b * width + obs_dim..(b + 1) * width]
            .copy_from_slice(&act[b * act_dim..(b + 1) * act_dim]);
    }
    out
}
