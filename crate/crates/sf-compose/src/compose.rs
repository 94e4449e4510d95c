//! Online composition of primitives in value, policy and action space.
//!
//! Composition never trains anything: it reads the primitives' policy heads
//! and successor-feature critics and produces an action for an arbitrary
//! task weight `w`.
//!
//! - [`mcp`]: multiplicative composition with one exponent per primitive.
//!   A weighted product of Gaussians is again a Gaussian, precision-weighted.
//! - [`mca`]: one exponent per primitive *per action dimension*, the
//!   action-space generalization driven by a row-stochastic [`Kappa`].
//! - [`impact_matrix`]: `P[j,k] = |∂ψ̄_k/∂a_j|` of the primitive-averaged
//!   SF, computed by exact input differentiation of the critic networks.
//! - [`kappa`]: maps sub-task relevance into action space,
//!   `κ̂ = P̂ · (Γ_clip ⊙ w)` with the clipped SF advantage Γ.
//!
//! The four acting rules are dispatched by [`Composer::act`]; single-state
//! wrappers ([`act_msf`], [`act_sfgpi`], [`act_dac`], [`act_dacgpi`]) run a
//! batch of one for direct use and testing.

use std::cell::Cell;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nnet::{ForwardCache, GaussianHead, Scalar};
use crate::sflearn::{concat_rows, gpe, NetConfig, Primitive};

/// Acting rule names; `sac` is the single-task baseline that owns exactly
/// one primitive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sac,
    SfGpi,
    Msf,
    Dac,
    DacGpi,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Sac,
        Method::SfGpi,
        Method::Msf,
        Method::Dac,
        Method::DacGpi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sac => "sac",
            Method::SfGpi => "sfgpi",
            Method::Msf => "msf",
            Method::Dac => "dac",
            Method::DacGpi => "dacgpi",
        }
    }

    pub fn is_composition(self) -> bool {
        self != Method::Sac
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sac" => Ok(Method::Sac),
            "sfgpi" => Ok(Method::SfGpi),
            "msf" => Ok(Method::Msf),
            "dac" => Ok(Method::Dac),
            "dacgpi" => Ok(Method::DacGpi),
            other => Err(Error::config(format!(
                "unknown method '{other}' (expected sac|sfgpi|msf|dac|dacgpi)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The n primitives available for composition. Index `i` matches base task
/// `e_i`; composition methods use `n = d`, the SAC baseline `n = 1`.
pub struct PrimitiveSet {
    pub prims: Vec<Primitive<f32>>,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub feat_dim: usize,
    forward_count: Cell<u64>,
}

impl PrimitiveSet {
    /// `value_scales` conditions the critics' per-feature output range.
    pub fn new<R: Rng>(
        n: usize,
        obs_dim: usize,
        act_dim: usize,
        feat_dim: usize,
        cfg: &NetConfig,
        value_scales: &[f64],
        rng: &mut R,
    ) -> Self {
        let prims = (0..n)
            .map(|i| Primitive::new(i, obs_dim, act_dim, feat_dim, cfg, value_scales, rng))
            .collect();
        PrimitiveSet {
            prims,
            obs_dim,
            act_dim,
            feat_dim,
            forward_count: Cell::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.prims.len()
    }

    /// Total policy-network forward invocations; lets tests assert that the
    /// uniform exploration phase never touches the policies.
    pub fn policy_forward_count(&self) -> u64 {
        self.forward_count.get()
    }

    /// Policy heads of every primitive over an observation batch,
    /// indexed `[primitive][instance]`.
    pub fn heads_batch(&self, obs: &[f32], batch: usize) -> Vec<Vec<GaussianHead<f32>>> {
        let width = 2 * self.act_dim;
        self.prims
            .iter()
            .map(|p| {
                self.forward_count.set(self.forward_count.get() + 1);
                let raw = p.policy.forward_eval(obs, batch);
                (0..batch)
                    .map(|b| GaussianHead::from_raw(&raw[b * width..(b + 1) * width]))
                    .collect()
            })
            .collect()
    }

    /// `min(ψ_{θ1}, ψ_{θ2})` of primitive `i` over a batch of (obs, action)
    /// rows.
    pub fn sf_min_batch(&self, i: usize, obs: &[f32], act: &[f32], batch: usize) -> Vec<f32> {
        let xa = concat_rows(obs, act, batch, self.obs_dim, self.act_dim);
        self.prims[i].critic.sf_min(&xa, batch)
    }

    pub fn export_tensors(&self) -> Vec<crate::nnet::TensorEntry> {
        self.prims.iter().flat_map(|p| p.export_tensors()).collect()
    }

    pub fn load_tensors(
        &mut self,
        entries: &std::collections::BTreeMap<String, &crate::nnet::TensorEntry>,
    ) -> Result<()> {
        for p in &mut self.prims {
            p.load_tensors(entries)?;
        }
        Ok(())
    }
}

/// `MCP(Π, g) ∝ Π_i π_i^{g_i}`: for diagonal Gaussians the composite is the
/// precision-weighted Gaussian, per action dimension
/// `λ = Σ_i g_i/σ_i²`, `μ = (Σ_i g_i μ_i/σ_i²)/λ`.
pub fn mcp<F: Scalar>(heads: &[&GaussianHead<F>], g: &[F]) -> Result<GaussianHead<F>> {
    assert_eq!(heads.len(), g.len(), "one gate per primitive");
    assert!(!heads.is_empty(), "mcp needs at least one primitive");
    for v in g {
        assert!(*v >= F::zero(), "mcp gates must be nonnegative");
    }
    if g.iter().fold(F::zero(), |acc, v| acc + *v) <= F::zero() {
        return Err(Error::config("mcp: all-zero gating vector"));
    }
    let dim = heads[0].dim();
    let mut mean = vec![F::zero(); dim];
    let mut log_std = vec![F::zero(); dim];
    for j in 0..dim {
        let mut precision = F::zero();
        let mut weighted_mean = F::zero();
        for (head, gi) in heads.iter().zip(g) {
            debug_assert_eq!(head.dim(), dim);
            let std = head.log_std[j].exp();
            let inv_var = (std * std).recip();
            precision += *gi * inv_var;
            weighted_mean += *gi * head.mean[j] * inv_var;
        }
        mean[j] = weighted_mean / precision;
        log_std[j] = -F::c(0.5) * precision.ln();
    }
    Ok(GaussianHead { mean, log_std })
}

/// Row-stochastic gating matrix: one row per action dimension, one column
/// per primitive, each row summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Kappa {
    data: Vec<f32>,
    pub act_dim: usize,
    pub n: usize,
}

impl Kappa {
    pub fn from_rows(data: Vec<f32>, act_dim: usize, n: usize) -> Result<Self> {
        if data.len() != act_dim * n {
            return Err(Error::config("kappa shape mismatch"));
        }
        for j in 0..act_dim {
            let row = &data[j * n..(j + 1) * n];
            if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::config("kappa entries must be finite and >= 0"));
            }
            let sum: f32 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-5 {
                return Err(Error::config(format!(
                    "kappa row {j} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Kappa { data, act_dim, n })
    }

    pub fn uniform(act_dim: usize, n: usize) -> Self {
        Kappa {
            data: vec![1.0 / n as f32; act_dim * n],
            act_dim,
            n,
        }
    }

    pub fn row(&self, j: usize) -> &[f32] {
        &self.data[j * self.n..(j + 1) * self.n]
    }
}

/// `MCA(Π, κ)`: per action dimension `j`, the 1-D MCP of the primitives'
/// `j`-th components under row `κ[j,·]`.
pub fn mca(heads: &[&GaussianHead<f32>], kappa: &Kappa) -> Result<GaussianHead<f32>> {
    assert_eq!(heads.len(), kappa.n, "one kappa column per primitive");
    let dim = heads[0].dim();
    if kappa.act_dim != dim {
        return Err(Error::config(format!(
            "kappa has {} rows but action dimension is {dim}",
            kappa.act_dim
        )));
    }
    let mut mean = vec![0.0f32; dim];
    let mut log_std = vec![0.0f32; dim];
    for j in 0..dim {
        let row = kappa.row(j);
        let sum: f32 = row.iter().sum();
        if sum <= 0.0 {
            return Err(Error::config(format!("kappa row {j} is all zero")));
        }
        let mut precision = 0.0f32;
        let mut weighted_mean = 0.0f32;
        for (head, ki) in heads.iter().zip(row) {
            let std = head.log_std[j].exp();
            let inv_var = 1.0 / (std * std);
            precision += ki * inv_var;
            weighted_mean += ki * head.mean[j] * inv_var;
        }
        mean[j] = weighted_mean / precision;
        log_std[j] = -0.5 * precision.ln();
    }
    Ok(GaussianHead { mean, log_std })
}

/// `P[j,k] = |∂ψ̄_k/∂a_j|` with ψ̄ the average SF over every primitive's two
/// online critics; entries are nonnegative by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ImpactMatrix {
    /// Row-major `(act_dim, feat_dim)`.
    pub p: Vec<f32>,
    pub act_dim: usize,
    pub feat_dim: usize,
}

impl ImpactMatrix {
    pub fn get(&self, j: usize, k: usize) -> f32 {
        self.p[j * self.feat_dim + k]
    }

    pub fn mean(&self) -> f32 {
        self.p.iter().sum::<f32>() / self.p.len() as f32
    }
}

/// Impact matrix at a single (state, action); exact input differentiation in
/// eval mode (dropout off), no finite differences.
pub fn impact_matrix(prims: &PrimitiveSet, obs_row: &[f32], act_row: &[f32]) -> ImpactMatrix {
    impact_matrices(prims, obs_row, act_row, 1).pop().unwrap()
}

/// Batched impact matrices, one per row of (obs, act).
pub fn impact_matrices(
    prims: &PrimitiveSet,
    obs: &[f32],
    act: &[f32],
    batch: usize,
) -> Vec<ImpactMatrix> {
    let (odim, adim, d) = (prims.obs_dim, prims.act_dim, prims.feat_dim);
    let xa = concat_rows(obs, act, batch, odim, adim);
    let width = odim + adim;
    // Signed Jacobian of the network-averaged SF, accumulated across all
    // 2n critics; absolute value taken at the end.
    let mut jac = vec![0.0f32; batch * adim * d];
    let n_nets = (2 * prims.n()) as f32;
    let mut upstream = vec![0.0f32; batch * d];
    for prim in &prims.prims {
        for net in &prim.critic.online {
            let mut cache = ForwardCache::default();
            net.forward(&xa, batch, None, Some(&mut cache));
            for k in 0..d {
                for v in upstream.iter_mut() {
                    *v = 0.0;
                }
                for b in 0..batch {
                    upstream[b * d + k] = 1.0;
                }
                let input_grad = net.backward_input_only(&cache, &upstream);
                for b in 0..batch {
                    for j in 0..adim {
                        jac[(b * adim + j) * d + k] += input_grad[b * width + odim + j];
                    }
                }
            }
        }
    }
    (0..batch)
        .map(|b| {
            let p = jac[b * adim * d..(b + 1) * adim * d]
                .iter()
                .map(|v| (v / n_nets).abs())
                .collect();
            ImpactMatrix {
                p,
                act_dim: adim,
                feat_dim: d,
            }
        })
        .collect()
}

/// Temporal smoothing: `P̂ = (P_prev + P_t)/2`.
pub fn smooth_impact(prev: &ImpactMatrix, cur: &ImpactMatrix) -> ImpactMatrix {
    assert_eq!(prev.p.len(), cur.p.len(), "impact matrix shapes");
    ImpactMatrix {
        p: prev
            .p
            .iter()
            .zip(&cur.p)
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
        act_dim: cur.act_dim,
        feat_dim: cur.feat_dim,
    }
}

/// Gating from SF relevance: `Γ = Ψ − rowmean(Ψ)`, `Γ_clip = max(0, Γ)`,
/// `κ̂ = P̂ · (Γ_clip ⊙ w)`, rows ℓ1-normalized. All-zero rows fall back to
/// uniform weights so acting stays defined early in training.
///
/// `psi` is the d×n matrix whose column `i` is primitive i's SF at its own
/// sampled action. Returns the normalized κ and the raw κ̂.
pub fn kappa(p_hat: &ImpactMatrix, psi: &[f32], w: &[f32]) -> (Kappa, Vec<f32>) {
    let d = p_hat.feat_dim;
    let adim = p_hat.act_dim;
    assert_eq!(w.len(), d, "task weight length");
    assert_eq!(psi.len() % d, 0, "psi must be d x n");
    let n = psi.len() / d;

    // Γ_clip ⊙ w, row k scaled by w_k.
    let mut gated = vec![0.0f32; d * n];
    for k in 0..d {
        let row = &psi[k * n..(k + 1) * n];
        let mean = row.iter().sum::<f32>() / n as f32;
        for i in 0..n {
            let adv = (row[i] - mean).max(0.0);
            gated[k * n + i] = adv * w[k];
        }
    }

    let mut khat = vec![0.0f32; adim * n];
    for j in 0..adim {
        for i in 0..n {
            let mut acc = 0.0f32;
            for k in 0..d {
                acc += p_hat.get(j, k) * gated[k * n + i];
            }
            khat[j * n + i] = acc;
        }
    }

    let mut data = vec![0.0f32; adim * n];
    for j in 0..adim {
        let row = &khat[j * n..(j + 1) * n];
        let sum: f32 = row.iter().sum();
        if sum > 0.0 {
            for i in 0..n {
                data[j * n + i] = row[i] / sum;
            }
        } else {
            for i in 0..n {
                data[j * n + i] = 1.0 / n as f32;
            }
        }
    }
    (
        Kappa {
            data,
            act_dim: adim,
            n,
        },
        khat,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    /// Sample candidate and composite actions.
    Stochastic,
    /// Use distribution means; argmax-style selection steps are kept.
    Deterministic,
}

/// Per-step acting diagnostics, filled when [`Composer::collect_diagnostics`]
/// is set. Feeds the κ heatmap and selection dumps.
#[derive(Clone, Debug, Default)]
pub struct ActDiagnostics {
    /// Normalized κ per instance, row-major `(batch, act_dim, n)`.
    pub kappa: Vec<f32>,
    /// Selected primitive per instance (SF-GPI) or per instance×dimension
    /// (DAC-GPI); empty for other rules.
    pub selected: Vec<usize>,
    /// Mean P̂ entry per instance.
    pub p_hat_mean: Vec<f32>,
}

/// Owns the per-instance impact-matrix smoothing state and dispatches the
/// acting rules over an environment batch.
pub struct Composer {
    pub method: Method,
    /// Score every primitive's critic on every candidate action instead of
    /// the diagonal evaluation (SF-GPI only; no correctness claim).
    pub gpi_cross_eval: bool,
    pub collect_diagnostics: bool,
    pub last_diagnostics: ActDiagnostics,
    smoothing: Vec<Option<ImpactMatrix>>,
}

impl Composer {
    pub fn new(method: Method, batch: usize) -> Self {
        Composer {
            method,
            gpi_cross_eval: false,
            collect_diagnostics: false,
            last_diagnostics: ActDiagnostics::default(),
            smoothing: vec![None; batch],
        }
    }

    /// Clears impact smoothing; call on episode boundaries.
    pub fn reset_episode(&mut self) {
        for s in &mut self.smoothing {
            *s = None;
        }
    }

    /// Actions for a batch of instances. `ws` holds one task-weight row per
    /// instance (ignored by SAC).
    pub fn act<R: Rng>(
        &mut self,
        prims: &PrimitiveSet,
        obs: &[f32],
        ws: &[f32],
        batch: usize,
        mode: ActMode,
        rng: &mut R,
    ) -> Result<Vec<f32>> {
        assert_eq!(obs.len(), batch * prims.obs_dim, "obs length");
        assert_eq!(self.smoothing.len(), batch, "composer batch mismatch");
        let adim = prims.act_dim;
        let d = prims.feat_dim;
        if self.method.is_composition() {
            assert_eq!(ws.len(), batch * d, "task weight rows");
        }
        if self.collect_diagnostics {
            self.last_diagnostics = ActDiagnostics::default();
        }

        let heads = prims.heads_batch(obs, batch);
        let n = prims.n();
        let mut actions = vec![0.0f32; batch * adim];

        match self.method {
            Method::Sac => {
                for b in 0..batch {
                    let a = match mode {
                        ActMode::Stochastic => heads[0][b].sample(&normal_row(adim, rng)).action,
                        ActMode::Deterministic => heads[0][b].mean_action(),
                    };
                    actions[b * adim..(b + 1) * adim].copy_from_slice(&a);
                }
            }
            Method::Msf => {
                for b in 0..batch {
                    let w = &ws[b * d..(b + 1) * d];
                    let g = msf_gates(w)?;
                    let heads_b: Vec<&GaussianHead<f32>> =
                        (0..n).map(|i| &heads[i][b]).collect();
                    let composite = mcp(&heads_b, &g)?;
                    let a = match mode {
                        ActMode::Stochastic => composite.sample(&normal_row(adim, rng)).action,
                        ActMode::Deterministic => composite.mean_action(),
                    };
                    actions[b * adim..(b + 1) * adim].copy_from_slice(&a);
                }
            }
            Method::SfGpi => {
                let candidates = sample_candidates(&heads, batch, adim, mode, rng);
                // ψ of each primitive at its own candidate.
                let psi_own: Vec<Vec<f32>> = (0..n)
                    .map(|i| prims.sf_min_batch(i, obs, &candidates[i], batch))
                    .collect();
                for b in 0..batch {
                    let w = &ws[b * d..(b + 1) * d];
                    let mut best = (0usize, f32::NEG_INFINITY);
                    if self.gpi_cross_eval {
                        for i in 0..n {
                            for j in 0..n {
                                let xa_row = concat_rows(
                                    &obs[b * prims.obs_dim..(b + 1) * prims.obs_dim],
                                    &candidates[j][b * adim..(b + 1) * adim],
                                    1,
                                    prims.obs_dim,
                                    adim,
                                );
                                let psi = prims.prims[i].critic.sf_min(&xa_row, 1);
                                let q = gpe(&psi, w);
                                if q > best.1 {
                                    best = (j, q);
                                }
                            }
                        }
                    } else {
                        for i in 0..n {
                            let q = gpe(&psi_own[i][b * d..(b + 1) * d], w);
                            if q > best.1 {
                                best = (i, q);
                            }
                        }
                    }
                    actions[b * adim..(b + 1) * adim]
                        .copy_from_slice(&candidates[best.0][b * adim..(b + 1) * adim]);
                    if self.collect_diagnostics {
                        self.last_diagnostics.selected.push(best.0);
                    }
                }
            }
            Method::Dac | Method::DacGpi => {
                let candidates = sample_candidates(&heads, batch, adim, mode, rng);
                let psi_own: Vec<Vec<f32>> = (0..n)
                    .map(|i| prims.sf_min_batch(i, obs, &candidates[i], batch))
                    .collect();
                // Jacobian averaged over every primitive's candidate action;
                // one evaluation point per primitive keeps P̂ smoother than a
                // single probe.
                let mut p_t: Vec<ImpactMatrix> = impact_matrices(prims, obs, &candidates[0], batch);
                for cand in candidates.iter().skip(1) {
                    for (acc, cur) in p_t.iter_mut().zip(impact_matrices(prims, obs, cand, batch)) {
                        for (a, c) in acc.p.iter_mut().zip(&cur.p) {
                            *a += c;
                        }
                    }
                }
                for m in p_t.iter_mut() {
                    for v in m.p.iter_mut() {
                        *v /= n as f32;
                    }
                }
                for (b, p_t_b) in p_t.into_iter().enumerate() {
                    let w = &ws[b * d..(b + 1) * d];
                    let p_hat = match &self.smoothing[b] {
                        Some(prev) => smooth_impact(prev, &p_t_b),
                        None => p_t_b.clone(),
                    };
                    // Ψ as d×n: column i is primitive i at its own action.
                    let mut psi = vec![0.0f32; d * n];
                    for i in 0..n {
                        for k in 0..d {
                            psi[k * n + i] = psi_own[i][b * d + k];
                        }
                    }
                    let (kap, khat) = kappa(&p_hat, &psi, w);
                    let heads_b: Vec<&GaussianHead<f32>> =
                        (0..n).map(|i| &heads[i][b]).collect();
                    let row = &mut actions[b * adim..(b + 1) * adim];
                    match self.method {
                        Method::Dac => {
                            let composite = mca(&heads_b, &kap)?;
                            let a = match mode {
                                ActMode::Stochastic => {
                                    composite.sample(&normal_row(adim, rng)).action
                                }
                                ActMode::Deterministic => composite.mean_action(),
                            };
                            row.copy_from_slice(&a);
                        }
                        Method::DacGpi => {
                            for j in 0..adim {
                                let krow = &khat[j * n..(j + 1) * n];
                                let mut best = (0usize, f32::NEG_INFINITY);
                                for (i, v) in krow.iter().enumerate() {
                                    if *v > best.1 {
                                        best = (i, *v);
                                    }
                                }
                                row[j] = candidates[best.0][b * adim + j];
                                if self.collect_diagnostics {
                                    self.last_diagnostics.selected.push(best.0);
                                }
                            }
                        }
                        _ => unreachable!(),
                    }
                    if self.collect_diagnostics {
                        self.last_diagnostics.kappa.extend(
                            (0..adim).flat_map(|j| kap.row(j).to_vec()),
                        );
                        self.last_diagnostics.p_hat_mean.push(p_hat.mean());
                    }
                    self.smoothing[b] = Some(p_hat);
                }
            }
        }
        Ok(actions)
    }
}

/// Normalized MSF gates `g = w/‖w‖₁`; negative weights are outside MCP
/// validity and all-zero weights leave the gating undefined.
fn msf_gates(w: &[f32]) -> Result<Vec<f32>> {
    if w.iter().any(|v| *v < 0.0) {
        return Err(Error::config(
            "msf requires nonnegative task weights (outside MCP validity)",
        ));
    }
    let sum: f32 = w.iter().sum();
    if sum <= 0.0 {
        return Err(Error::config("msf: task weight is all zero"));
    }
    Ok(w.iter().map(|v| v / sum).collect())
}

/// One candidate action per primitive per instance, `[primitive][batch*adim]`.
fn sample_candidates<R: Rng>(
    heads: &[Vec<GaussianHead<f32>>],
    batch: usize,
    adim: usize,
    mode: ActMode,
    rng: &mut R,
) -> Vec<Vec<f32>> {
    heads
        .iter()
        .map(|per_instance| {
            let mut out = vec![0.0f32; batch * adim];
            for (b, head) in per_instance.iter().enumerate() {
                let a = match mode {
                    ActMode::Stochastic => head.sample(&normal_row(adim, rng)).action,
                    ActMode::Deterministic => head.mean_action(),
                };
                out[b * adim..(b + 1) * adim].copy_from_slice(&a);
            }
            out
        })
        .collect()
}

fn normal_row<R: Rng>(dim: usize, rng: &mut R) -> Vec<f32> {
    (0..dim).map(|_| f32::standard_normal(rng)).collect()
}

/// Single-state MSF: sample from `MCP(Π(·|s), w/‖w‖₁)`.
pub fn act_msf<R: Rng>(
    prims: &PrimitiveSet,
    obs_row: &[f32],
    w: &[f32],
    mode: ActMode,
    rng: &mut R,
) -> Result<Vec<f32>> {
    Composer::new(Method::Msf, 1).act(prims, obs_row, w, 1, mode, rng)
}

/// Single-state SF-GPI: each primitive samples an action, the one whose own
/// critic scores highest on `w` wins (ties to the lowest index).
pub fn act_sfgpi<R: Rng>(
    prims: &PrimitiveSet,
    obs_row: &[f32],
    w: &[f32],
    mode: ActMode,
    rng: &mut R,
) -> Result<Vec<f32>> {
    Composer::new(Method::SfGpi, 1).act(prims, obs_row, w, 1, mode, rng)
}

/// Single-state DAC with no smoothing history.
pub fn act_dac<R: Rng>(
    prims: &PrimitiveSet,
    obs_row: &[f32],
    w: &[f32],
    mode: ActMode,
    rng: &mut R,
) -> Result<Vec<f32>> {
    Composer::new(Method::Dac, 1).act(prims, obs_row, w, 1, mode, rng)
}

/// Single-state DAC-GPI with no smoothing history.
pub fn act_dacgpi<R: Rng>(
    prims: &PrimitiveSet,
    obs_row: &[f32],
    w: &[f32],
    mode: ActMode,
    rng: &mut R,
) -> Result<Vec<f32>> {
    Composer::new(Method::DacGpi, 1).act(prims, obs_row, w, 1, mode, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{Activation, Layer, Mlp};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn head(mean: &[f64], std: &[f64]) -> GaussianHead<f64> {
        GaussianHead {
            mean: mean.to_vec(),
            log_std: std.iter().map(|s| s.ln()).collect(),
        }
    }

    fn head32(mean: &[f32], std: &[f32]) -> GaussianHead<f32> {
        GaussianHead {
            mean: mean.to_vec(),
            log_std: std.iter().map(|s| s.ln()).collect(),
        }
    }

    /// Numerically normalized weighted product of Gaussian densities,
    /// evaluated at `x` (Simpson quadrature for the partition function).
    fn product_density_oracle(
        means: &[f64],
        stds: &[f64],
        g: &[f64],
        x: f64,
    ) -> f64 {
        let log_unnorm = |u: f64| -> f64 {
            means
                .iter()
                .zip(stds)
                .zip(g)
                .map(|((m, s), gi)| {
                    gi * (-0.5 * ((u - m) / s).powi(2) - s.ln()
                        - 0.5 * (2.0 * std::f64::consts::PI).ln())
                })
                .sum()
        };
        let lo = means.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0;
        let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0;
        let steps = 40_000usize; // even
        let h = (hi - lo) / steps as f64;
        let mut z = log_unnorm(lo).exp() + log_unnorm(hi).exp();
        for i in 1..steps {
            let u = lo + i as f64 * h;
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            z += w * log_unnorm(u).exp();
        }
        z *= h / 3.0;
        log_unnorm(x).exp() / z
    }

    #[test]
    fn mcp_identical_primitives_is_idempotent() {
        let a = head(&[0.3, -0.7], &[0.5, 1.5]);
        let b = a.clone();
        let c = mcp(&[&a, &b], &[0.25, 0.75]).unwrap();
        for j in 0..2 {
            assert!((c.mean[j] - a.mean[j]).abs() < 1e-12);
            assert!((c.log_std[j] - a.log_std[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mcp_unit_gaussians_average_to_unit_gaussian() {
        // N(0,1) and N(2,1) with g=(0.5,0.5): precision 1, mean 1 → N(1,1).
        let a = head(&[0.0], &[1.0]);
        let b = head(&[2.0], &[1.0]);
        let c = mcp(&[&a, &b], &[0.5, 0.5]).unwrap();
        assert!((c.mean[0] - 1.0).abs() < 1e-12);
        assert!(c.log_std[0].abs() < 1e-12);
    }

    #[test]
    fn mcp_one_hot_gate_selects_primitive_exactly() {
        let a = head(&[0.3], &[0.7]);
        let b = head(&[-1.2], &[0.1]);
        let c = mcp(&[&a, &b], &[1.0, 0.0]).unwrap();
        assert_eq!(c.mean[0], a.mean[0]);
        assert!((c.log_std[0] - a.log_std[0]).abs() < 1e-15);
    }

    #[test]
    fn mcp_rejects_all_zero_gates() {
        let a = head(&[0.0], &[1.0]);
        assert!(mcp(&[&a], &[0.0]).is_err());
    }

    #[test]
    fn mcp_closed_form_matches_quadrature_product() {
        let means = [0.4, -1.1, 2.3];
        let stds = [0.6, 1.7, 0.9];
        let g = [0.5, 0.2, 0.3];
        let heads: Vec<GaussianHead<f64>> = means
            .iter()
            .zip(&stds)
            .map(|(m, s)| head(&[*m], &[*s]))
            .collect();
        let refs: Vec<&GaussianHead<f64>> = heads.iter().collect();
        let c = mcp(&refs, &g).unwrap();
        let sigma = c.log_std[0].exp();
        for x in [-2.0, -0.5, 0.0, 0.4, 1.0, 2.2] {
            let closed = (-0.5 * ((x - c.mean[0]) / sigma).powi(2)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let numeric = product_density_oracle(&means, &stds, &g, x);
            assert!(
                (closed - numeric).abs() < 1e-6,
                "x={x}: closed {closed} vs quadrature {numeric}"
            );
        }
    }

    #[test]
    fn mca_with_constant_rows_equals_mcp() {
        let a = head32(&[0.3, -0.9], &[0.5, 2.0]);
        let b = head32(&[1.1, 0.2], &[1.0, 0.25]);
        let g = [0.7f32, 0.3];
        let kap = Kappa::from_rows(vec![0.7, 0.3, 0.7, 0.3], 2, 2).unwrap();
        let via_mcp = mcp(&[&a, &b], &g).unwrap();
        let via_mca = mca(&[&a, &b], &kap).unwrap();
        assert_eq!(via_mcp.mean, via_mca.mean);
        assert_eq!(via_mcp.log_std, via_mca.log_std);
    }

    #[test]
    fn mca_one_hot_row_copies_that_primitive() {
        let a = head32(&[0.3, -0.9], &[0.5, 2.0]);
        let b = head32(&[1.1, 0.2], &[1.0, 0.25]);
        let kap = Kappa::from_rows(vec![1.0, 0.0, 0.0, 1.0], 2, 2).unwrap();
        let c = mca(&[&a, &b], &kap).unwrap();
        assert_eq!(c.mean[0], a.mean[0]);
        assert_eq!(c.mean[1], b.mean[1]);
        assert!((c.log_std[0] - a.log_std[0]).abs() < 1e-6);
        assert!((c.log_std[1] - b.log_std[1]).abs() < 1e-6);
    }

    #[test]
    fn mca_quadrature_check_1d() {
        // Two primitives, one action dimension, row (0.8, 0.2).
        let a = head(&[-1.0], &[0.5]);
        let b = head(&[1.0], &[2.0]);
        let c64 = mcp(&[&a, &b], &[0.8, 0.2]).unwrap();
        let sigma = c64.log_std[0].exp();
        for x in [-1.5, -1.0, -0.2, 0.6] {
            let closed = (-0.5 * ((x - c64.mean[0]) / sigma).powi(2)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            let numeric = product_density_oracle(&[-1.0, 1.0], &[0.5, 2.0], &[0.8, 0.2], x);
            assert!((closed - numeric).abs() < 1e-6, "x={x}");
        }
    }

    /// A primitive set whose critics are hand-set linear maps ψ = Mᵀa + c.
    /// `rows[i]` gives primitive i's (feat × (obs+act)) weight matrix.
    fn linear_prims(
        obs_dim: usize,
        act_dim: usize,
        feat_dim: usize,
        weights: &[Vec<f32>],
        bias: &[Vec<f32>],
    ) -> PrimitiveSet {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = NetConfig {
            hidden: vec![8],
            critic_dropout: 0.0,
            ..NetConfig::default()
        };
        let mut prims = PrimitiveSet::new(weights.len(), obs_dim, act_dim, feat_dim, &cfg, &vec![1.0; feat_dim], &mut rng);
        for (i, prim) in prims.prims.iter_mut().enumerate() {
            let lin = Mlp {
                output_scales: Vec::new(),
                layers: vec![Layer {
                    w: weights[i].clone(),
                    b: bias[i].clone(),
                    in_dim: obs_dim + act_dim,
                    out_dim: feat_dim,
                    activation: Activation::Linear,
                    layernorm: false,
                    dropout: 0.0,
                }],
            };
            prim.critic.online = [lin.clone(), lin.clone()];
            prim.critic.targets = [lin.clone(), lin];
        }
        prims
    }

    #[test]
    fn impact_matrix_zero_for_action_blind_critic() {
        // Critic weights only on the observation inputs.
        let w = vec![vec![1.0, -2.0, 0.0, 0.0]]; // feat=1, obs=2, act=2
        let prims = linear_prims(2, 2, 1, &w, &[vec![3.0]]);
        let p = impact_matrix(&prims, &[0.4, -0.2], &[0.1, 0.9]);
        assert_eq!(p.p, vec![0.0, 0.0]);
    }

    #[test]
    fn impact_matrix_of_linear_critic_is_abs_weights() {
        // ψ_k = Σ_j M[k,j]·a_j → P[j,k] = |M[k,j]| exactly.
        let m = vec![
            vec![0.0, 0.5, -2.0, 0.0, -1.0, 3.0], // feat 2 × (obs 1 + act 2)
        ];
        let prims = linear_prims(1, 2, 2, &m, &[vec![0.0, 0.0]]);
        let p = impact_matrix(&prims, &[0.7], &[0.1, -0.1]);
        // M rows: feat0 = (obs 0.0, a0 0.5, a1 −2.0), feat1 = (0.0, −1.0, 3.0).
        assert_eq!(p.get(0, 0), 0.5);
        assert_eq!(p.get(0, 1), 1.0);
        assert_eq!(p.get(1, 0), 2.0);
        assert_eq!(p.get(1, 1), 3.0);
    }

    #[test]
    fn impact_matrix_matches_finite_differences_on_random_critic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = NetConfig {
            hidden: vec![16, 16],
            critic_dropout: 0.0,
            critic_value_scale: 1.0,
            ..NetConfig::default()
        };
        let prims = PrimitiveSet::new(2, 3, 2, 2, &cfg, &[1.0; 2], &mut rng);
        let obs = [0.3f32, -0.5, 0.8];
        let act = [0.2f32, -0.4];
        let p = impact_matrix(&prims, &obs, &act);

        let h = 1e-3f32;
        let avg_psi = |a: &[f32]| -> Vec<f32> {
            let mut acc = vec![0.0f32; 2];
            for prim in &prims.prims {
                for net in &prim.critic.online {
                    let xa = concat_rows(&obs, a, 1, 3, 2);
                    let out = net.forward_eval(&xa, 1);
                    for k in 0..2 {
                        acc[k] += out[k] / 4.0;
                    }
                }
            }
            acc
        };
        for j in 0..2 {
            let mut ap = act.to_vec();
            ap[j] += h;
            let plus = avg_psi(&ap);
            ap[j] = act[j] - h;
            let minus = avg_psi(&ap);
            for k in 0..2 {
                let numeric = ((plus[k] - minus[k]) / (2.0 * h)).abs();
                assert!(
                    (p.get(j, k) - numeric).abs() < 1e-3,
                    "P[{j},{k}] = {} vs fd {numeric}",
                    p.get(j, k)
                );
            }
        }
    }

    #[test]
    fn batched_impact_matches_single_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cfg = NetConfig {
            hidden: vec![8],
            critic_dropout: 0.0,
            ..NetConfig::default()
        };
        let prims = PrimitiveSet::new(2, 2, 2, 2, &cfg, &[1.0; 2], &mut rng);
        let obs = [0.1f32, 0.2, -0.3, 0.4, 0.5, -0.6];
        let act = [0.9f32, -0.9, 0.0, 0.5, -0.2, 0.1];
        let batched = impact_matrices(&prims, &obs, &act, 3);
        for b in 0..3 {
            let single = impact_matrix(&prims, &obs[b * 2..(b + 1) * 2], &act[b * 2..(b + 1) * 2]);
            assert_eq!(batched[b], single);
        }
    }

    #[test]
    fn smoothing_examples() {
        let p = |v: Vec<f32>| ImpactMatrix {
            p: v,
            act_dim: 1,
            feat_dim: 2,
        };
        let a = p(vec![1.0, 3.0]);
        assert_eq!(smooth_impact(&a, &a).p, vec![1.0, 3.0]);
        let zero = p(vec![0.0, 0.0]);
        assert_eq!(smooth_impact(&zero, &a).p, vec![0.5, 1.5]);
        // Alternating 0/1 keeps oscillating in {1/2} after the first step.
        let one = p(vec![1.0, 1.0]);
        let zero1 = p(vec![0.0, 0.0]);
        let s1 = smooth_impact(&one, &zero1);
        assert_eq!(s1.p, vec![0.5, 0.5]);
        let s2 = smooth_impact(&zero1, &one);
        assert_eq!(s2.p, vec![0.5, 0.5]);
    }

    #[test]
    fn kappa_hand_example() {
        // d=n=2, P̂=I, w=(1,0), Ψ=I → first row one-hot, second uniform
        // fallback (its weight w₂=0 zeroes the row).
        let p_hat = ImpactMatrix {
            p: vec![1.0, 0.0, 0.0, 1.0],
            act_dim: 2,
            feat_dim: 2,
        };
        let psi = vec![1.0, 0.0, 0.0, 1.0];
        let (kap, khat) = kappa(&p_hat, &psi, &[1.0, 0.0]);
        assert_eq!(kap.row(0), &[1.0, 0.0]);
        assert_eq!(kap.row(1), &[0.5, 0.5]);
        assert_eq!(khat, vec![0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn kappa_uniform_fallback_when_primitives_identical() {
        let p_hat = ImpactMatrix {
            p: vec![0.5, 0.5, 0.5, 0.5],
            act_dim: 2,
            feat_dim: 2,
        };
        // Identical columns → zero advantage everywhere.
        let psi = vec![2.0, 2.0, -1.0, -1.0];
        let (kap, _) = kappa(&p_hat, &psi, &[1.0, 1.0]);
        assert_eq!(kap.row(0), &[0.5, 0.5]);
        assert_eq!(kap.row(1), &[0.5, 0.5]);
    }

    proptest::proptest! {
        /// κ rows always sum to one and are invariant under positive
        /// rescaling of w.
        #[test]
        fn kappa_rows_stochastic_and_scale_invariant(
            psi in proptest::collection::vec(-3.0f32..3.0, 6),
            p in proptest::collection::vec(0.0f32..2.0, 6),
            w in proptest::collection::vec(0.0f32..2.0, 3),
            c in 0.1f32..10.0,
        ) {
            let p_hat = ImpactMatrix { p, act_dim: 2, feat_dim: 3 };
            let (kap, _) = kappa(&p_hat, &psi, &w);
            for j in 0..2 {
                let sum: f32 = kap.row(j).iter().sum();
                proptest::prop_assert!((sum - 1.0).abs() < 1e-5);
                proptest::prop_assert!(kap.row(j).iter().all(|v| *v >= 0.0));
            }
            let scaled: Vec<f32> = w.iter().map(|v| v * c).collect();
            let (kap2, _) = kappa(&p_hat, &psi, &scaled);
            for (a, b) in kap.data.iter().zip(&kap2.data) {
                proptest::prop_assert!((a - b).abs() < 1e-5);
            }
        }
    }

    /// Primitives with distinct fixed heads for acting-rule tests.
    fn two_primitive_set() -> PrimitiveSet {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = NetConfig {
            hidden: vec![8],
            critic_dropout: 0.0,
            ..NetConfig::default()
        };
        let mut prims = PrimitiveSet::new(2, 2, 2, 2, &cfg, &[1.0; 2], &mut rng);
        // Policy nets that ignore the state: output layer bias sets the
        // head; zero all weights.
        for (i, prim) in prims.prims.iter_mut().enumerate() {
            for layer in &mut prim.policy.layers {
                for w in layer.w.iter_mut() {
                    *w = 0.0;
                }
                for b in layer.b.iter_mut() {
                    *b = 0.0;
                }
            }
            let last = prim.policy.layers.len() - 1;
            let sign = if i == 0 { 1.0 } else { -1.0 };
            // mean = (±0.8, ∓0.4), log_std = (−1, −2).
            prim.policy.layers[last].b = vec![0.8 * sign, -0.4 * sign, -1.0, -2.0];
        }
        prims
    }

    #[test]
    fn msf_one_hot_weight_selects_primitive_distribution() {
        let prims = two_primitive_set();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let heads = prims.heads_batch(&[0.0, 0.0], 1);
        let expect = heads[0][0].mean_action();
        let a = act_msf(
            &prims,
            &[0.0, 0.0],
            &[1.0, 0.0],
            ActMode::Deterministic,
            &mut rng,
        )
        .unwrap();
        // One-hot gating reproduces the primitive up to division round-off.
        for (x, y) in a.iter().zip(&expect) {
            assert!((x - y).abs() <= f32::EPSILON, "{a:?} vs {expect:?}");
        }
    }

    #[test]
    fn msf_mirrored_primitives_give_zero_mean() {
        let prims = two_primitive_set();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = act_msf(
            &prims,
            &[0.0, 0.0],
            &[0.5, 0.5],
            ActMode::Deterministic,
            &mut rng,
        )
        .unwrap();
        // Equal stds per dimension and mirrored means cancel exactly.
        assert!(a[0].abs() < 1e-6 && a[1].abs() < 1e-6, "{a:?}");
    }

    #[test]
    fn msf_rejects_negative_weights() {
        let prims = two_primitive_set();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let err = act_msf(
            &prims,
            &[0.0, 0.0],
            &[0.5, -0.5],
            ActMode::Stochastic,
            &mut rng,
        );
        assert!(err.is_err());
    }

    #[test]
    fn sfgpi_returns_action_of_best_scoring_primitive() {
        // Hand-built critics with known values: Q = (0.2, 0.9) → primitive 1.
        let weights = vec![vec![0.0; 8], vec![0.0; 8]];
        let bias = vec![vec![0.2, 0.0], vec![0.9, 0.0]];
        let mut prims = linear_prims(2, 2, 2, &weights, &bias);
        // Give the two primitives distinct deterministic heads.
        for (i, prim) in prims.prims.iter_mut().enumerate() {
            for layer in &mut prim.policy.layers {
                layer.w.iter_mut().for_each(|w| *w = 0.0);
                layer.b.iter_mut().for_each(|b| *b = 0.0);
            }
            let last = prim.policy.layers.len() - 1;
            let m = if i == 0 { 0.5 } else { -0.5 };
            prim.policy.layers[last].b = vec![m, m, -3.0, -3.0];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = act_sfgpi(
            &prims,
            &[0.0, 0.0],
            &[1.0, 0.0],
            ActMode::Deterministic,
            &mut rng,
        )
        .unwrap();
        let expect = prims.heads_batch(&[0.0, 0.0], 1)[1][0].mean_action();
        assert_eq!(a, expect);
    }

    #[test]
    fn single_primitive_rules_degenerate_to_that_primitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = NetConfig {
            hidden: vec![8],
            critic_dropout: 0.0,
            ..NetConfig::default()
        };
        let prims = PrimitiveSet::new(1, 2, 2, 1, &cfg, &[1.0], &mut rng);
        let obs = [0.3f32, -0.3];
        let expect = prims.heads_batch(&obs, 1)[0][0].mean_action();
        for rule in [act_sfgpi, act_dacgpi] {
            let a = rule(&prims, &obs, &[1.0], ActMode::Deterministic, &mut rng).unwrap();
            assert_eq!(a, expect);
        }
    }

    #[test]
    fn dac_uniform_fallback_equals_uniform_mcp() {
        // Identical critics for both primitives → zero advantage → uniform κ,
        // so DAC reduces to MCP with uniform gates.
        let weights = vec![vec![0.0; 8], vec![0.0; 8]];
        let bias = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let mut prims = linear_prims(2, 2, 2, &weights, &bias);
        for (i, prim) in prims.prims.iter_mut().enumerate() {
            for layer in &mut prim.policy.layers {
                layer.w.iter_mut().for_each(|w| *w = 0.0);
                layer.b.iter_mut().for_each(|b| *b = 0.0);
            }
            let last = prim.policy.layers.len() - 1;
            let sign = if i == 0 { 1.0 } else { -1.0 };
            prim.policy.layers[last].b = vec![0.6 * sign, 0.2, -1.0, -1.5];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = act_dac(
            &prims,
            &[0.1, 0.1],
            &[1.0, 1.0],
            ActMode::Deterministic,
            &mut rng,
        )
        .unwrap();
        let heads = prims.heads_batch(&[0.1, 0.1], 1);
        let composite = mcp(&[&heads[0][0], &heads[1][0]], &[0.5, 0.5]).unwrap();
        assert_eq!(a, composite.mean_action());
    }

    #[test]
    fn dacgpi_copies_per_dimension_from_khat_argmax() {
        // Make κ̂ favor primitive 0 on dim 0 and primitive 1 on dim 1 via
        // axis-separable critics: ψ_k responds only to a_k, primitive i is
        // only good at feature i.
        let weights = vec![
            // primitive 0: feature 0 reacts to a0 (input layout: obs0,obs1,a0,a1)
            vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            // primitive 1: feature 1 reacts to a1
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5],
        ];
        let bias = vec![vec![10.0, 0.0], vec![0.0, 10.0]];
        let mut prims = linear_prims(2, 2, 2, &weights, &bias);
        for (i, prim) in prims.prims.iter_mut().enumerate() {
            for layer in &mut prim.policy.layers {
                layer.w.iter_mut().for_each(|w| *w = 0.0);
                layer.b.iter_mut().for_each(|b| *b = 0.0);
            }
            let last = prim.policy.layers.len() - 1;
            let m = if i == 0 { 0.7 } else { -0.7 };
            prim.policy.layers[last].b = vec![m, m, -3.0, -3.0];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let a = act_dacgpi(
            &prims,
            &[0.0, 0.0],
            &[1.0, 1.0],
            ActMode::Deterministic,
            &mut rng,
        )
        .unwrap();
        let heads = prims.heads_batch(&[0.0, 0.0], 1);
        assert_eq!(a[0], heads[0][0].mean_action()[0], "dim 0 from primitive 0");
        assert_eq!(a[1], heads[1][0].mean_action()[1], "dim 1 from primitive 1");
    }

    #[test]
    fn dac_suppresses_compositional_noise_with_separable_critics() {
        // Axis-separable construction: DAC's κ weight on the off-axis
        // ("noise") primitive stays below 0.2 while MSF's gate is 0.5.
        let weights = vec![
            vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5],
        ];
        let bias = vec![vec![10.0, 0.0], vec![0.0, 10.0]];
        let prims = linear_prims(2, 2, 2, &weights, &bias);
        let mut composer = Composer::new(Method::Dac, 1);
        composer.collect_diagnostics = true;
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        composer
            .act(
                &prims,
                &[0.2, -0.4],
                &[1.0, 1.0],
                1,
                ActMode::Stochastic,
                &mut rng,
            )
            .unwrap();
        let kap = &composer.last_diagnostics.kappa;
        // Row 0 (a_x): noise primitive is 1; row 1 (a_y): noise primitive 0.
        assert!(kap[1] < 0.2, "a_x noise weight {}", kap[1]);
        assert!(kap[2] < 0.2, "a_y noise weight {}", kap[2]);
        let g = msf_gates(&[1.0, 1.0]).unwrap();
        assert!(g[0] >= 0.5 && g[1] >= 0.5);
    }

    #[test]
    fn forward_count_tracks_policy_usage() {
        let prims = two_primitive_set();
        assert_eq!(prims.policy_forward_count(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        act_msf(&prims, &[0.0, 0.0], &[1.0, 0.0], ActMode::Stochastic, &mut rng).unwrap();
        assert_eq!(prims.policy_forward_count(), 2);
    }
}
