//! Dense feed-forward networks with manual backpropagation.
//!
//! Each layer computes `z = Wx + b`, optionally layer-normalizes `z`, applies
//! the activation, and in train mode applies inverted dropout. Shapes are
//! validated with `assert!`; a mismatch is a programmer error.
//!
//! The gradient contract: [`Mlp::backward`] returns parameter gradients and
//! input gradients that equal the analytic derivative of the forward output
//! contracted with the given upstream vector. Every architecture used in this
//! crate is covered by central-finite-difference checks in the tests.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Error, Result};

const LAYERNORM_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn forward<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => {
                if z > F::zero() {
                    z
                } else {
                    F::zero()
                }
            }
        }
    }

    /// Derivative expressed through the activation *output*.
    #[inline]
    fn grad_from_output<F: Scalar>(self, y: F) -> F {
        match self {
            Activation::Linear => F::one(),
            Activation::Tanh => F::one() - y * y,
            Activation::Relu => {
                if y > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
        }
    }
}

/// Per-layer architecture choice.
#[derive(Clone, Copy, Debug)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
    pub layernorm: bool,
    pub dropout: f32,
}

impl LayerSpec {
    pub fn plain(width: usize, activation: Activation) -> Self {
        LayerSpec {
            width,
            activation,
            layernorm: false,
            dropout: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Layer<F> {
    /// Row-major, shape `(out_dim, in_dim)`.
    pub w: Vec<F>,
    pub b: Vec<F>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub layernorm: bool,
    pub dropout: f32,
}

/// A multi-layer perceptron; the unit of parameter ownership for Adam,
/// Polyak updates and checkpoints.
///
/// `output_scales` (empty = none) multiply the final layer's outputs
/// componentwise; value-regression networks use them to condition targets
/// whose magnitude is `O(feature/(1−γ))` — and differs per feature — onto a
/// range Xavier-initialized nets can reach quickly. They are architecture,
/// not parameters: gradients account for them and checkpoints do not store
/// them.
#[derive(Clone, Debug)]
pub struct Mlp<F> {
    pub layers: Vec<Layer<F>>,
    pub output_scales: Vec<F>,
}

/// Per-layer dropout masks, sampled once per train-mode forward pass.
/// Entries are `0` or `1/(1-p)` (inverted dropout); `None` for layers
/// without dropout.
pub struct DropoutMasks<F> {
    masks: Vec<Option<Vec<F>>>,
    batch: usize,
}

/// Intermediate values captured by a forward pass, consumed by `backward`.
#[derive(Default)]
pub struct ForwardCache<F> {
    batch: usize,
    /// `inputs[l]` is the input to layer `l` (batch × in_dim).
    inputs: Vec<Vec<F>>,
    /// Normalized pre-activations for layernorm layers.
    normed: Vec<Option<Vec<F>>>,
    /// Per-row `1/sqrt(var+eps)` for layernorm layers.
    inv_std: Vec<Option<Vec<F>>>,
    /// Post-activation, pre-dropout outputs.
    act_out: Vec<Vec<F>>,
    /// Masks applied in this pass (copied so backward replays them).
    masks: Vec<Option<Vec<F>>>,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Clone, Debug)]
pub struct GradStore<F> {
    pub layers: Vec<LayerGrads<F>>,
}

#[derive(Clone, Debug)]
pub struct LayerGrads<F> {
    pub dw: Vec<F>,
    pub db: Vec<F>,
}

impl<F: Scalar> GradStore<F>
{
    pub fn scale(&mut self, s: F) {
        for lg in &mut self.layers {
            for v in lg.dw.iter_mut().chain(lg.db.iter_mut()) {
                *v *= s;
            }
        }
    }

    pub fn add(&mut self, other: &GradStore<F>) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.dw.iter_mut().zip(&b.dw) {
                *x += *y;
            }
            for (x, y) in a.db.iter_mut().zip(&b.db) {
                *x += *y;
            }
        }
    }

    pub fn max_abs(&self) -> F {
        let mut m = F::zero();
        for lg in &self.layers {
            for v in lg.dw.iter().chain(lg.db.iter()) {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|lg| lg.dw.iter().chain(lg.db.iter()).all(|v| v.is_finite()))
    }
}

impl<F: Scalar> Mlp<F>
{
    /// Builds a network with Xavier-uniform weights and zero biases.
    pub fn new<R: Rng>(input_dim: usize, specs: &[LayerSpec], rng: &mut R) -> Self {
        assert!(input_dim > 0, "input_dim must be > 0");
        assert!(!specs.is_empty(), "network needs at least one layer");
        let mut layers = Vec::with_capacity(specs.len());
        let mut in_dim = input_dim;
        for spec in specs {
            assert!(spec.width > 0, "layer width must be > 0");
            assert!(
                (0.0..1.0).contains(&spec.dropout),
                "dropout rate must be in [0,1)"
            );
            let limit = (6.0 / (in_dim + spec.width) as f64).sqrt();
            let lo = F::c(-limit);
            let hi = F::c(limit);
            let w = (0..in_dim * spec.width)
                .map(|_| rng.gen_range(lo..hi))
                .collect();
            layers.push(Layer {
                w,
                b: vec![F::zero(); spec.width],
                in_dim,
                out_dim: spec.width,
                activation: spec.activation,
                layernorm: spec.layernorm,
                dropout: spec.dropout,
            });
            in_dim = spec.width;
        }
        Mlp {
            layers,
            output_scales: Vec::new(),
        }
    }

    pub fn with_output_scales(mut self, scales: &[f64]) -> Self {
        assert_eq!(scales.len(), self.output_dim(), "one scale per output");
        assert!(scales.iter().all(|s| *s > 0.0), "scales must be positive");
        self.output_scales = scales.iter().map(|s| F::c(*s)).collect();
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn has_dropout(&self) -> bool {
        self.layers.iter().any(|l| l.dropout > 0.0)
    }

    /// Samples one set of inverted-dropout masks for a train-mode pass.
    pub fn sample_masks<R: Rng>(&self, batch: usize, rng: &mut R) -> DropoutMasks<F> {
        let masks = self
            .layers
            .iter()
            .map(|l| {
                if l.dropout > 0.0 {
                    let keep = F::c(1.0 / (1.0 - l.dropout as f64));
                    let p = l.dropout as f64;
                    Some(
                        (0..batch * l.out_dim)
                            .map(|_| {
                                if rng.gen_range(0.0f64..1.0) < p {
                                    F::zero()
                                } else {
                                    keep
                                }
                            })
                            .collect(),
                    )
                } else {
                    None
                }
            })
            .collect();
        DropoutMasks { masks, batch }
    }

    /// Batched forward pass. `x` is row-major `(batch, input_dim)`.
    ///
    /// `masks: None` is eval mode (dropout disabled, a pure function of
    /// params and input); `Some` is train mode. Pass a cache to enable a
    /// later `backward`.
    pub fn forward(
        &self,
        x: &[F],
        batch: usize,
        masks: Option<&DropoutMasks<F>>,
        mut cache: Option<&mut ForwardCache<F>>,
    ) -> Vec<F> {
        assert_eq!(
            x.len(),
            batch * self.input_dim(),
            "input length {} does not match batch {} x input_dim {}",
            x.len(),
            batch,
            self.input_dim()
        );
        if let Some(m) = masks {
            assert_eq!(m.batch, batch, "mask batch mismatch");
        }
        if let Some(c) = cache.as_deref_mut() {
            c.batch = batch;
            c.inputs.clear();
            c.normed.clear();
            c.inv_std.clear();
            c.act_out.clear();
            c.masks.clear();
        }

        let mut cur = x.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let (i_dim, o_dim) = (layer.in_dim, layer.out_dim);
            let mut z = vec![F::zero(); batch * o_dim];
            for b in 0..batch {
                let xrow = &cur[b * i_dim..(b + 1) * i_dim];
                let zrow = &mut z[b * o_dim..(b + 1) * o_dim];
                for (o, zo) in zrow.iter_mut().enumerate() {
                    let wrow = &layer.w[o * i_dim..(o + 1) * i_dim];
                    let mut acc = layer.b[o];
                    for (wk, xk) in wrow.iter().zip(xrow) {
                        acc = acc + *wk * *xk;
                    }
                    *zo = acc;
                }
            }

            let (normed, inv_std) = if layer.layernorm {
                let mut inv = vec![F::zero(); batch];
                let denom = F::c(o_dim as f64);
                for b in 0..batch {
                    let row = &mut z[b * o_dim..(b + 1) * o_dim];
                    let mut mean = F::zero();
                    for v in row.iter() {
                        mean += *v;
                    }
                    mean /= denom;
                    let mut var = F::zero();
                    for v in row.iter() {
                        let dvi = *v - mean;
                        var += dvi * dvi;
                    }
                    var /= denom;
                    let r = (var + F::c(LAYERNORM_EPS)).sqrt().recip();
                    inv[b] = r;
                    for v in row.iter_mut() {
                        *v = (*v - mean) * r;
                    }
                }
                (Some(z.clone()), Some(inv))
            } else {
                (None, None)
            };

            let mut h = z;
            for v in h.iter_mut() {
                *v = layer.activation.forward(*v);
            }
            let act_out = h.clone();

            let applied_mask = match masks.and_then(|m| m.masks[li].as_ref()) {
                Some(mask) => {
                    for (v, m) in h.iter_mut().zip(mask) {
                        *v *= *m;
                    }
                    Some(mask.clone())
                }
                None => None,
            };

            if let Some(c) = cache.as_deref_mut() {
                c.inputs.push(cur);
                c.normed.push(normed);
                c.inv_std.push(inv_std);
                c.act_out.push(act_out);
                c.masks.push(applied_mask);
            }
            cur = h;
        }

        if !self.output_scales.is_empty() {
            let o_dim = self.output_dim();
            for b in 0..batch {
                for (v, s) in cur[b * o_dim..(b + 1) * o_dim]
                    .iter_mut()
                    .zip(&self.output_scales)
                {
                    *v *= *s;
                }
            }
        }
        for v in &cur {
            debug_assert!(v.is_finite(), "non-finite forward output");
        }
        cur
    }

    /// Eval-mode forward without gradient bookkeeping.
    pub fn forward_eval(&self, x: &[F], batch: usize) -> Vec<F> {
        self.forward(x, batch, None, None)
    }

    /// Backpropagates `upstream` (batch × output_dim) through the cached
    /// pass, returning parameter gradients and input gradients.
    pub fn backward(&self, cache: &ForwardCache<F>, upstream: &[F]) -> (GradStore<F>, Vec<F>) {
        let mut grads = self.zero_grads();
        let input_grad = self.backward_impl(cache, upstream, Some(&mut grads));
        (grads, input_grad)
    }

    /// Input gradients only; skips parameter-gradient accumulation. Used by
    /// the impact matrix where only `∂ψ/∂a` is needed.
    pub fn backward_input_only(&self, cache: &ForwardCache<F>, upstream: &[F]) -> Vec<F> {
        self.backward_impl(cache, upstream, None)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache<F>,
        upstream: &[F],
        mut grads: Option<&mut GradStore<F>>,
    ) -> Vec<F> {
        let batch = cache.batch;
        assert_eq!(cache.inputs.len(), self.layers.len(), "cache layer count");
        assert_eq!(
            upstream.len(),
            batch * self.output_dim(),
            "upstream length {} does not match batch {} x output_dim {}",
            upstream.len(),
            batch,
            self.output_dim()
        );

        let mut u = upstream.to_vec();
        if !self.output_scales.is_empty() {
            let o_dim = self.output_dim();
            for b in 0..batch {
                for (v, s) in u[b * o_dim..(b + 1) * o_dim]
                    .iter_mut()
                    .zip(&self.output_scales)
                {
                    *v *= *s;
                }
            }
        }
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let (i_dim, o_dim) = (layer.in_dim, layer.out_dim);

            if let Some(mask) = &cache.masks[li] {
                for (g, m) in u.iter_mut().zip(mask) {
                    *g *= *m;
                }
            }

            let act_out = &cache.act_out[li];
            for (g, y) in u.iter_mut().zip(act_out) {
                *g *= layer.activation.grad_from_output(*y);
            }

            if layer.layernorm {
                let normed = cache.normed[li].as_ref().expect("layernorm cache");
                let inv_std = cache.inv_std[li].as_ref().expect("layernorm cache");
                let denom = F::c(o_dim as f64);
                for b in 0..batch {
                    let g = &mut u[b * o_dim..(b + 1) * o_dim];
                    let y = &normed[b * o_dim..(b + 1) * o_dim];
                    let r = inv_std[b];
                    let mut gm = F::zero();
                    let mut gym = F::zero();
                    for (gi, yi) in g.iter().zip(y) {
                        gm += *gi;
                        gym += *gi * *yi;
                    }
                    gm /= denom;
                    gym /= denom;
                    for (gi, yi) in g.iter_mut().zip(y) {
                        *gi = r * (*gi - gm - *yi * gym);
                    }
                }
            }

            let x = &cache.inputs[li];
            if let Some(gs) = grads.as_deref_mut() {
                let lg = &mut gs.layers[li];
                for b in 0..batch {
                    let urow = &u[b * o_dim..(b + 1) * o_dim];
                    let xrow = &x[b * i_dim..(b + 1) * i_dim];
                    for (o, uo) in urow.iter().enumerate() {
                        lg.db[o] += *uo;
                        let wrow = &mut lg.dw[o * i_dim..(o + 1) * i_dim];
                        for (wk, xk) in wrow.iter_mut().zip(xrow) {
                            *wk += *uo * *xk;
                        }
                    }
                }
            }

            let mut ux = vec![F::zero(); batch * i_dim];
            for b in 0..batch {
                let urow = &u[b * o_dim..(b + 1) * o_dim];
                let uxrow = &mut ux[b * i_dim..(b + 1) * i_dim];
                for (o, uo) in urow.iter().enumerate() {
                    let wrow = &layer.w[o * i_dim..(o + 1) * i_dim];
                    for (uxk, wk) in uxrow.iter_mut().zip(wrow) {
                        *uxk += *wk * *uo;
                    }
                }
            }
            u = ux;
        }
        u
    }

    pub fn zero_grads(&self) -> GradStore<F> {
        GradStore {
            layers: self
                .layers
                .iter()
                .map(|l| LayerGrads {
                    dw: vec![F::zero(); l.w.len()],
                    db: vec![F::zero(); l.b.len()],
                })
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat view over all parameters, layer by layer, weights then bias.
    pub fn for_each_param(&self, mut f: impl FnMut(F)) {
        for l in &self.layers {
            for v in l.w.iter().chain(l.b.iter()) {
                f(*v);
            }
        }
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut F)) {
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                f(v);
            }
        }
    }
}

/// `target ← τ·target + (1−τ)·online`, elementwise. τ is the retention
/// coefficient: τ=1 keeps the target, τ=0 copies the online network.
pub fn polyak_update<F: Scalar>(target: &mut Mlp<F>, online: &Mlp<F>, tau: f64) -> Result<()>
{
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(format!("polyak tau {tau} outside [0,1]")));
    }
    assert_eq!(target.layers.len(), online.layers.len(), "layer count");
    let t = F::c(tau);
    let one_m_t = F::c(1.0 - tau);
    for (tl, ol) in target.layers.iter_mut().zip(&online.layers) {
        assert_eq!(tl.w.len(), ol.w.len(), "weight shape");
        for (tw, ow) in tl.w.iter_mut().zip(&ol.w) {
            *tw = t * *tw + one_m_t * *ow;
        }
        for (tb, ob) in tl.b.iter_mut().zip(&ol.b) {
            *tb = t * *tb + one_m_t * *ob;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tanh_net(input: usize, hidden: usize, out: usize, seed: u64) -> Mlp<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::new(
            input,
            &[
                LayerSpec::plain(hidden, Activation::Tanh),
                LayerSpec::plain(hidden, Activation::Tanh),
                LayerSpec::plain(out, Activation::Linear),
            ],
            &mut rng,
        )
    }

    use crate::nnet::gradcheck::{assert_grads_close, finite_diff_params};

    #[test]
    fn identity_layer_passes_input_through() {
        let mut net = tanh_net(2, 2, 2, 0);
        net.layers = vec![Layer {
            w: vec![1.0, 0.0, 0.0, 1.0],
            b: vec![0.0, 0.0],
            in_dim: 2,
            out_dim: 2,
            activation: Activation::Linear,
            layernorm: false,
            dropout: 0.0,
        }];
        let out = net.forward_eval(&[1.0, 2.0], 1);
        assert_eq!(out, vec![1.0, 2.0]);
    }

    #[test]
    fn zero_weight_net_returns_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net: Mlp<f64> =
            Mlp::new(3, &[LayerSpec::plain(2, Activation::Linear)], &mut rng);
        for w in &mut net.layers[0].w {
            *w = 0.0;
        }
        net.layers[0].b = vec![0.25, -4.0];
        let out = net.forward_eval(&[9.0, -3.0, 7.5], 1);
        assert_eq!(out, vec![0.25, -4.0]);
    }

    #[test]
    fn eval_forward_is_bitwise_reproducible() {
        let net = tanh_net(4, 16, 3, 7);
        let x = [0.3, -0.7, 0.1, 0.9];
        let a = net.forward_eval(&x, 1);
        let b = net.forward_eval(&x, 1);
        assert_eq!(a, b);
    }

    #[test]
    fn seeded_regression_fixture_2x8() {
        // Frozen from a reference forward pass of this exact architecture
        // and seed; guards against silent changes to init or forward math.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net: Mlp<f64> = Mlp::new(
            2,
            &[
                LayerSpec::plain(8, Activation::Tanh),
                LayerSpec::plain(8, Activation::Tanh),
                LayerSpec::plain(2, Activation::Linear),
            ],
            &mut rng,
        );
        let out = net.forward_eval(&[0.5, -0.5], 1);
        let expected = [Mlp::<f64>::REGRESSION_FIXTURE[0], Mlp::<f64>::REGRESSION_FIXTURE[1]];
        assert!(
            (out[0] - expected[0]).abs() < 1e-12 && (out[1] - expected[1]).abs() < 1e-12,
            "got {out:?}, expected {expected:?}"
        );
    }

    #[test]
    fn linear_net_gradients_are_outer_products() {
        // y = Wx: param grad u·xᵀ, input grad Wᵀu.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: Mlp<f64> = Mlp::new(3, &[LayerSpec::plain(2, Activation::Linear)], &mut rng);
        let x = [0.5, -1.5, 2.0];
        let u = [2.0, -1.0];
        let mut cache = ForwardCache::default();
        net.forward(&x, 1, None, Some(&mut cache));
        let (grads, xgrad) = net.backward(&cache, &u);
        for o in 0..2 {
            for k in 0..3 {
                assert_eq!(grads.layers[0].dw[o * 3 + k], u[o] * x[k]);
            }
            assert_eq!(grads.layers[0].db[o], u[o]);
        }
        for k in 0..3 {
            let expect = net.layers[0].w[k] * u[0] + net.layers[0].w[3 + k] * u[1];
            assert!((xgrad[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let net = tanh_net(3, 8, 2, 11);
        let mut cache = ForwardCache::default();
        net.forward(&[0.1, 0.2, 0.3], 1, None, Some(&mut cache));
        let (grads, xgrad) = net.backward(&cache, &[0.0, 0.0]);
        assert_eq!(grads.max_abs(), 0.0);
        assert!(xgrad.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences_tanh() {
        let net = tanh_net(2, 16, 3, 5);
        let x = vec![0.4, -0.9];
        let upstream = vec![1.0, -0.5, 0.25];
        let mut cache = ForwardCache::default();
        net.forward(&x, 1, None, Some(&mut cache));
        let (analytic, _) = net.backward(&cache, &upstream);

        let numeric = finite_diff_params(
            &net,
            |n| {
                let y = n.forward_eval(&x, 1);
                y.iter().zip(&upstream).map(|(a, b)| a * b).sum()
            },
            1e-4,
        );
        assert_grads_close(&analytic, &numeric, 1e-5);
    }

    #[test]
    fn gradients_match_finite_differences_layernorm_relu() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net: Mlp<f64> = Mlp::new(
            4,
            &[
                LayerSpec {
                    width: 12,
                    activation: Activation::Relu,
                    layernorm: true,
                    dropout: 0.0,
                },
                LayerSpec {
                    width: 12,
                    activation: Activation::Tanh,
                    layernorm: true,
                    dropout: 0.0,
                },
                LayerSpec::plain(2, Activation::Linear),
            ],
            &mut rng,
        );
        let x = vec![0.3, 1.1, -0.6, 0.05];
        let upstream = vec![0.7, -1.3];
        let mut cache = ForwardCache::default();
        net.forward(&x, 1, None, Some(&mut cache));
        let (analytic, _) = net.backward(&cache, &upstream);
        let numeric = finite_diff_params(
            &net,
            |n| {
                let y = n.forward_eval(&x, 1);
                y.iter().zip(&upstream).map(|(a, b)| a * b).sum()
            },
            1e-4,
        );
        assert_grads_close(&analytic, &numeric, 1e-5);
    }

    #[test]
    fn gradients_match_finite_differences_with_fixed_dropout_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let net: Mlp<f64> = Mlp::new(
            3,
            &[
                LayerSpec {
                    width: 10,
                    activation: Activation::Tanh,
                    layernorm: true,
                    dropout: 0.3,
                },
                LayerSpec::plain(2, Activation::Linear),
            ],
            &mut rng,
        );
        let x = vec![0.2, -0.4, 0.9];
        let upstream = vec![1.0, 0.5];
        let masks = net.sample_masks(1, &mut rng);
        let mut cache = ForwardCache::default();
        net.forward(&x, 1, Some(&masks), Some(&mut cache));
        let (analytic, _) = net.backward(&cache, &upstream);
        let numeric = finite_diff_params(
            &net,
            |n| {
                let y = n.forward(&x, 1, Some(&masks), None);
                y.iter().zip(&upstream).map(|(a, b)| a * b).sum()
            },
            1e-4,
        );
        assert_grads_close(&analytic, &numeric, 1e-5);
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let net = tanh_net(5, 16, 4, 21);
        let x: Vec<f64> = vec![0.1, -0.2, 0.3, 0.7, -0.9];
        let upstream = vec![0.3, -0.2, 1.1, 0.05];
        let mut cache = ForwardCache::default();
        net.forward(&x, 1, None, Some(&mut cache));
        let analytic = net.backward_input_only(&cache, &upstream);

        let h = 1e-4;
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += h;
            let plus: f64 = net
                .forward_eval(&xp, 1)
                .iter()
                .zip(&upstream)
                .map(|(a, b)| a * b)
                .sum();
            xp[k] = x[k] - h;
            let minus: f64 = net
                .forward_eval(&xp, 1)
                .iter()
                .zip(&upstream)
                .map(|(a, b)| a * b)
                .sum();
            let numeric = (plus - minus) / (2.0 * h);
            let diff = (analytic[k] - numeric).abs();
            assert!(
                diff <= 1e-9 || diff / analytic[k].abs().max(numeric.abs()) <= 1e-5,
                "input {k}: {} vs {numeric}",
                analytic[k]
            );
        }
    }

    #[test]
    fn batched_forward_equals_per_row() {
        let net = tanh_net(3, 8, 2, 17);
        let rows = [[0.1, 0.2, 0.3], [-0.5, 0.9, 0.0], [2.0, -2.0, 1.0]];
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let batched = net.forward_eval(&flat, 3);
        for (i, row) in rows.iter().enumerate() {
            let single = net.forward_eval(row, 1);
            assert_eq!(&batched[i * 2..(i + 1) * 2], single.as_slice());
        }
    }

    #[test]
    fn polyak_endpoints_and_midpoint() {
        let online = tanh_net(2, 4, 2, 1);
        let base = tanh_net(2, 4, 2, 2);

        let mut t = base.clone();
        polyak_update(&mut t, &online, 1.0).unwrap();
        for (a, b) in t.layers.iter().zip(&base.layers) {
            assert_eq!(a.w, b.w);
        }

        let mut t = base.clone();
        polyak_update(&mut t, &online, 0.0).unwrap();
        for (a, b) in t.layers.iter().zip(&online.layers) {
            assert_eq!(a.w, b.w);
        }

        let mut t = base.clone();
        t.for_each_param_mut(|v| *v = 2.0);
        let mut o = online.clone();
        o.for_each_param_mut(|v| *v = 0.0);
        polyak_update(&mut t, &o, 0.5).unwrap();
        t.for_each_param(|v| assert_eq!(v, 1.0));
    }

    #[test]
    fn polyak_rejects_bad_tau() {
        let online = tanh_net(2, 4, 2, 1);
        let mut t = online.clone();
        assert!(polyak_update(&mut t, &online, 1.5).is_err());
        assert!(polyak_update(&mut t, &online, -0.1).is_err());
    }

    proptest::proptest! {
        /// Applying polyak twice with τ equals once with τ² (elementwise
        /// affine map composition) when online params are fixed at zero.
        #[test]
        fn polyak_composes_multiplicatively(tau in 0.0f64..=1.0, scale in -3.0f64..3.0) {
            let mut online = tanh_net(2, 4, 2, 1);
            online.for_each_param_mut(|v| *v = 0.0);
            let mut twice = tanh_net(2, 4, 2, 2);
            twice.for_each_param_mut(|v| *v *= scale);
            let mut once = twice.clone();

            polyak_update(&mut twice, &online, tau).unwrap();
            polyak_update(&mut twice, &online, tau).unwrap();
            polyak_update(&mut once, &online, tau * tau).unwrap();

            let mut lhs = Vec::new();
            twice.for_each_param(|v| lhs.push(v));
            let mut rhs = Vec::new();
            once.for_each_param(|v| rhs.push(v));
            for (a, b) in lhs.iter().zip(&rhs) {
                proptest::prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}

#[cfg(test)]
impl Mlp<f64> {
    /// Recorded once from a reference forward pass; see
    /// `seeded_regression_fixture_2x8`.
    const REGRESSION_FIXTURE: [f64; 2] = [0.2940419780731616, -0.5145724361561972];
}
