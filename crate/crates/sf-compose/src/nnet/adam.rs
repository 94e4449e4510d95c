//! Adam-style first-order optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::mlp::{GradStore, Mlp};
use super::scalar::Scalar;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig::with_lr(3e-4)
    }
}

/// Per-parameter first/second moment accumulators plus a step counter.
#[derive(Clone, Debug)]
pub struct AdamState<F> {
    m: GradStore<F>,
    v: GradStore<F>,
    step: u64,
    pub cfg: AdamConfig,
}

impl<F: Scalar> AdamState<F>
{
    pub fn new(params: &Mlp<F>, cfg: AdamConfig) -> Self {
        assert!(cfg.lr > 0.0, "learning rate must be > 0");
        AdamState {
            m: params.zero_grads(),
            v: params.zero_grads(),
            step: 0,
            cfg,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step on `params` along `grads`.
    pub fn step(&mut self, params: &mut Mlp<F>, grads: &GradStore<F>) {
        assert_eq!(grads.layers.len(), params.layers.len(), "grad shape");
        self.step += 1;
        let b1 = F::c(self.cfg.beta1);
        let b2 = F::c(self.cfg.beta2);
        let one_m_b1 = F::c(1.0 - self.cfg.beta1);
        let one_m_b2 = F::c(1.0 - self.cfg.beta2);
        let corr1 = F::c(1.0 / (1.0 - self.cfg.beta1.powi(self.step as i32)));
        let corr2 = F::c(1.0 / (1.0 - self.cfg.beta2.powi(self.step as i32)));
        let lr = F::c(self.cfg.lr);
        let eps = F::c(self.cfg.eps);

        for (li, layer) in params.layers.iter_mut().enumerate() {
            let lg = &grads.layers[li];
            let (mw, vw) = (&mut self.m.layers[li], &mut self.v.layers[li]);
            let params_iter = layer.w.iter_mut().chain(layer.b.iter_mut());
            let grads_iter = lg.dw.iter().chain(lg.db.iter());
            let m_iter = mw.dw.iter_mut().chain(mw.db.iter_mut());
            let v_iter = vw.dw.iter_mut().chain(vw.db.iter_mut());
            for (((p, g), m), v) in params_iter.zip(grads_iter).zip(m_iter).zip(v_iter) {
                *m = b1 * *m + one_m_b1 * *g;
                *v = b2 * *v + one_m_b2 * *g * *g;
                let m_hat = *m * corr1;
                let v_hat = *v * corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
