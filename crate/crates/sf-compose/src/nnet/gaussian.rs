//! Diagonal Gaussian policy heads with tanh squashing.
//!
//! A policy network emits `[mean ‖ log_std]`; sampling uses the
//! reparameterization `a = tanh(mean + std·noise)` and the log-probability
//! carries the tanh change-of-variables correction.

use super::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Squashed actions are pulled inside (−1,1) by this margin before the
/// `log(1−a²)` correction so the log-probability stays finite.
pub const TANH_EPS: f64 = 1e-6;
/// Soft bound on the pre-squash mean: `mean = L·tanh(raw/L)`. Without it a
/// few noisy critic gradients can push the mean far past tanh saturation,
/// where `1−a²` zeroes every gradient and the policy never recovers.
pub const MEAN_SOFT_LIMIT: f64 = 5.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Diagonal Gaussian over the pre-squash space, one (mean, log_std) pair per
/// action dimension. `log_std` is already clamped to
/// [`LOG_STD_MIN`, `LOG_STD_MAX`].
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianHead<F> {
    pub mean: Vec<F>,
    pub log_std: Vec<F>,
}

/// One squashed reparameterized draw.
#[derive(Clone, Debug)]
pub struct SquashedSample<F> {
    /// `tanh(pre_tanh)`, strictly inside (−1,1).
    pub action: Vec<F>,
    pub pre_tanh: Vec<F>,
    /// The standard-normal noise that produced this draw.
    pub noise: Vec<F>,
    pub log_prob: F,
}

impl<F: Scalar> GaussianHead<F>
{
    /// Splits a raw network output row `[mean ‖ log_std]`, soft-bounds the
    /// means and clamps the log-stds. Callers needing the gradient gates
    /// recompute them from the raw slice ([`mean_gate`], the clamp bounds).
    pub fn from_raw(raw: &[F]) -> Self {
        assert!(raw.len() % 2 == 0, "raw head output must have even length");
        let dim = raw.len() / 2;
        let mean = raw[..dim].iter().map(|v| soft_bound_mean(*v)).collect();
        let log_std = raw[dim..]
            .iter()
            .map(|v| clamp_log_std(*v))
            .collect();
        GaussianHead { mean, log_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<F> {
        self.log_std.iter().map(|v| v.exp()).collect()
    }

    /// Reparameterized squashed draw: deterministic given `noise`.
    pub fn sample(&self, noise: &[F]) -> SquashedSample<F> {
        assert_eq!(noise.len(), self.dim(), "noise length");
        let mut pre_tanh = Vec::with_capacity(self.dim());
        let mut action = Vec::with_capacity(self.dim());
        let mut log_prob = F::zero();
        for j in 0..self.dim() {
            let std = self.log_std[j].exp();
            let u = self.mean[j] + std * noise[j];
            let a = clamp_action(u.tanh());
            pre_tanh.push(u);
            action.push(a);
            // log N(u; mean, std) with u = mean + std·noise collapses to the
            // noise density; then subtract log|da/du| = log(1 − a²).
            log_prob += -F::c(0.5) * noise[j] * noise[j] - self.log_std[j] - F::c(LN_SQRT_2PI);
            log_prob -= squash_correction(a);
        }
        debug_assert!(log_prob.is_finite(), "non-finite log-prob");
        SquashedSample {
            action,
            pre_tanh,
            noise: noise.to_vec(),
            log_prob,
        }
    }

    /// The squashed distribution mode, used for deterministic evaluation.
    pub fn mean_action(&self) -> Vec<F> {
        self.mean.iter().map(|m| m.tanh()).collect()
    }

    /// Log-density of the squashed distribution at `action` (all components
    /// strictly inside (−1,1)).
    pub fn log_prob_of(&self, action: &[F]) -> F {
        assert_eq!(action.len(), self.dim(), "action length");
        let mut lp = F::zero();
        for j in 0..self.dim() {
            let a = clamp_action(action[j]);
            let u = atanh(a);
            let std = self.log_std[j].exp();
            let z = (u - self.mean[j]) / std;
            lp += -F::c(0.5) * z * z - self.log_std[j] - F::c(LN_SQRT_2PI);
            lp -= squash_correction(a);
        }
        lp
    }
}

#[inline]
pub fn clamp_log_std<F: Scalar>(v: F) -> F {
    v.max(F::c(LOG_STD_MIN)).min(F::c(LOG_STD_MAX))
}

#[inline]
pub fn soft_bound_mean<F: Scalar>(raw: F) -> F {
    let l = F::c(MEAN_SOFT_LIMIT);
    l * (raw / l).tanh()
}

/// `d(mean)/d(raw_mean)` for the soft bound, expressed through the bounded
/// mean: `1 − (mean/L)²`.
#[inline]
pub fn mean_gate<F: Scalar>(mean: F) -> F {
    let l = F::c(MEAN_SOFT_LIMIT);
    let t = mean / l;
    F::one() - t * t
}

#[inline]
pub fn clamp_action<F: Scalar>(a: F) -> F
{
    let lim = F::c(1.0 - TANH_EPS);
    a.max(-lim).min(lim)
}

/// `log(1 − a²)` evaluated at the clamped action.
#[inline]
fn squash_correction<F: Scalar>(a: F) -> F
{
    let ac = clamp_action(a);
    (F::one() - ac * ac).ln()
}

#[inline]
fn atanh<F: Scalar>(a: F) -> F
{
    F::c(0.5) * ((F::one() + a) / (F::one() - a)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn near_deterministic_limit_returns_tanh_of_mean() {
        let head = GaussianHead {
            mean: vec![0.0f64],
            log_std: vec![LOG_STD_MIN],
        };
        let s = head.sample(&[3.0]);
        assert!(s.action[0].abs() < 1e-8);
        assert!(s.log_prob.is_finite());
    }

    #[test]
    fn symmetric_noise_gives_mirrored_actions_with_equal_log_prob() {
        let head = GaussianHead {
            mean: vec![0.0f64],
            log_std: vec![-0.3],
        };
        let z = 1.234;
        let plus = head.sample(&[z]);
        let minus = head.sample(&[-z]);
        let std = (-0.3f64).exp();
        assert!((plus.action[0] - (z * std).tanh()).abs() < 1e-12);
        assert!((plus.action[0] + minus.action[0]).abs() < 1e-12);
        assert!((plus.log_prob - minus.log_prob).abs() < 1e-12);
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        // Quadrature normalization oracle: ∫ exp(log_prob) da over (−1,1)
        // on a 10k-point grid for a unit Gaussian head.
        let head = GaussianHead {
            mean: vec![0.0f64],
            log_std: vec![0.0],
        };
        let n = 10_000;
        let h = 2.0 / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            let a = -1.0 + (i as f64 + 0.5) * h;
            integral += head.log_prob_of(&[a]).exp() * h;
        }
        assert!(
            (integral - 1.0).abs() < 1e-3,
            "density integrates to {integral}"
        );
    }

    #[test]
    fn density_integrates_to_one_off_center() {
        let head = GaussianHead {
            mean: vec![0.7f64],
            log_std: vec![-1.1],
        };
        let n = 20_000;
        let h = 2.0 / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            let a = -1.0 + (i as f64 + 0.5) * h;
            integral += head.log_prob_of(&[a]).exp() * h;
        }
        assert!((integral - 1.0).abs() < 1e-3);
    }

    #[test]
    fn saturated_actions_keep_log_prob_finite() {
        let head = GaussianHead {
            mean: vec![10.0f64],
            log_std: vec![2.0],
        };
        let s = head.sample(&[5.0]);
        assert!(s.action[0] < 1.0);
        assert!(s.log_prob.is_finite());
    }

    #[test]
    fn from_raw_clamps_log_std_and_bounds_mean() {
        let head = GaussianHead::<f64>::from_raw(&[0.5, -0.5, 7.0, -99.0]);
        assert_eq!(head.log_std, vec![LOG_STD_MAX, LOG_STD_MIN]);
        // Soft bound is near-identity around the origin...
        assert!((head.mean[0] - 0.5).abs() < 2e-3);
        assert!((head.mean[1] + 0.5).abs() < 2e-3);
        // ...and asymptotes at ±MEAN_SOFT_LIMIT.
        let big = GaussianHead::<f64>::from_raw(&[1e6, -1e6, 0.0, 0.0]);
        assert!((big.mean[0] - MEAN_SOFT_LIMIT).abs() < 1e-9);
        assert!((big.mean[1] + MEAN_SOFT_LIMIT).abs() < 1e-9);
    }

    #[test]
    fn mean_gate_matches_soft_bound_derivative() {
        for raw in [-8.0f64, -2.0, 0.0, 0.3, 4.0, 11.0] {
            let h = 1e-6;
            let numeric = (soft_bound_mean(raw + h) - soft_bound_mean(raw - h)) / (2.0 * h);
            let analytic = mean_gate(soft_bound_mean(raw));
            assert!((numeric - analytic).abs() < 1e-8, "raw {raw}");
        }
    }

    #[test]
    fn log_prob_of_matches_sampled_log_prob() {
        let head = GaussianHead {
            mean: vec![0.3f64, -0.6],
            log_std: vec![-0.5, 0.1],
        };
        let s = head.sample(&[0.37, -1.9]);
        let lp = head.log_prob_of(&s.action);
        assert!(
            (lp - s.log_prob).abs() < 1e-9,
            "{lp} vs {}",
            s.log_prob
        );
    }
}
