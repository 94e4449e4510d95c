//! Central finite-difference gradient checking, the independent oracle for
//! every analytic gradient in this crate.

use super::mlp::{GradStore, Mlp};

/// Central finite differences of a scalar function over every parameter.
pub fn finite_diff_params<F2: Fn(&Mlp<f64>) -> f64>(
    net: &Mlp<f64>,
    f: F2,
    h: f64,
) -> GradStore<f64> {
    let mut grads = net.zero_grads();
    let mut probe = net.clone();
    for li in 0..net.layers.len() {
        for wi in 0..net.layers[li].w.len() {
            let orig = probe.layers[li].w[wi];
            probe.layers[li].w[wi] = orig + h;
            let plus = f(&probe);
            probe.layers[li].w[wi] = orig - h;
            let minus = f(&probe);
            probe.layers[li].w[wi] = orig;
            grads.layers[li].dw[wi] = (plus - minus) / (2.0 * h);
        }
        for bi in 0..net.layers[li].b.len() {
            let orig = probe.layers[li].b[bi];
            probe.layers[li].b[bi] = orig + h;
            let plus = f(&probe);
            probe.layers[li].b[bi] = orig - h;
            let minus = f(&probe);
            probe.layers[li].b[bi] = orig;
            grads.layers[li].db[bi] = (plus - minus) / (2.0 * h);
        }
    }
    grads
}

/// Relative error with an absolute floor at the finite-difference noise
/// level: tiny gradients compare absolutely, the rest relatively.
pub fn assert_grads_close(analytic: &GradStore<f64>, numeric: &GradStore<f64>, rel: f64) {
    for (li, (a, n)) in analytic.layers.iter().zip(&numeric.layers).enumerate() {
        for (k, (av, nv)) in a
            .dw
            .iter()
            .chain(a.db.iter())
            .zip(n.dw.iter().chain(n.db.iter()))
            .enumerate()
        {
            let diff = (av - nv).abs();
            let scale = av.abs().max(nv.abs());
            assert!(
                diff <= 1e-9 || diff / scale <= rel,
                "layer {li} param {k}: analytic {av} vs numeric {nv} (diff {diff})"
            );
        }
    }
}

/// Worst relative error between two gradient stores (absolute floor 1e-9).
pub fn max_rel_error(analytic: &GradStore<f64>, numeric: &GradStore<f64>) -> f64 {
    let mut worst = 0.0f64;
    for (a, n) in analytic.layers.iter().zip(&numeric.layers) {
        for (av, nv) in a
            .dw
            .iter()
            .chain(a.db.iter())
            .zip(n.dw.iter().chain(n.db.iter()))
        {
            let diff = (av - nv).abs();
            if diff <= 1e-9 {
                continue;
            }
            let scale = av.abs().max(nv.abs()).max(1e-12);
            worst = worst.max(diff / scale);
        }
    }
    worst
}
