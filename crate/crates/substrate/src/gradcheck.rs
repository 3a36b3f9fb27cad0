//! Central finite-difference gradient probes used by test suites across the
//! workspace to validate analytic gradients of arbitrary scalar losses.

use crate::net::DenseNet;
use crate::rng::Rng;

pub const FD_STEP: f64 = 1e-5;

/// Central finite difference of `loss` w.r.t. the flat parameter at `index`.
pub fn central_diff_at(
    net: &mut DenseNet,
    index: usize,
    mut loss: impl FnMut(&mut DenseNet) -> f64,
    h: f64,
) -> f64 {
    let mut params = net.params_flat();
    let orig = params[index];
    params[index] = orig + h;
    net.set_params_flat(&params);
    let hi = loss(net);
    params[index] = orig - h;
    net.set_params_flat(&params);
    let lo = loss(net);
    params[index] = orig;
    net.set_params_flat(&params);
    (hi - lo) / (2.0 * h)
}

/// Compare analytic gradients against central finite differences on
/// `probes` randomly chosen parameters. Returns the worst relative error.
///
/// Relative error uses `|a - n| / max(1, |a|, |n|)` so near-zero gradients
/// do not blow up the ratio.
pub fn probe_gradients(
    net: &mut DenseNet,
    analytic: &[f64],
    mut loss: impl FnMut(&mut DenseNet) -> f64,
    probes: usize,
    rng: &mut Rng,
) -> f64 {
    assert_eq!(analytic.len(), net.param_count());
    let n = net.param_count();
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let i = rng.uniform_usize(n);
        let fd = central_diff_at(net, i, &mut loss, FD_STEP);
        let a = analytic[i];
        let rel = (a - fd).abs() / 1.0_f64.max(a.abs()).max(fd.abs());
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, LayerSpec};
    use ndarray::Array2;

    #[test]
    fn analytic_gradients_match_fd_on_mixed_net() {
        let mut rng = Rng::new(21);
        let mut net = DenseNet::new(
            &[
                LayerSpec {
                    in_dim: 4,
                    out_dim: 6,
                    activation: Activation::Relu,
                    batch_norm: true,
                },
                LayerSpec {
                    in_dim: 6,
                    out_dim: 5,
                    activation: Activation::Tanh,
                    batch_norm: false,
                },
                LayerSpec {
                    in_dim: 5,
                    out_dim: 3,
                    activation: Activation::Sigmoid,
                    batch_norm: false,
                },
            ],
            0.9,
            &mut rng,
        );
        let batch = rng.normal_array2(8, 4);
        // Loss: sum of squared outputs.
        let (out, cache) = net.forward(&batch).unwrap();
        let (analytic, _) = net.backward(&cache, &(2.0 * &out));
        let mut loss = |n: &mut DenseNet| {
            let (o, _) = n.forward(&batch).unwrap();
            o.mapv(|v| v * v).sum()
        };
        let worst = probe_gradients(&mut net, &analytic, &mut loss, 100, &mut rng);
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn input_gradient_matches_fd() {
        let mut rng = Rng::new(22);
        let mut net = DenseNet::mlp(&[3, 8, 2], Activation::Tanh, &mut rng);
        let batch = rng.normal_array2(4, 3);
        let (out, cache) = net.forward(&batch).unwrap();
        let (_, din) = net.backward(&cache, &(2.0 * &out));
        let h = FD_STEP;
        for probe in [(0usize, 0usize), (2, 1), (3, 2)] {
            let mut hi = batch.clone();
            hi[[probe.0, probe.1]] += h;
            let mut lo = batch.clone();
            lo[[probe.0, probe.1]] -= h;
            let f = |b: &Array2<f64>| net.predict(b).unwrap().mapv(|v| v * v).sum();
            let fd = (f(&hi) - f(&lo)) / (2.0 * h);
            let a = din[[probe.0, probe.1]];
            assert!(
                (a - fd).abs() / 1.0_f64.max(a.abs()) < 1e-4,
                "input grad {a} vs fd {fd}"
            );
        }
    }
}
