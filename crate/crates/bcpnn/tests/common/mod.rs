//! Shared fixtures for the integration suites: randomized networks and the
//! independent posterior-enumeration oracle.

#![allow(dead_code)]

use bcpnn::{BcpnnModel, ConnectivityMask, LayerSpec, ModelParts, StructuralPlasticityConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct RandomNet {
    pub model: BcpnnModel,
    pub input: LayerSpec,
    pub hidden: LayerSpec,
}

/// A random small model: random mask (every hidden HC keeps >= 1 input),
/// random per-HC categorical `p_x`, random joint blocks whose hidden-MC
/// marginal matches `p_x` exactly, random normalized `p_y`.
pub fn random_net(rng: &mut ChaCha8Rng) -> RandomNet {
    let n_in_hc = rng.random_range(1..=3usize);
    let n_mc_in = rng.random_range(2..=4usize);
    let n_hid_hc = rng.random_range(1..=3usize);
    let n_mc_h = rng.random_range(2..=4usize);
    let input = LayerSpec::new(n_in_hc, n_mc_in).unwrap();
    let hidden = LayerSpec::new(n_hid_hc, n_mc_h).unwrap();
    let n_in_units = input.units();

    let mask = ConnectivityMask::bernoulli(n_in_hc, n_hid_hc, 0.7, rng).unwrap();

    let mut p_x = vec![0.0f64; n_in_units];
    for i in 0..n_in_hc {
        let mut sum = 0.0;
        for k in 0..n_mc_in {
            let v = rng.random::<f64>() + 0.05;
            p_x[i * n_mc_in + k] = v;
            sum += v;
        }
        for k in 0..n_mc_in {
            p_x[i * n_mc_in + k] /= sum;
        }
    }

    let mut p_y = vec![0.0f64; hidden.units()];
    for j in 0..n_hid_hc {
        let mut sum = 0.0;
        for m in 0..n_mc_h {
            let v = rng.random::<f64>() + 0.05;
            p_y[j * n_mc_h + m] = v;
            sum += v;
        }
        for m in 0..n_mc_h {
            p_y[j * n_mc_h + m] /= sum;
        }
    }

    let mut blocks = Vec::with_capacity(n_hid_hc);
    for _ in 0..n_hid_hc {
        let mut block = vec![0.0f64; n_mc_h * n_in_units];
        for u in 0..n_in_units {
            let mut col = vec![0.0f64; n_mc_h];
            let mut sum = 0.0;
            for c in col.iter_mut() {
                *c = rng.random::<f64>() + 0.02;
                sum += *c;
            }
            for (m, &c) in col.iter().enumerate() {
                block[m * n_in_units + u] = p_x[u] * c / sum;
            }
        }
        blocks.push(block);
    }

    let model = BcpnnModel::from_parts(ModelParts {
        input,
        hidden,
        tau_p: 60.0,
        dt: 0.01,
        mu: 10.0,
        sp: StructuralPlasticityConfig::default(),
        seed: 0,
        mask,
        p_x,
        p_y,
        p_xy: blocks,
    })
    .unwrap();
    RandomNet {
        model,
        input,
        hidden,
    }
}

/// Brute-force enumeration of the naive-Bayes posterior for a one-hot input:
/// `post(y) ∝ p(y) * prod_{i connected} p(x_i | y)` with
/// `p(x | y) = p_xy / p_y`, evaluated with raw products and normalized by
/// direct summation. Entirely independent of the log-space inference path.
pub fn enumerate_posterior(net: &RandomNet, observed: &[usize]) -> Vec<f64> {
    let n_mc_in = net.input.n_mc();
    let n_mc_h = net.hidden.n_mc();
    let n_in_units = net.input.units();
    let mut out = vec![0.0f64; net.hidden.units()];
    for j in 0..net.hidden.n_hc() {
        let block = net.model.joint_block(j);
        let mut total = 0.0;
        for m in 0..n_mc_h {
            let p_y = net.model.p_y()[net.hidden.unit(j, m)];
            let mut post = p_y;
            for (i, &obs) in observed.iter().enumerate() {
                if net.model.mask().is_active(i, j) {
                    let u = i * n_mc_in + obs;
                    post *= block[m * n_in_units + u] / p_y;
                }
            }
            out[net.hidden.unit(j, m)] = post;
            total += post;
        }
        for m in 0..n_mc_h {
            out[net.hidden.unit(j, m)] /= total;
        }
    }
    out
}

pub fn max_relative_error(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(&g, &w)| ((g - w) / w).abs())
        .fold(0.0, f64::max)
}
