//! Inference correctness against independent oracles.
//!
//! The network computes hidden activities through log-space supports and a
//! softmax. These tests recompute the same posteriors by direct enumeration
//! of the naive-Bayes factorization — raw probability products, normalized
//! by summation, no logarithms — and demand agreement to 1e-10 relative
//! error. Soft inputs are checked against an independent product-of-powers
//! route.

mod common;

use common::{enumerate_posterior, max_relative_error, random_net, RandomNet};

use bcpnn::{
    BcpnnModel, ConnectivityMask, LayerSpec, ModelParts, ModularLayer, StructuralPlasticityConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent soft-input route: `post(y) ∝ p(y) * prod_i prod_x
/// (p_xy / (p_x p_y))^{pi(x)}`, evaluated with `powf` products.
fn soft_posterior_by_powers(net: &RandomNet, pi_in: &[f64]) -> Vec<f64> {
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
            for i in 0..net.input.n_hc() {
                if !net.model.mask().is_active(i, j) {
                    continue;
                }
                for k in 0..n_mc_in {
                    let u = i * n_mc_in + k;
                    let ratio = block[m * n_in_units + u] / (net.model.p_x()[u] * p_y);
                    post *= ratio.powf(pi_in[u]);
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

#[test]
fn one_hot_inference_matches_enumeration_over_1000_random_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbeef);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let net = random_net(&mut rng);
        let observed: Vec<usize> = (0..net.input.n_hc())
            .map(|_| rng.random_range(0..net.input.n_mc()))
            .collect();
        let mut pi = vec![0.0f64; net.input.units()];
        for (i, &o) in observed.iter().enumerate() {
            pi[i * net.input.n_mc() + o] = 1.0;
        }
        let layer = ModularLayer::from_activities(net.input, pi).unwrap();
        let got = net.model.activity_update(&layer).unwrap();
        let want = enumerate_posterior(&net, &observed);
        worst = worst.max(max_relative_error(got.activities(), &want));
    }
    assert!(worst < 1e-10, "worst relative error {worst:e}");
}

#[test]
fn soft_inference_matches_power_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let net = random_net(&mut rng);
        let n_mc_in = net.input.n_mc();
        let mut pi = vec![0.0f64; net.input.units()];
        for i in 0..net.input.n_hc() {
            let mut sum = 0.0;
            for k in 0..n_mc_in {
                let v = rng.random::<f64>() + 1e-3;
                pi[i * n_mc_in + k] = v;
                sum += v;
            }
            for k in 0..n_mc_in {
                pi[i * n_mc_in + k] /= sum;
            }
        }
        let layer = ModularLayer::from_activities(net.input, pi.clone()).unwrap();
        let got = net.model.activity_update(&layer).unwrap();
        let want = soft_posterior_by_powers(&net, &pi);
        worst = worst.max(max_relative_error(got.activities(), &want));
    }
    assert!(worst < 1e-10, "worst relative error {worst:e}");
}

#[test]
fn exact_posterior_on_handwritten_joint_table() {
    // 2 input HCs x 2 MCs, 1 hidden HC x 3 MCs, full connectivity, traces
    // from a hand-built table; the expected posterior is enumerated by hand
    // below for the observation (x_0 = 1, x_1 = 0).
    let input = LayerSpec::new(2, 2).unwrap();
    let hidden = LayerSpec::new(1, 3).unwrap();
    let p_y = vec![0.5, 0.3, 0.2];
    // Block 0 column layout per m: units (hc0mc0, hc0mc1, hc1mc0, hc1mc1).
    #[rustfmt::skip]
    let p_xy = vec![
        // m = 0
        0.30, 0.20, 0.35, 0.15,
        // m = 1
        0.10, 0.20, 0.15, 0.15,
        // m = 2
        0.10, 0.10, 0.05, 0.15,
    ];
    // Hidden-MC marginals per input unit: (0.5, 0.5, 0.55, 0.45).
    let p_x = vec![0.5, 0.5, 0.55, 0.45];
    let model = BcpnnModel::from_parts(ModelParts {
        input,
        hidden,
        tau_p: 60.0,
        dt: 0.01,
        mu: 10.0,
        sp: StructuralPlasticityConfig::default(),
        seed: 0,
        mask: ConnectivityMask::full(2, 1),
        p_x,
        p_y: p_y.clone(),
        p_xy: vec![p_xy.clone()],
    })
    .unwrap();

    // post(m) ∝ p_y(m) * (p_xy(x0=1, m) / p_y(m)) * (p_xy(x1=0, m) / p_y(m)).
    let unnorm: Vec<f64> = (0..3)
        .map(|m| {
            let py = p_y[m];
            py * (p_xy[m * 4 + 1] / py) * (p_xy[m * 4 + 2] / py)
        })
        .collect();
    let total: f64 = unnorm.iter().sum();
    let expected: Vec<f64> = unnorm.iter().map(|&v| v / total).collect();

    let layer = ModularLayer::from_activities(input, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let got = model.activity_update(&layer).unwrap();
    for (g, e) in got.activities().iter().zip(&expected) {
        assert!(((g - e) / e).abs() < 1e-12, "{g} vs {e}");
    }
}
