//! Benchmark fixtures shared by the criterion targets.

use bcpnn::{synth_mixture, BcpnnConfig, BcpnnModel, LabeledDataset, LayerSpec};

/// A mid-sized model: 196 binary input HCs (14x14), 10 hidden HCs of 50 MCs,
/// 20% connectivity. Big enough that per-sample costs dominate, small enough
/// to iterate quickly.
pub fn bench_model(seed: u64) -> BcpnnModel {
    let mut cfg = BcpnnConfig::new(
        LayerSpec::new(196, 2).unwrap(),
        LayerSpec::new(10, 50).unwrap(),
    );
    cfg.sp.p_ih = 0.2;
    cfg.sp.rng_seed = seed;
    cfg.seed = seed.wrapping_add(1);
    BcpnnModel::init(&cfg).unwrap()
}

pub fn bench_data(n_samples: usize) -> LabeledDataset {
    synth_mixture(10, 196, 0.15, n_samples, 99).unwrap()
}

/// Valid input activities for one sample.
pub fn encoded_sample(data: &LabeledDataset, idx: usize) -> Vec<f64> {
    let mut pi = vec![0.0f64; data.dim() * 2];
    bcpnn::encode_into(data.sample(idx), &mut pi);
    pi
}
