//! Minimal library walkthrough: train a single-hypercolumn network on a
//! synthetic binary mixture, look at what the minicolumns learned, then fit
//! a probe on the hidden representations.
//!
//! Run with: cargo run --release --example mixture

use bcpnn::probe::FeatureExtractor;
use bcpnn::{
    synth_mixture, train_unsupervised, BcpnnConfig, BcpnnModel, LayerSpec, LinearProbe,
    ProbeHyperparams, Representations, TrainOptions,
};

fn main() -> bcpnn::Result<()> {
    // 3 clusters over 16 binary pixels, 10% bit-flip noise.
    let data = synth_mixture(3, 16, 0.1, 1500, 7)?;

    // One hidden hypercolumn with 3 minicolumns acts as a 3-component
    // mixture model; full connectivity, no structural plasticity needed.
    let mut cfg = BcpnnConfig::new(LayerSpec::new(16, 2)?, LayerSpec::new(1, 3)?);
    cfg.sp.p_ih = 1.0;
    cfg.seed = 3;
    let mut model = BcpnnModel::init(&cfg)?;
    train_unsupervised(&mut model, &data, &TrainOptions::new(12, 0, 2))?;

    let assignments = bcpnn::viz::mc_assignments(&model, &data, 0)?;
    let purity = bcpnn::viz::cluster_purity(&assignments, data.labels())?;
    println!("cluster purity of the minicolumn assignments: {purity:.3}");

    // A linear probe on the frozen hidden activities separates the labels.
    let reprs = Representations::extract(&model, &data)?;
    let mut probe = LinearProbe::new(
        model.feature_dim(),
        3,
        ProbeHyperparams {
            n_epochs: 30,
            batch_size: 64,
            learning_rate: 0.01,
            ..ProbeHyperparams::default()
        },
    )?;
    probe.train(&reprs, data.labels(), 5)?;
    let acc = probe.evaluate(&reprs, data.labels())?;
    println!("probe training accuracy: {acc:.3}");
    Ok(())
}
