//! End-to-end library tests: the full unsupervised-train-then-probe pipeline
//! on synthetic data, and the semantic effect of structural plasticity.

use bcpnn::probe::FeatureExtractor;
use bcpnn::{
    synth_mixture, train_unsupervised, BcpnnConfig, BcpnnModel, LabeledDataset, LayerSpec,
    LinearProbe, ProbeHyperparams, Representations, Split, TrainOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn full_pipeline_separates_clusters_on_image_sized_inputs() {
    // Ten easy clusters over 784 binary pixels, the image-sized layout the
    // real datasets use, at a fraction of the unit counts.
    let data = synth_mixture(10, 784, 0.05, 600, 21).unwrap();
    let mut cfg = BcpnnConfig::new(
        LayerSpec::new(784, 2).unwrap(),
        LayerSpec::new(5, 10).unwrap(),
    );
    cfg.sp.p_ih = 0.1;
    cfg.sp.rng_seed = 1;
    cfg.seed = 2;
    let mut model = BcpnnModel::init(&cfg).unwrap();
    train_unsupervised(&mut model, &data, &TrainOptions::new(2, 8, 3)).unwrap();

    let reprs = Representations::extract(&model, &data).unwrap();
    let mut probe = LinearProbe::new(
        model.feature_dim(),
        10,
        ProbeHyperparams {
            batch_size: 64,
            n_epochs: 40,
            learning_rate: 0.01,
            ..ProbeHyperparams::default()
        },
    )
    .unwrap();
    probe.train(&reprs, data.labels(), 4).unwrap();
    let acc = probe.evaluate(&reprs, data.labels()).unwrap();
    assert!(acc >= 0.95, "pipeline accuracy {acc}");

    // The sparsity artifact holds on the trained model too.
    let zero = model.zero_weight_fraction();
    assert!(zero >= (1.0 - cfg.sp.p_ih) - 0.02, "zero fraction {zero}");
}

/// Dataset where only the first `n_informative` pixels carry cluster
/// structure; the rest are pure coin flips every sample.
fn informative_vs_noise(
    n_clusters: usize,
    n_informative: usize,
    n_noise: usize,
    n_samples: usize,
    seed: u64,
) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<bool>> = (0..n_clusters)
        .map(|_| {
            (0..n_informative)
                .map(|_| rng.random::<f64>() < 0.5)
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for t in 0..n_samples {
        let c = t % n_clusters;
        let mut row = Vec::with_capacity(n_informative + n_noise);
        for &bit in &prototypes[c] {
            let flip = rng.random::<f64>() < 0.05;
            row.push((bit ^ flip) as u8 as f32);
        }
        for _ in 0..n_noise {
            row.push((rng.random::<f64>() < 0.5) as u8 as f32);
        }
        rows.push(row);
        labels.push(c as u8);
    }
    LabeledDataset::from_rows(rows, labels, Split::Train).unwrap()
}

#[test]
fn flips_migrate_connections_toward_informative_inputs() {
    // Two thirds of the pixels carry cluster structure, one third is pure
    // noise. Enough informative inputs are wired at initialization for the
    // minicolumns to specialize, after which the noise connections' mutual
    // information decays and flips evict them.
    let n_informative = 16;
    let n_noise = 8;
    let data = informative_vs_noise(3, n_informative, n_noise, 900, 11);

    let mut cfg = BcpnnConfig::new(
        LayerSpec::new(n_informative + n_noise, 2).unwrap(),
        LayerSpec::new(2, 3).unwrap(),
    );
    cfg.sp.p_ih = 0.5;
    cfg.sp.rng_seed = 5;
    cfg.seed = 6;
    let mut model = BcpnnModel::init(&cfg).unwrap();

    let informative_active = |model: &BcpnnModel| -> usize {
        (0..2)
            .map(|j| {
                model
                    .mask()
                    .active_inputs(j)
                    .iter()
                    .filter(|&&i| (i as usize) < n_informative)
                    .count()
            })
            .sum()
    };
    let total_active: usize = (0..2).map(|j| model.mask().in_degree(j) as usize).sum();
    let before = informative_active(&model);

    train_unsupervised(&mut model, &data, &TrainOptions::new(10, 6, 7)).unwrap();

    let after = informative_active(&model);
    assert!(
        after > before,
        "informative connections did not grow: {before} -> {after}"
    );
    let frac = after as f64 / total_active as f64;
    assert!(
        frac >= 0.85,
        "only {after}/{total_active} active connections are informative"
    );
}
