//! Command implementations: train, eval, export, batch.

use crate::config::{resolve_data_paths, ModelKind, RunConfig};
use crate::{CliError, EvalArgs, ExportArgs};
use bcpnn::checkpoint::{Checkpoint, RunBundle, TrainedModel};
use bcpnn::probe::FeatureExtractor;
use bcpnn::viz::RfSelection;
use bcpnn::{
    load_idx, train_unsupervised, BcpnnConfig, BcpnnModel, LabeledDataset, LayerSpec, LinearProbe,
    ProbeHyperparams, RbmConfig, RbmModel, Representations, RunReport, Split,
    StructuralPlasticityConfig, TrainOptions,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::time::Instant;

/// Sets the global rayon pool size once; later calls are no-ops.
pub fn init_threads(threads: usize) {
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn probe_hyperparams(cfg: &RunConfig) -> ProbeHyperparams {
    ProbeHyperparams {
        learning_rate: cfg.probe_lr,
        beta1: cfg.probe_beta1,
        beta2: cfg.probe_beta2,
        epsilon: cfg.probe_epsilon,
        batch_size: cfg.probe_batch,
        n_epochs: cfg.probe_epochs,
    }
}

fn n_classes(train: &LabeledDataset, test: &LabeledDataset) -> usize {
    let max_label = train
        .labels()
        .iter()
        .chain(test.labels())
        .copied()
        .max()
        .unwrap_or(0) as usize;
    (max_label + 1).max(2)
}

fn train_model(cfg: &RunConfig, train: &LabeledDataset) -> Result<TrainedModel, CliError> {
    match cfg.model {
        ModelKind::Bcpnn => {
            let model_cfg = BcpnnConfig {
                input: LayerSpec::new(train.dim(), 2)?,
                hidden: LayerSpec::new(cfg.n_hc, cfg.n_mc)?,
                tau_p: cfg.tau_p,
                dt: cfg.dt,
                mu: cfg.mu,
                sp: StructuralPlasticityConfig {
                    p_ih: cfg.p_ih,
                    n_flips: cfg.n_flips,
                    rng_seed: cfg.mask_seed(),
                },
                seed: cfg.trace_seed(),
            };
            let mut model = BcpnnModel::init(&model_cfg)?;
            let opts = TrainOptions::new(cfg.n_epoch, cfg.n_flips, cfg.shuffle_seed());
            train_unsupervised(&mut model, train, &opts)?;
            Ok(TrainedModel::Bcpnn(model))
        }
        ModelKind::Rbm => {
            let rbm_cfg = RbmConfig {
                n_visible: train.dim(),
                n_hidden: cfg.rbm_hidden,
                alpha: cfg.rbm_alpha,
                batch_size: cfg.rbm_batch,
                n_epochs: cfg.rbm_epochs,
                seed: cfg.seed,
            };
            let mut model = RbmModel::init(rbm_cfg)?;
            model.train(train)?;
            Ok(TrainedModel::Rbm(model))
        }
    }
}

fn fit_and_score_probe(
    model: &TrainedModel,
    train: &LabeledDataset,
    test: &LabeledDataset,
    hp: ProbeHyperparams,
    probe_seed: u64,
) -> Result<(LinearProbe, f64, f64), CliError> {
    let train_reprs = Representations::extract(model, train)?;
    let test_reprs = Representations::extract(model, test)?;
    let mut probe = LinearProbe::new(model.feature_dim(), n_classes(train, test), hp)?;
    probe.train(&train_reprs, train.labels(), probe_seed)?;
    let train_acc = probe.evaluate(&train_reprs, train.labels())?;
    let test_acc = probe.evaluate(&test_reprs, test.labels())?;
    Ok((probe, train_acc, test_acc))
}

/// Full training run: unsupervised model, probe, checkpoint, report, and the
/// resolved-config echo.
pub fn run_train(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let paths = resolve_data_paths(cfg)?;
    let train = load_idx(&paths.train_images, &paths.train_labels, Split::Train)?;
    let test = load_idx(&paths.test_images, &paths.test_labels, Split::Test)?;

    let out_dir = cfg.resolved_out_dir();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime(format!("{}: {e}", out_dir.display())))?;
    std::fs::write(out_dir.join("resolved.config"), cfg.to_config_text())
        .map_err(|e| CliError::runtime(e.to_string()))?;

    let started = Instant::now();
    let model = train_model(cfg, &train)?;
    let (probe, train_acc, test_acc) = fit_and_score_probe(
        &model,
        &train,
        &test,
        probe_hyperparams(cfg),
        cfg.probe_seed(),
    )?;
    let wall = started.elapsed().as_secs_f64();

    let report = RunReport {
        model: model.kind().to_string(),
        dataset: cfg.dataset.clone(),
        seed: cfg.seed,
        train_accuracy: train_acc,
        test_accuracy: test_acc,
        zero_weight_fraction: model.zero_weight_fraction(),
        wall_clock_seconds: wall,
        hyperparameters: cfg.hyperparameter_map(),
    };
    report.validate()?;

    let bundle = RunBundle {
        model,
        probe,
        dataset: cfg.dataset.clone(),
        seed: cfg.seed,
    };
    Checkpoint::Run(bundle).save(out_dir.join("checkpoint.bcpc"))?;
    report.write_json(out_dir.join("report.json"))?;
    report.write_csv(out_dir.join("report.csv"))?;
    Ok(report)
}

/// Loads a run checkpoint and recomputes both accuracies, no retraining.
pub fn run_eval(args: &EvalArgs) -> Result<RunReport, CliError> {
    let bundle = match Checkpoint::load(&args.checkpoint)? {
        Checkpoint::Run(bundle) => bundle,
        _ => {
            return Err(CliError::runtime(format!(
                "{}: not a run checkpoint (train writes those)",
                args.checkpoint.display()
            )))
        }
    };
    let mut path_cfg = RunConfig {
        data_dir: args.data_dir.clone(),
        train_images: args.train_images.clone(),
        train_labels: args.train_labels.clone(),
        test_images: args.test_images.clone(),
        test_labels: args.test_labels.clone(),
        ..RunConfig::default()
    };
    path_cfg.dataset = args
        .dataset
        .clone()
        .unwrap_or_else(|| bundle.dataset.clone());
    let paths = resolve_data_paths(&path_cfg)?;
    let train = load_idx(&paths.train_images, &paths.train_labels, Split::Train)?;
    let test = load_idx(&paths.test_images, &paths.test_labels, Split::Test)?;

    let started = Instant::now();
    let train_reprs = Representations::extract(&bundle.model, &train)?;
    let test_reprs = Representations::extract(&bundle.model, &test)?;
    let train_acc = bundle.probe.evaluate(&train_reprs, train.labels())?;
    let test_acc = bundle.probe.evaluate(&test_reprs, test.labels())?;

    let report = RunReport {
        model: bundle.model.kind().to_string(),
        dataset: path_cfg.dataset,
        seed: bundle.seed,
        train_accuracy: train_acc,
        test_accuracy: test_acc,
        zero_weight_fraction: bundle.model.zero_weight_fraction(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        hyperparameters: Default::default(),
    };
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(e.to_string()))?;
        report.write_json(dir.join("report.json"))?;
        report.write_csv(dir.join("report.csv"))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportKind {
    /// Receptive-field images (mask PGM + signed weight-map PPMs).
    Rf,
    /// Weight histogram CSV.
    Hist,
}

fn checkpoint_model(path: &std::path::Path) -> Result<TrainedModel, CliError> {
    Ok(match Checkpoint::load(path)? {
        Checkpoint::Run(bundle) => bundle.model,
        Checkpoint::Bcpnn(m) => TrainedModel::Bcpnn(m),
        Checkpoint::Rbm(m) => TrainedModel::Rbm(m),
        Checkpoint::Probe(_) => {
            return Err(CliError::runtime(
                "probe checkpoints have no exportable weights",
            ))
        }
    })
}

/// Random distinct picks from `0..n`, sorted.
fn pick(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut rng);
    let mut out: Vec<usize> = all.into_iter().take(count).collect();
    out.sort_unstable();
    out
}

pub fn run_export(args: &ExportArgs) -> Result<Vec<PathBuf>, CliError> {
    let model = checkpoint_model(&args.checkpoint)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| CliError::runtime(e.to_string()))?;
    match args.kind {
        ExportKind::Hist => {
            let hist = match &model {
                TrainedModel::Bcpnn(m) => {
                    let hist = bcpnn::viz::weight_histogram(m, args.bins)?;
                    println!("zero_weight_fraction = {}", m.zero_weight_fraction());
                    hist
                }
                TrainedModel::Rbm(m) => bcpnn::viz::rbm_weight_histogram(m, args.bins)?,
            };
            let path = args.out_dir.join("weights_hist.csv");
            hist.write_csv(&path)?;
            Ok(vec![path])
        }
        ExportKind::Rf => match &model {
            TrainedModel::Bcpnn(m) => {
                let hcs = args.hcs.clone().unwrap_or_else(|| {
                    pick(
                        m.hidden_spec().n_hc(),
                        args.n_hcs.min(m.hidden_spec().n_hc()),
                        args.selection_seed,
                    )
                });
                let mcs = args.mcs.clone().unwrap_or_else(|| {
                    pick(
                        m.hidden_spec().n_mc(),
                        args.n_mcs.min(m.hidden_spec().n_mc()),
                        args.selection_seed.wrapping_add(1),
                    )
                });
                Ok(bcpnn::viz::export_receptive_fields(
                    m,
                    &RfSelection { hcs, mcs },
                    &args.out_dir,
                )?)
            }
            TrainedModel::Rbm(m) => {
                let units = args.hcs.clone().unwrap_or_else(|| {
                    pick(
                        m.config().n_hidden,
                        (args.n_hcs * args.n_mcs).min(m.config().n_hidden),
                        args.selection_seed,
                    )
                });
                Ok(bcpnn::viz::export_rbm_receptive_fields(
                    m,
                    &units,
                    &args.out_dir,
                )?)
            }
        },
    }
}

/// Sample mean and standard deviation (ddof = 1; 0 for a single run).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Trains `runs` seeds (seed, seed+1, ...) into per-seed subdirectories and
/// writes an aggregate summary. Returns the summary JSON line.
pub fn run_batch(cfg: &RunConfig, runs: usize) -> Result<String, CliError> {
    if runs == 0 {
        return Err(CliError::config("runs: must be >= 1"));
    }
    let base = cfg.resolved_out_dir();
    let mut train_accs = Vec::with_capacity(runs);
    let mut test_accs = Vec::with_capacity(runs);
    let mut seeds = Vec::with_capacity(runs);
    for k in 0..runs {
        let mut run_cfg = cfg.clone();
        run_cfg.seed = cfg.seed + k as u64;
        run_cfg.out_dir = Some(base.join(format!("seed_{}", run_cfg.seed)));
        log::info!("batch run {}/{} (seed {})", k + 1, runs, run_cfg.seed);
        let report = run_train(&run_cfg)?;
        train_accs.push(report.train_accuracy);
        test_accs.push(report.test_accuracy);
        seeds.push(run_cfg.seed);
    }
    let (train_mean, train_std) = mean_std(&train_accs);
    let (test_mean, test_std) = mean_std(&test_accs);
    let seeds_json = seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let summary = format!(
        "{{\"model\":\"{}\",\"dataset\":\"{}\",\"runs\":{},\"seeds\":[{}],\"train_accuracy_mean\":{},\"train_accuracy_std\":{},\"test_accuracy_mean\":{},\"test_accuracy_std\":{}}}",
        cfg.model.as_str(),
        cfg.dataset,
        runs,
        seeds_json,
        train_mean,
        train_std,
        test_mean,
        test_std
    );
    std::fs::create_dir_all(&base).map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(base.join("summary.json"), format!("{summary}\n"))
        .map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_matches_hand_computation() {
        let (m, s) = mean_std(&[0.9, 1.0, 0.8]);
        assert!((m - 0.9).abs() < 1e-12);
        assert!((s - 0.1).abs() < 1e-12);
        let (m1, s1) = mean_std(&[0.5]);
        assert_eq!((m1, s1), (0.5, 0.0));
    }

    #[test]
    fn pick_is_sorted_distinct_and_seeded() {
        let a = pick(100, 10, 4);
        let b = pick(100, 10, 4);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(pick(3, 10, 0).len() == 3);
    }
}
