//! Unsupervised training: per-sample incremental updates plus scheduled
//! structural plasticity.
//!
//! Each epoch walks the dataset in a seeded shuffled order. Every sample
//! presentation runs inference, one Euler step of the trace dynamics, and a
//! weight refresh; `n_flips` flip rounds fire at evenly spaced sample indices
//! within the epoch. Everything is deterministic given the seeds.

use crate::data::{encode_into, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::BcpnnModel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Placement of flip rounds within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlipSchedule {
    /// `n_flips` rounds at evenly spaced sample indices per epoch.
    #[default]
    EvenlySpaced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub n_epoch: usize,
    /// Flip rounds per epoch; each round lets every hidden HC flip at most
    /// one connection.
    pub n_flips: usize,
    pub schedule: FlipSchedule,
    /// Seed of the per-epoch shuffle stream.
    pub shuffle_seed: u64,
}

impl TrainOptions {
    pub fn new(n_epoch: usize, n_flips: usize, shuffle_seed: u64) -> Self {
        TrainOptions {
            n_epoch,
            n_flips,
            schedule: FlipSchedule::EvenlySpaced,
            shuffle_seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainStats {
    pub samples_seen: usize,
    /// Flip rounds that fired (scored + attempted).
    pub flip_rounds: usize,
    /// Flips actually executed across all rounds and hidden HCs.
    pub flips_executed: usize,
}

/// Number of flip rounds due after presenting sample `t` of `n`, so that
/// exactly `n_flips` rounds land per epoch at evenly spaced points.
fn flip_rounds_after(t: usize, n: usize, n_flips: usize) -> usize {
    (t + 1) * n_flips / n - t * n_flips / n
}

/// Trains the model on `data` (labels ignored). The dataset must match the
/// model's input layer: one binary hypercolumn per sample dimension.
pub fn train_unsupervised(
    model: &mut BcpnnModel,
    data: &LabeledDataset,
    opts: &TrainOptions,
) -> Result<TrainStats> {
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let input_spec = model.input_spec();
    if input_spec.n_mc() != 2 {
        return Err(Error::shape(
            "probability coding drives a binary input layer (n_mc = 2)",
        ));
    }
    if input_spec.n_hc() != data.dim() {
        return Err(Error::shape(format!(
            "dataset dim {} vs input layer of {} HCs",
            data.dim(),
            input_spec.n_hc()
        )));
    }

    let n = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.shuffle_seed);
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut pi_in = vec![0.0f64; input_spec.units()];
    let mut pi_hid = vec![0.0f64; model.hidden_spec().units()];
    let mut stats = TrainStats::default();

    for epoch in 0..opts.n_epoch {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_flips = 0usize;
        for (t, &idx) in order.iter().enumerate() {
            encode_into(data.sample(idx as usize), &mut pi_in);
            model.activity_update_into(&pi_in, &mut pi_hid);
            model.learning_step_into(&pi_in, &pi_hid);
            model.compute_weights()?;
            stats.samples_seen += 1;

            let FlipSchedule::EvenlySpaced = opts.schedule;
            for _ in 0..flip_rounds_after(t, n, opts.n_flips) {
                let scores = model.score_all();
                let flips = model.flip_step(&scores)?;
                stats.flip_rounds += 1;
                stats.flips_executed += flips.len();
                epoch_flips += flips.len();
            }
        }
        log::info!(
            "epoch {}/{}: {} samples, {} flips, {:.1}s",
            epoch + 1,
            opts.n_epoch,
            n,
            epoch_flips,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(stats)
}
