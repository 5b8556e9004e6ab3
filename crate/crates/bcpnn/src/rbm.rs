//! Bernoulli-Bernoulli restricted Boltzmann machine trained with CD-1.
//!
//! The comparison baseline: sigmoidal visible and hidden units, weights
//! learned by contrastive divergence with a single Gibbs step. The sampling
//! policy is the standard practical recipe — binary-sample the hidden states
//! in the positive phase only, use probabilities everywhere else — and is
//! pinned here so deviations are visible.
//!
//! Per-sample sampling seeds are drawn up front from the master stream, so
//! batch phases can run in parallel while the trajectory stays
//! bit-deterministic for a given seed.

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::{gaussian, sigmoid};
use crate::probe::FeatureExtractor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbmConfig {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// Learning rate.
    pub alpha: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
    pub seed: u64,
}

impl RbmConfig {
    pub fn new(n_visible: usize, n_hidden: usize) -> Self {
        RbmConfig {
            n_visible,
            n_hidden,
            alpha: 0.01,
            batch_size: 256,
            n_epochs: 300,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_visible == 0 || self.n_hidden == 0 {
            return Err(Error::invalid("rbm shape", "need visible and hidden units"));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::invalid("alpha", format!("got {}", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// RBM parameters. Weights are visible-major: `w[v * n_hidden + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    pub(crate) cfg: RbmConfig,
    pub(crate) w: Vec<f64>,
    pub(crate) b_visible: Vec<f64>,
    pub(crate) b_hidden: Vec<f64>,
}

impl RbmModel {
    /// Weights Gaussian(0, 0.01), biases zero.
    pub fn init(cfg: RbmConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w = (0..cfg.n_visible * cfg.n_hidden)
            .map(|_| 0.01 * gaussian(&mut rng))
            .collect();
        Ok(RbmModel {
            w,
            b_visible: vec![0.0; cfg.n_visible],
            b_hidden: vec![0.0; cfg.n_hidden],
            cfg,
        })
    }

    pub fn config(&self) -> RbmConfig {
        self.cfg
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn visible_biases(&self) -> &[f64] {
        &self.b_visible
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.b_hidden
    }

    pub fn hidden_biases_mut(&mut self) -> &mut [f64] {
        &mut self.b_hidden
    }

    /// Hidden unit probabilities `sigmoid(vW + c)` for one visible vector.
    pub fn hidden_probs(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cfg.n_visible);
        debug_assert_eq!(out.len(), self.cfg.n_hidden);
        out.copy_from_slice(&self.b_hidden);
        for (vi, &x) in v.iter().enumerate() {
            if x != 0.0 {
                let row = &self.w[vi * self.cfg.n_hidden..(vi + 1) * self.cfg.n_hidden];
                for (o, &wv) in out.iter_mut().zip(row) {
                    *o += x * wv;
                }
            }
        }
        for o in out.iter_mut() {
            *o = sigmoid(*o);
        }
    }

    /// Visible reconstruction probabilities `sigmoid(h W^T + b)`.
    fn visible_probs(&self, h: &[f64], out: &mut [f64]) {
        debug_assert_eq!(h.len(), self.cfg.n_hidden);
        debug_assert_eq!(out.len(), self.cfg.n_visible);
        for (vi, o) in out.iter_mut().enumerate() {
            let row = &self.w[vi * self.cfg.n_hidden..(vi + 1) * self.cfg.n_hidden];
            let mut acc = self.b_visible[vi];
            for (&hv, &wv) in h.iter().zip(row) {
                acc += hv * wv;
            }
            *o = sigmoid(acc);
        }
    }

    /// One CD-1 update on a minibatch. `row_seeds` supplies one sampling seed
    /// per batch row for the positive-phase binary hidden states. Returns the
    /// mean squared reconstruction error of the batch.
    ///
    /// Phases: `h0 = sigmoid(v0 W + c)`; sample binary `h~0`; reconstruct
    /// probabilities `v1 = sigmoid(h~0 W^T + b)`; `h1 = sigmoid(v1 W + c)`;
    /// then `dW = alpha (v0^T h0 - v1^T h1) / batch` with the analogous bias
    /// updates.
    pub fn cd1_update(&mut self, batch: &[&[f32]], row_seeds: &[u64]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("minibatch"));
        }
        if batch.len() != row_seeds.len() {
            return Err(Error::shape(format!(
                "{} rows vs {} seeds",
                batch.len(),
                row_seeds.len()
            )));
        }
        let nv = self.cfg.n_visible;
        let nh = self.cfg.n_hidden;
        if batch.iter().any(|r| r.len() != nv) {
            return Err(Error::shape("batch row dim does not match n_visible"));
        }
        let b = batch.len();

        let mut v0 = vec![0.0f64; b * nv];
        for (row, src) in v0.chunks_mut(nv).zip(batch) {
            for (d, &s) in row.iter_mut().zip(*src) {
                *d = s as f64;
            }
        }
        let mut h0 = vec![0.0f64; b * nh];
        let mut h0_sample = vec![0.0f64; b * nh];
        let mut v1 = vec![0.0f64; b * nv];
        let mut h1 = vec![0.0f64; b * nh];

        h0.par_chunks_mut(nh)
            .zip(h0_sample.par_chunks_mut(nh))
            .zip(v1.par_chunks_mut(nv))
            .zip(h1.par_chunks_mut(nh))
            .enumerate()
            .for_each(|(s, (((h0_row, h0s_row), v1_row), h1_row))| {
                self.hidden_probs(&v0[s * nv..(s + 1) * nv], h0_row);
                let mut rng = ChaCha8Rng::seed_from_u64(row_seeds[s]);
                for (hs, &p) in h0s_row.iter_mut().zip(h0_row.iter()) {
                    *hs = (rng.random::<f64>() < p) as u8 as f64;
                }
                self.visible_probs(h0s_row, v1_row);
                self.hidden_probs(v1_row, h1_row);
            });

        self.apply_cd_statistics(&v0, &h0, &v1, &h1, b);

        let recon_sq: f64 = v0.iter().zip(&v1).map(|(&a, &b)| (a - b) * (a - b)).sum();
        Ok(recon_sq / (b * nv) as f64)
    }

    /// Applies the CD weight and bias updates from precomputed phase
    /// statistics. Matched statistics (`v1 == v0`, `h1 == h0`) cancel to a
    /// zero update.
    pub(crate) fn apply_cd_statistics(
        &mut self,
        v0: &[f64],
        h0: &[f64],
        v1: &[f64],
        h1: &[f64],
        b: usize,
    ) {
        let nv = self.cfg.n_visible;
        let nh = self.cfg.n_hidden;
        let scale = self.cfg.alpha / b as f64;

        self.w.par_chunks_mut(nh).enumerate().for_each(|(vi, row)| {
            for s in 0..b {
                let pos = scale * v0[s * nv + vi];
                let neg = scale * v1[s * nv + vi];
                if pos != 0.0 || neg != 0.0 {
                    let h0_row = &h0[s * nh..(s + 1) * nh];
                    let h1_row = &h1[s * nh..(s + 1) * nh];
                    for ((w, &h0v), &h1v) in row.iter_mut().zip(h0_row).zip(h1_row) {
                        *w += pos * h0v - neg * h1v;
                    }
                }
            }
        });
        for (vi, bv) in self.b_visible.iter_mut().enumerate() {
            let mut acc = 0.0;
            for s in 0..b {
                acc += v0[s * nv + vi] - v1[s * nv + vi];
            }
            *bv += scale * acc;
        }
        for (hi, bh) in self.b_hidden.iter_mut().enumerate() {
            let mut acc = 0.0;
            for s in 0..b {
                acc += h0[s * nh + hi] - h1[s * nh + hi];
            }
            *bh += scale * acc;
        }
    }

    /// Trains for the configured number of epochs with per-epoch shuffling.
    /// Returns the mean squared reconstruction error per epoch.
    pub fn train(&mut self, data: &LabeledDataset) -> Result<Vec<f64>> {
        if data.is_empty() {
            return Err(Error::Empty("training dataset"));
        }
        if data.dim() != self.cfg.n_visible {
            return Err(Error::shape(format!(
                "dataset dim {} vs n_visible {}",
                data.dim(),
                self.cfg.n_visible
            )));
        }
        let n = data.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_add(1));
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut seeds = vec![0u64; self.cfg.batch_size];
        let mut epoch_errors = Vec::with_capacity(self.cfg.n_epochs);

        for epoch in 0..self.cfg.n_epochs {
            let started = std::time::Instant::now();
            order.shuffle(&mut rng);
            let mut err_sum = 0.0;
            let mut batches = 0usize;
            for chunk in order.chunks(self.cfg.batch_size) {
                let rows: Vec<&[f32]> = chunk.iter().map(|&i| data.sample(i as usize)).collect();
                for s in seeds[..rows.len()].iter_mut() {
                    *s = rng.random();
                }
                err_sum += self.cd1_update(&rows, &seeds[..rows.len()])?;
                batches += 1;
            }
            epoch_errors.push(err_sum / batches as f64);
            log::info!(
                "rbm epoch {}/{}: recon mse {:.6}, {:.1}s",
                epoch + 1,
                self.cfg.n_epochs,
                epoch_errors[epoch],
                started.elapsed().as_secs_f64()
            );
        }
        Ok(epoch_errors)
    }
}

impl FeatureExtractor for RbmModel {
    fn feature_dim(&self) -> usize {
        self.cfg.n_hidden
    }

    fn input_dim(&self) -> usize {
        self.cfg.n_visible
    }

    /// Deterministic hidden sigmoid probabilities.
    fn features_into(&self, sample: &[f32], out: &mut [f32]) {
        let v: Vec<f64> = sample.iter().map(|&x| x as f64).collect();
        let mut h = vec![0.0f64; self.cfg.n_hidden];
        self.hidden_probs(&v, &mut h);
        for (o, &p) in out.iter_mut().zip(&h) {
            *o = p as f32;
        }
    }
}
