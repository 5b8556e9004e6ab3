//! Linear probe: a softmax classifier trained with Adam on frozen hidden
//! representations.
//!
//! The probe is the measuring instrument for every unsupervised model here:
//! representations are extracted once from a frozen model, then the probe is
//! fit with minibatch cross-entropy and evaluated by argmax accuracy. The
//! probe never feeds back into unsupervised learning.
//!
//! Training is bit-deterministic for a given seed regardless of thread
//! count: minibatch gradients are accumulated in fixed-size chunks in
//! parallel and reduced in chunk order.

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::{argmax, softmax_in_place};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per parallel gradient chunk; fixed so the reduction order does
/// not depend on the thread count.
const GRAD_CHUNK: usize = 32;

/// Anything that can map a raw sample to a frozen hidden representation.
pub trait FeatureExtractor: Sync {
    /// Dimensionality of the representation.
    fn feature_dim(&self) -> usize;
    /// Sample dimensionality the extractor expects.
    fn input_dim(&self) -> usize;
    /// Writes the representation of `sample` into `out`.
    fn features_into(&self, sample: &[f32], out: &mut [f32]);
}

impl FeatureExtractor for crate::model::BcpnnModel {
    fn feature_dim(&self) -> usize {
        self.hidden_spec().units()
    }

    fn input_dim(&self) -> usize {
        self.input_spec().n_hc()
    }

    /// Hidden posterior activities for the probability-coded sample.
    fn features_into(&self, sample: &[f32], out: &mut [f32]) {
        debug_assert_eq!(sample.len(), self.input_dim());
        let mut pi_in = vec![0.0f64; self.input_spec().units()];
        let mut pi_hid = vec![0.0f64; self.hidden_spec().units()];
        crate::data::encode_into(sample, &mut pi_in);
        self.activity_update_into(&pi_in, &mut pi_hid);
        for (o, &v) in out.iter_mut().zip(&pi_hid) {
            *o = v as f32;
        }
    }
}

/// Frozen representations of a dataset, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Representations {
    n: usize,
    dim: usize,
    data: Vec<f32>,
}

impl Representations {
    /// Extracts representations for every sample of `data` in parallel.
    pub fn extract<M: FeatureExtractor>(model: &M, data: &LabeledDataset) -> Result<Self> {
        if data.dim() != model.input_dim() {
            return Err(Error::shape(format!(
                "dataset dim {} vs extractor input dim {}",
                data.dim(),
                model.input_dim()
            )));
        }
        let dim = model.feature_dim();
        let mut out = vec![0.0f32; data.len() * dim];
        out.par_chunks_mut(dim).enumerate().for_each(|(i, row)| {
            model.features_into(data.sample(i), row);
        });
        Ok(Representations {
            n: data.len(),
            dim,
            data: out,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("representations"));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::shape("ragged representation rows"));
        }
        let n = rows.len();
        Ok(Representations {
            n,
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Adam and minibatch hyperparameters of the probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeHyperparams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub n_epochs: usize,
}

impl Default for ProbeHyperparams {
    fn default() -> Self {
        ProbeHyperparams {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 256,
            n_epochs: 300,
        }
    }
}

impl ProbeHyperparams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning_rate", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("beta1/beta2", "must lie in [0,1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon", "must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        Ok(())
    }
}

/// Softmax classifier with Adam state. Weights are class-major:
/// `w[c * n_in + d]`. Zero-initialized (the objective is convex).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub(crate) n_in: usize,
    pub(crate) n_classes: usize,
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
    pub(crate) m_w: Vec<f64>,
    pub(crate) v_w: Vec<f64>,
    pub(crate) m_b: Vec<f64>,
    pub(crate) v_b: Vec<f64>,
    pub(crate) step: u64,
    pub(crate) hp: ProbeHyperparams,
}

impl LinearProbe {
    pub fn new(n_in: usize, n_classes: usize, hp: ProbeHyperparams) -> Result<Self> {
        if n_in == 0 || n_classes < 2 {
            return Err(Error::invalid(
                "probe shape",
                format!("n_in {n_in}, n_classes {n_classes}"),
            ));
        }
        hp.validate()?;
        Ok(LinearProbe {
            n_in,
            n_classes,
            w: vec![0.0; n_classes * n_in],
            b: vec![0.0; n_classes],
            m_w: vec![0.0; n_classes * n_in],
            v_w: vec![0.0; n_classes * n_in],
            m_b: vec![0.0; n_classes],
            v_b: vec![0.0; n_classes],
            step: 0,
            hp,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn hyperparams(&self) -> ProbeHyperparams {
        self.hp
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    fn logits_into(&self, x: &[f32], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        for (c, o) in out.iter_mut().enumerate() {
            let row = &self.w[c * self.n_in..(c + 1) * self.n_in];
            let mut acc = self.b[c];
            for (wi, &xi) in row.iter().zip(x) {
                acc += wi * xi as f64;
            }
            *o = acc;
        }
    }

    /// Class probabilities `softmax(Wx + b)`; sums to one.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.n_in {
            return Err(Error::shape(format!(
                "input dim {} vs probe dim {}",
                x.len(),
                self.n_in
            )));
        }
        let mut out = vec![0.0; self.n_classes];
        self.logits_into(x, &mut out);
        softmax_in_place(&mut out);
        Ok(out)
    }

    /// Predicted class (argmax of the logits; ties go to the lowest index).
    pub fn predict(&self, x: &[f32]) -> usize {
        let mut logits = vec![0.0; self.n_classes];
        self.logits_into(x, &mut logits);
        argmax(&logits)
    }

    /// Cross-entropy of one sample, `-ln p(label)`.
    pub fn loss(&self, x: &[f32], label: usize) -> Result<f64> {
        let p = self.forward(x)?;
        Ok(-p[label].ln())
    }

    /// Trains with minibatch cross-entropy and Adam for the configured number
    /// of epochs; samples are reshuffled each epoch with a generator seeded
    /// by `seed`. Returns the mean training loss per epoch.
    pub fn train(&mut self, reprs: &Representations, labels: &[u8], seed: u64) -> Result<Vec<f64>> {
        if reprs.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} representations vs {} labels",
                reprs.len(),
                labels.len()
            )));
        }
        if reprs.dim() != self.n_in {
            return Err(Error::shape(format!(
                "representation dim {} vs probe dim {}",
                reprs.dim(),
                self.n_in
            )));
        }
        if labels.iter().any(|&l| l as usize >= self.n_classes) {
            return Err(Error::invalid("labels", "label out of class range"));
        }

        let n = reprs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<u32> = (0..n as u32).collect();
        let n_chunks = self.hp.batch_size.div_ceil(GRAD_CHUNK);
        let mut partials: Vec<GradPartial> = (0..n_chunks)
            .map(|_| GradPartial::zeros(self.n_classes, self.n_in))
            .collect();
        let mut epoch_losses = Vec::with_capacity(self.hp.n_epochs);

        for _ in 0..self.hp.n_epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for batch in order.chunks(self.hp.batch_size) {
                loss_sum += self.batch_step(reprs, labels, batch, &mut partials);
            }
            epoch_losses.push(loss_sum / n as f64);
        }
        Ok(epoch_losses)
    }

    /// One minibatch: accumulate softmax-CE gradients (mean over the batch)
    /// and apply a single Adam update. Returns the summed loss.
    fn batch_step(
        &mut self,
        reprs: &Representations,
        labels: &[u8],
        batch: &[u32],
        partials: &mut [GradPartial],
    ) -> f64 {
        let n_in = self.n_in;
        let n_classes = self.n_classes;
        let chunks: Vec<&[u32]> = batch.chunks(GRAD_CHUNK).collect();
        let probe = &*self;
        partials[..chunks.len()]
            .par_iter_mut()
            .zip(chunks.par_iter())
            .for_each(|(partial, chunk)| {
                partial.clear();
                let mut p = vec![0.0f64; n_classes];
                for &idx in chunk.iter() {
                    let x = reprs.row(idx as usize);
                    probe.logits_into(x, &mut p);
                    softmax_in_place(&mut p);
                    let label = labels[idx as usize] as usize;
                    partial.loss -= p[label].ln();
                    for c in 0..n_classes {
                        let coef = p[c] - (c == label) as u8 as f64;
                        partial.gb[c] += coef;
                        let gw = &mut partial.gw[c * n_in..(c + 1) * n_in];
                        for (g, &xi) in gw.iter_mut().zip(x) {
                            *g += coef * xi as f64;
                        }
                    }
                }
            });

        // Fixed-order reduction into the first partial.
        let (head, rest) = partials.split_at_mut(1);
        let acc = &mut head[0];
        for partial in &rest[..chunks.len() - 1] {
            acc.loss += partial.loss;
            for (a, &g) in acc.gw.iter_mut().zip(&partial.gw) {
                *a += g;
            }
            for (a, &g) in acc.gb.iter_mut().zip(&partial.gb) {
                *a += g;
            }
        }
        let inv_b = 1.0 / batch.len() as f64;
        self.step += 1;
        let t = self.step as i32;
        let hp = self.hp;
        let corr1 = 1.0 - hp.beta1.powi(t);
        let corr2 = 1.0 - hp.beta2.powi(t);
        adam_update(
            &mut self.w,
            &mut self.m_w,
            &mut self.v_w,
            &acc.gw,
            inv_b,
            hp,
            corr1,
            corr2,
        );
        adam_update(
            &mut self.b,
            &mut self.m_b,
            &mut self.v_b,
            &acc.gb,
            inv_b,
            hp,
            corr1,
            corr2,
        );
        acc.loss
    }

    /// Fraction of argmax-correct predictions; ties go to the lowest class.
    pub fn evaluate(&self, reprs: &Representations, labels: &[u8]) -> Result<f64> {
        if reprs.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} representations vs {} labels",
                reprs.len(),
                labels.len()
            )));
        }
        if reprs.is_empty() {
            return Err(Error::Empty("evaluation set"));
        }
        if reprs.dim() != self.n_in {
            return Err(Error::shape(format!(
                "representation dim {} vs probe dim {}",
                reprs.dim(),
                self.n_in
            )));
        }
        let correct: usize = (0..reprs.len())
            .into_par_iter()
            .map(|i| (self.predict(reprs.row(i)) == labels[i] as usize) as usize)
            .sum();
        Ok(correct as f64 / reprs.len() as f64)
    }
}

struct GradPartial {
    gw: Vec<f64>,
    gb: Vec<f64>,
    loss: f64,
}

impl GradPartial {
    fn zeros(n_classes: usize, n_in: usize) -> Self {
        GradPartial {
            gw: vec![0.0; n_classes * n_in],
            gb: vec![0.0; n_classes],
            loss: 0.0,
        }
    }

    fn clear(&mut self) {
        self.gw.fill(0.0);
        self.gb.fill(0.0);
        self.loss = 0.0;
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    theta: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    grad_sum: &[f64],
    inv_b: f64,
    hp: ProbeHyperparams,
    corr1: f64,
    corr2: f64,
) {
    for i in 0..theta.len() {
        let g = grad_sum[i] * inv_b;
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        theta[i] -= hp.learning_rate * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
}
