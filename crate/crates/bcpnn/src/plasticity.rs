//! Structural plasticity: mutual-information scoring and connection flips.
//!
//! Every (input HC, hidden HC) pair gets a score: the mutual information of
//! the pair's joint trace, normalized by the input HC's number of active
//! outgoing connections. Each hidden HC then greedily improves its fixed-size
//! set of incoming connections by silencing its worst active connection and
//! activating its best silent one, when that trade raises the score.
//!
//! Shadow traces (see [`crate::model`]) make the MI estimate available for
//! silent pairs, which is what lets candidates be ranked at all.

use crate::error::{Error, Result};
use crate::model::BcpnnModel;
use rayon::prelude::*;

/// Hyperparameters of connectivity initialization and rewiring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralPlasticityConfig {
    /// Initial per-entry connection probability.
    pub p_ih: f64,
    /// Flips per hidden HC per training epoch.
    pub n_flips: usize,
    /// Seed of the mask-initialization stream.
    pub rng_seed: u64,
}

impl Default for StructuralPlasticityConfig {
    fn default() -> Self {
        StructuralPlasticityConfig {
            p_ih: 0.08,
            n_flips: 16,
            rng_seed: 0,
        }
    }
}

impl StructuralPlasticityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_ih > 0.0 && self.p_ih <= 1.0) {
            return Err(Error::invalid(
                "p_ih",
                format!("got {}, need (0,1]", self.p_ih),
            ));
        }
        Ok(())
    }
}

/// Normalized connection scores for every (input HC, hidden HC) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    n_input_hcs: usize,
    n_hidden_hcs: usize,
    /// Row-major, input-HC-major: entry (i, j) at `i * n_hidden_hcs + j`.
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn get(&self, input_hc: usize, hidden_hc: usize) -> f64 {
        self.scores[input_hc * self.n_hidden_hcs + hidden_hc]
    }

    pub fn n_input_hcs(&self) -> usize {
        self.n_input_hcs
    }

    pub fn n_hidden_hcs(&self) -> usize {
        self.n_hidden_hcs
    }
}

/// One executed flip: hidden HC `hidden_hc` silenced its connection from
/// `silenced` and activated the one from `activated`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flip {
    pub hidden_hc: usize,
    pub silenced: usize,
    pub activated: usize,
}

impl BcpnnModel {
    /// Mutual information (nats) between input HC `i` and hidden HC `j`,
    /// computed on the pair's joint-trace block renormalized to sum one.
    /// Returns 0 for a degenerate block (a marginal row or column with zero
    /// mass). Never negative.
    ///
    /// Thanks to shadow traces this is defined for silent pairs too.
    pub fn mutual_information(&self, input_hc: usize, hidden_hc: usize) -> f64 {
        let n_mc_in = self.input_spec.n_mc();
        let n_mc_h = self.hidden_spec.n_mc();
        let n_in_units = self.input_spec.units();
        let block = &self.blocks[hidden_hc].p_xy;
        let base = input_hc * n_mc_in;

        let mut total = 0.0;
        let mut qx = vec![0.0f64; n_mc_in];
        let mut qy = vec![0.0f64; n_mc_h];
        for m in 0..n_mc_h {
            let row = &block[m * n_in_units + base..m * n_in_units + base + n_mc_in];
            for (k, &p) in row.iter().enumerate() {
                total += p;
                qx[k] += p;
                qy[m] += p;
            }
        }
        if total <= 0.0 || qx.iter().any(|&s| s <= 0.0) || qy.iter().any(|&s| s <= 0.0) {
            return 0.0;
        }
        // q = p / total; marginals likewise. I = sum q ln(q / (qx qy)).
        let mut mi = 0.0;
        for m in 0..n_mc_h {
            let row = &block[m * n_in_units + base..m * n_in_units + base + n_mc_in];
            for (k, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    let q = p / total;
                    mi += q * (q * total * total / (qx[k] * qy[m])).ln();
                }
            }
        }
        mi.max(0.0)
    }

    /// Scores every (input HC, hidden HC) pair: mutual information divided by
    /// one plus the input HC's active outgoing connection count.
    pub fn score_all(&self) -> ScoreMatrix {
        let n_in = self.input_spec.n_hc();
        let n_hid = self.hidden_spec.n_hc();
        let out_degrees = self.mask.out_degrees();
        let mut scores = vec![0.0f64; n_in * n_hid];
        scores
            .par_chunks_mut(n_hid)
            .enumerate()
            .for_each(|(i, row)| {
                let denom = 1.0 + out_degrees[i] as f64;
                for (j, s) in row.iter_mut().enumerate() {
                    *s = self.mutual_information(i, j) / denom;
                }
            });
        ScoreMatrix {
            n_input_hcs: n_in,
            n_hidden_hcs: n_hid,
            scores,
        }
    }

    /// Applies at most one flip per hidden HC, using a frozen score matrix:
    /// the active incoming connection with the lowest score is traded for the
    /// silent one with the highest score, but only when that strictly raises
    /// the summed incoming score. Ties are broken toward the lowest input-HC
    /// index. The in-degree of every hidden HC is preserved exactly.
    ///
    /// The silenced pair's weights are zeroed; the activated pair's weights
    /// are materialized from its shadow trace immediately.
    pub fn flip_step(&mut self, scores: &ScoreMatrix) -> Result<Vec<Flip>> {
        if scores.n_input_hcs != self.input_spec.n_hc()
            || scores.n_hidden_hcs != self.hidden_spec.n_hc()
        {
            return Err(Error::shape(
                "score matrix does not match model connectivity",
            ));
        }
        let mut flips = Vec::new();
        for j in 0..self.hidden_spec.n_hc() {
            let mut worst_active: Option<(usize, f64)> = None;
            for &i in self.mask.active_inputs(j) {
                let s = scores.get(i as usize, j);
                if worst_active.is_none_or(|(_, best)| s < best) {
                    worst_active = Some((i as usize, s));
                }
            }
            let mut best_silent: Option<(usize, f64)> = None;
            for i in self.mask.silent_inputs(j) {
                let s = scores.get(i as usize, j);
                if best_silent.is_none_or(|(_, best)| s > best) {
                    best_silent = Some((i as usize, s));
                }
            }
            if let (Some((a, a_score)), Some((s, s_score))) = (worst_active, best_silent) {
                if s_score > a_score {
                    self.mask.swap(j, a, s);
                    self.zero_pair_weights(a, j);
                    self.materialize_pair_weights(s, j);
                    flips.push(Flip {
                        hidden_hc: j,
                        silenced: a,
                        activated: s,
                    });
                }
            }
        }
        Ok(flips)
    }
}
