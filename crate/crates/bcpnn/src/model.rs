//! The BCPNN model: probabilistic state, activity inference, and
//! incremental Hebbian-Bayesian learning.
//!
//! The network keeps exponentially filtered estimates ("traces") of the
//! marginal probability of every input minicolumn (`p_x`), every hidden
//! minicolumn (`p_y`), and the joint probability of every (input MC,
//! hidden MC) pair (`p_xy`). Weights and biases are pure functions of those
//! traces: `b = ln p_y` and `w = ln(p_xy / (p_x p_y))` for pairs whose
//! hypercolumns are connected, zero otherwise.
//!
//! Joint traces are maintained for *all* pairs, including silent ones
//! (shadow traces). Silent pairs contribute nothing to inference, but their
//! traces let structural plasticity rank candidate connections by mutual
//! information, and give a newly activated connection meaningful weights
//! immediately.

use crate::error::{Error, Result};
use crate::layer::{LayerSpec, ModularLayer};
use crate::mask::ConnectivityMask;
use crate::math::{poisson, softmax_in_place};
use crate::plasticity::StructuralPlasticityConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// All traces are clamped to `[TRACE_FLOOR, 1]` after every learning step so
/// the logarithms in the weight formulas stay finite.
pub const TRACE_FLOOR: f64 = 1e-8;

/// Full hyperparameter set needed to initialize a [`BcpnnModel`].
///
/// `new` fills in the standard defaults: `tau_p = 60`, `dt = 0.01`,
/// `mu = 10`, and the default [`StructuralPlasticityConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcpnnConfig {
    pub input: LayerSpec,
    pub hidden: LayerSpec,
    /// Learning time constant (time units).
    pub tau_p: f64,
    /// Integration step per sample presentation (time units).
    pub dt: f64,
    /// Mean of the Poisson pseudo-counts that seed the joint traces.
    pub mu: f64,
    pub sp: StructuralPlasticityConfig,
    /// Seed for the Poisson pseudo-count stream.
    pub seed: u64,
}

impl BcpnnConfig {
    pub fn new(input: LayerSpec, hidden: LayerSpec) -> Self {
        BcpnnConfig {
            input,
            hidden,
            tau_p: 60.0,
            dt: 0.01,
            mu: 10.0,
            sp: StructuralPlasticityConfig::default(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau_p > 0.0) {
            return Err(Error::invalid("tau_p", format!("got {}", self.tau_p)));
        }
        if !(self.dt > 0.0 && self.dt <= self.tau_p) {
            return Err(Error::invalid(
                "dt",
                format!("got {}, need 0 < dt <= tau_p", self.dt),
            ));
        }
        if !(self.mu > 0.0) {
            return Err(Error::invalid("mu", format!("got {}", self.mu)));
        }
        self.sp.validate()
    }
}

/// Joint traces and weights of one hidden hypercolumn.
///
/// Both slabs are minicolumn-major: the entry for local hidden MC `m` and
/// input unit `u` sits at `m * n_input_units + u`. Weight entries of silent
/// pairs are exactly zero and are kept that way by initialization and by
/// flips; `compute_weights` only rewrites active entries.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct HcBlock {
    pub(crate) p_xy: Vec<f64>,
    pub(crate) w: Vec<f64>,
}

/// Feedforward BCPNN with one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BcpnnModel {
    pub(crate) input_spec: LayerSpec,
    pub(crate) hidden_spec: LayerSpec,
    pub(crate) tau_p: f64,
    pub(crate) dt: f64,
    pub(crate) mu: f64,
    pub(crate) sp: StructuralPlasticityConfig,
    pub(crate) seed: u64,
    pub(crate) mask: ConnectivityMask,
    /// Marginal trace per input unit.
    pub(crate) p_x: Vec<f64>,
    /// Marginal trace per hidden unit.
    pub(crate) p_y: Vec<f64>,
    /// Bias per hidden unit, `ln p_y`.
    pub(crate) b: Vec<f64>,
    /// One slab per hidden hypercolumn.
    pub(crate) blocks: Vec<HcBlock>,
}

/// Raw state for building a model directly from traces (tests, checkpoint
/// loading). Weights are derived with `compute_weights` unless provided.
pub struct ModelParts {
    pub input: LayerSpec,
    pub hidden: LayerSpec,
    pub tau_p: f64,
    pub dt: f64,
    pub mu: f64,
    pub sp: StructuralPlasticityConfig,
    pub seed: u64,
    pub mask: ConnectivityMask,
    pub p_x: Vec<f64>,
    pub p_y: Vec<f64>,
    /// Per hidden HC, minicolumn-major joint trace slab.
    pub p_xy: Vec<Vec<f64>>,
}

impl BcpnnModel {
    /// Initializes a model: connectivity drawn Bernoulli(p_ih) (redrawing any
    /// hidden HC left without inputs), marginals set to the uniform prior,
    /// and joint traces seeded from Poisson(mu)+1 pseudo-counts so that
    /// minicolumn symmetry is broken while each block marginal matches `p_x`
    /// exactly.
    ///
    /// Two RNG streams are used: `sp.rng_seed` drives the mask draw and
    /// `seed` drives the pseudo-counts. Counts are drawn in a fixed order
    /// (hidden HC, then input unit, then hidden MC), so initialization is
    /// bit-reproducible.
    pub fn init(cfg: &BcpnnConfig) -> Result<Self> {
        cfg.validate()?;
        let n_in_units = cfg.input.units();
        let n_hid_units = cfg.hidden.units();
        let n_mc_h = cfg.hidden.n_mc();

        let mut mask_rng = ChaCha8Rng::seed_from_u64(cfg.sp.rng_seed);
        let mask = ConnectivityMask::bernoulli(
            cfg.input.n_hc(),
            cfg.hidden.n_hc(),
            cfg.sp.p_ih,
            &mut mask_rng,
        )?;

        let p_x = vec![1.0 / cfg.input.n_mc() as f64; n_in_units];

        let mut counts_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut counts = vec![0.0f64; n_mc_h];
        let mut blocks = Vec::with_capacity(cfg.hidden.n_hc());
        for _j in 0..cfg.hidden.n_hc() {
            let mut p_xy = vec![0.0f64; n_mc_h * n_in_units];
            for u in 0..n_in_units {
                let mut total = 0.0;
                for c in counts.iter_mut() {
                    *c = (poisson(&mut counts_rng, cfg.mu) + 1) as f64;
                    total += *c;
                }
                let scale = p_x[u] / total;
                for (m, &c) in counts.iter().enumerate() {
                    p_xy[m * n_in_units + u] = c * scale;
                }
            }
            blocks.push(HcBlock {
                p_xy,
                w: vec![0.0; n_mc_h * n_in_units],
            });
        }

        // p_y from the normalized pseudo-counts: the mean over input HCs of
        // each block's marginal. Sums to one per hidden HC by construction.
        let mut p_y = vec![0.0f64; n_hid_units];
        let inv_n = 1.0 / cfg.input.n_hc() as f64;
        for (j, block) in blocks.iter().enumerate() {
            for m in 0..n_mc_h {
                let row = &block.p_xy[m * n_in_units..(m + 1) * n_in_units];
                p_y[cfg.hidden.unit(j, m)] = row.iter().sum::<f64>() * inv_n;
            }
        }

        let mut model = BcpnnModel {
            input_spec: cfg.input,
            hidden_spec: cfg.hidden,
            tau_p: cfg.tau_p,
            dt: cfg.dt,
            mu: cfg.mu,
            sp: cfg.sp,
            seed: cfg.seed,
            mask,
            p_x,
            p_y,
            b: vec![0.0; n_hid_units],
            blocks,
        };
        model.compute_weights()?;
        Ok(model)
    }

    /// Builds a model from explicit traces. Shapes and strict positivity are
    /// validated; weights and biases are derived from the traces.
    pub fn from_parts(parts: ModelParts) -> Result<Self> {
        let n_in_units = parts.input.units();
        let n_hid_units = parts.hidden.units();
        if parts.mask.n_input_hcs() != parts.input.n_hc()
            || parts.mask.n_hidden_hcs() != parts.hidden.n_hc()
        {
            return Err(Error::shape("mask dimensions do not match layer specs"));
        }
        if parts.p_x.len() != n_in_units {
            return Err(Error::shape(format!(
                "p_x has {} entries, expected {n_in_units}",
                parts.p_x.len()
            )));
        }
        if parts.p_y.len() != n_hid_units {
            return Err(Error::shape(format!(
                "p_y has {} entries, expected {n_hid_units}",
                parts.p_y.len()
            )));
        }
        if parts.p_xy.len() != parts.hidden.n_hc()
            || parts
                .p_xy
                .iter()
                .any(|b| b.len() != parts.hidden.n_mc() * n_in_units)
        {
            return Err(Error::shape("p_xy block shapes do not match specs"));
        }
        let positive_unit = |v: f64| v > 0.0 && v <= 1.0;
        if !parts.p_x.iter().copied().all(positive_unit)
            || !parts.p_y.iter().copied().all(positive_unit)
            || !parts.p_xy.iter().flatten().copied().all(positive_unit)
        {
            return Err(Error::invalid("traces", "must lie in (0, 1]"));
        }

        let blocks = parts
            .p_xy
            .into_iter()
            .map(|p_xy| {
                let w = vec![0.0; p_xy.len()];
                HcBlock { p_xy, w }
            })
            .collect();
        let mut model = BcpnnModel {
            input_spec: parts.input,
            hidden_spec: parts.hidden,
            tau_p: parts.tau_p,
            dt: parts.dt,
            mu: parts.mu,
            sp: parts.sp,
            seed: parts.seed,
            mask: parts.mask,
            p_x: parts.p_x,
            p_y: parts.p_y,
            b: vec![0.0; n_hid_units],
            blocks,
        };
        model.compute_weights()?;
        Ok(model)
    }

    pub fn input_spec(&self) -> LayerSpec {
        self.input_spec
    }

    pub fn hidden_spec(&self) -> LayerSpec {
        self.hidden_spec
    }

    pub fn tau_p(&self) -> f64 {
        self.tau_p
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sp_config(&self) -> StructuralPlasticityConfig {
        self.sp
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mask(&self) -> &ConnectivityMask {
        &self.mask
    }

    pub fn p_x(&self) -> &[f64] {
        &self.p_x
    }

    pub fn p_y(&self) -> &[f64] {
        &self.p_y
    }

    pub fn biases(&self) -> &[f64] {
        &self.b
    }

    /// Joint-trace slab of hidden HC `j`, minicolumn-major.
    pub fn joint_block(&self, hidden_hc: usize) -> &[f64] {
        &self.blocks[hidden_hc].p_xy
    }

    /// Weight slab of hidden HC `j`, minicolumn-major. Silent pairs are zero.
    pub fn weight_block(&self, hidden_hc: usize) -> &[f64] {
        &self.blocks[hidden_hc].w
    }

    /// Total number of weight entries (input units x hidden units).
    pub fn n_weight_entries(&self) -> usize {
        self.input_spec.units() * self.hidden_spec.units()
    }

    /// Iterates over every weight entry, silent zeros included.
    pub fn weight_entries(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.blocks.iter().flat_map(|b| b.w.iter().copied())
    }

    /// Fraction of weight entries that are exactly zero.
    pub fn zero_weight_fraction(&self) -> f64 {
        let zeros = self.weight_entries().filter(|&w| w == 0.0).count();
        zeros as f64 / self.n_weight_entries() as f64
    }

    /// Computes the hidden posterior for one input layer: the support
    /// `h(y) = b(y) + sum_i sum_x pi(x) w(x, y)` over connected pairs,
    /// followed by a softmax within each hidden hypercolumn. Deterministic.
    pub fn activity_update(&self, input: &ModularLayer) -> Result<ModularLayer> {
        if input.spec() != self.input_spec {
            return Err(Error::shape(format!(
                "input layer is {}x{}, model expects {}x{}",
                input.spec().n_hc(),
                input.spec().n_mc(),
                self.input_spec.n_hc(),
                self.input_spec.n_mc()
            )));
        }
        input.validate()?;
        let mut out = vec![0.0; self.hidden_spec.units()];
        self.activity_update_into(input.activities(), &mut out);
        Ok(ModularLayer::from_activities_unchecked(
            self.hidden_spec,
            out,
        ))
    }

    /// Buffer-reusing core of [`Self::activity_update`]. `pi_in` must hold valid
    /// input activities; `out` receives the hidden activities.
    pub fn activity_update_into(&self, pi_in: &[f64], out: &mut [f64]) {
        debug_assert_eq!(pi_in.len(), self.input_spec.units());
        debug_assert_eq!(out.len(), self.hidden_spec.units());
        let n_mc_h = self.hidden_spec.n_mc();
        let n_mc_in = self.input_spec.n_mc();
        let n_in_units = self.input_spec.units();

        let support_hc = |j: usize, out_hc: &mut [f64]| {
            let block = &self.blocks[j];
            let active = self.mask.active_inputs(j);
            let b = &self.b[j * n_mc_h..(j + 1) * n_mc_h];
            for (m, h_out) in out_hc.iter_mut().enumerate() {
                let row = &block.w[m * n_in_units..(m + 1) * n_in_units];
                let mut h = b[m];
                for &i in active {
                    let base = i as usize * n_mc_in;
                    for k in 0..n_mc_in {
                        h += pi_in[base + k] * row[base + k];
                    }
                }
                *h_out = h;
            }
            softmax_in_place(out_hc);
        };
        if self.parallel_blocks() {
            out.par_chunks_mut(n_mc_h)
                .enumerate()
                .for_each(|(j, out_hc)| support_hc(j, out_hc));
        } else {
            for (j, out_hc) in out.chunks_mut(n_mc_h).enumerate() {
                support_hc(j, out_hc);
            }
        }
    }

    /// One explicit Euler step of the trace dynamics with step `dt / tau_p`:
    /// each trace moves toward its instantaneous target (`pi(x)` for `p_x`,
    /// `pi(y)` for `p_y`, `pi(x) pi(y)` for `p_xy`, shadow pairs included)
    /// and is then floored to `[TRACE_FLOOR, 1]`.
    pub fn learning_step(&mut self, input: &ModularLayer, hidden: &ModularLayer) -> Result<()> {
        if input.spec() != self.input_spec || hidden.spec() != self.hidden_spec {
            return Err(Error::shape(
                "learning_step activities do not match model layer specs",
            ));
        }
        input.validate()?;
        hidden.validate()?;
        self.learning_step_into(input.activities(), hidden.activities());
        Ok(())
    }

    /// Per-hidden-HC work is dispatched to rayon only past this many joint
    /// entries; below it the thread-pool overhead dwarfs the arithmetic.
    /// Both paths touch disjoint per-HC state in the same order, so results
    /// are bit-identical.
    fn parallel_blocks(&self) -> bool {
        self.blocks.len() > 1
            && self.blocks.len() * self.hidden_spec.n_mc() * self.input_spec.units() >= 1 << 14
    }

    /// Buffer-based core of [`Self::learning_step`]; activities must be valid.
    pub fn learning_step_into(&mut self, pi_in: &[f64], pi_hid: &[f64]) {
        debug_assert_eq!(pi_in.len(), self.input_spec.units());
        debug_assert_eq!(pi_hid.len(), self.hidden_spec.units());
        let k = self.dt / self.tau_p;
        let n_mc_h = self.hidden_spec.n_mc();
        let n_in_units = self.input_spec.units();

        for (p, &target) in self.p_x.iter_mut().zip(pi_in) {
            *p = (*p + k * (target - *p)).clamp(TRACE_FLOOR, 1.0);
        }
        for (p, &target) in self.p_y.iter_mut().zip(pi_hid) {
            *p = (*p + k * (target - *p)).clamp(TRACE_FLOOR, 1.0);
        }
        let step_block = |block: &mut HcBlock, pi_hc: &[f64]| {
            for (m, &pi_y) in pi_hc.iter().enumerate() {
                let row = &mut block.p_xy[m * n_in_units..(m + 1) * n_in_units];
                for (p, &pi_x) in row.iter_mut().zip(pi_in) {
                    *p = (*p + k * (pi_y * pi_x - *p)).clamp(TRACE_FLOOR, 1.0);
                }
            }
        };
        if self.parallel_blocks() {
            self.blocks
                .par_iter_mut()
                .zip(pi_hid.par_chunks(n_mc_h))
                .for_each(|(block, pi_hc)| step_block(block, pi_hc));
        } else {
            for (block, pi_hc) in self.blocks.iter_mut().zip(pi_hid.chunks(n_mc_h)) {
                step_block(block, pi_hc);
            }
        }
    }

    /// Derives biases and weights from the traces: `b(y) = ln p_y(y)` and,
    /// for every connected pair, `w(x, y) = ln(p_xy / (p_x p_y))`. Silent
    /// entries are exactly zero; they are kept zeroed by initialization and
    /// by flips, so only active entries are rewritten here.
    pub fn compute_weights(&mut self) -> Result<()> {
        for (g, &p) in self.p_y.iter().enumerate() {
            if !(p > 0.0) {
                return Err(Error::TraceUnderflow {
                    context: format!("p_y[{g}]"),
                    value: p,
                });
            }
            self.b[g] = p.ln();
        }
        let mut ln_px = vec![0.0f64; self.p_x.len()];
        for (u, (&p, out)) in self.p_x.iter().zip(ln_px.iter_mut()).enumerate() {
            if !(p > 0.0) {
                return Err(Error::TraceUnderflow {
                    context: format!("p_x[{u}]"),
                    value: p,
                });
            }
            *out = p.ln();
        }

        let n_mc_h = self.hidden_spec.n_mc();
        let n_mc_in = self.input_spec.n_mc();
        let n_in_units = self.input_spec.units();
        let b = &self.b;
        let mask = &self.mask;
        let ln_px = &ln_px;
        let weight_block = |j: usize, block: &mut HcBlock| -> Result<()> {
            let active = mask.active_inputs(j);
            for m in 0..n_mc_h {
                let ln_py = b[j * n_mc_h + m];
                let offset = m * n_in_units;
                for &i in active {
                    let base = i as usize * n_mc_in;
                    for u in base..base + n_mc_in {
                        let p = block.p_xy[offset + u];
                        if !(p > 0.0) {
                            return Err(Error::TraceUnderflow {
                                context: format!("p_xy[hc {j}, mc {m}, unit {u}]"),
                                value: p,
                            });
                        }
                        block.w[offset + u] = p.ln() - ln_px[u] - ln_py;
                    }
                }
            }
            Ok(())
        };
        if self.parallel_blocks() {
            self.blocks
                .par_iter_mut()
                .enumerate()
                .try_for_each(|(j, block)| weight_block(j, block))
        } else {
            for (j, block) in self.blocks.iter_mut().enumerate() {
                weight_block(j, block)?;
            }
            Ok(())
        }
    }

    /// Recomputes the weight rows of one (input HC, hidden HC) pair from its
    /// (shadow) trace. Used when a flip activates the pair.
    pub(crate) fn materialize_pair_weights(&mut self, input_hc: usize, hidden_hc: usize) {
        let n_mc_h = self.hidden_spec.n_mc();
        let n_mc_in = self.input_spec.n_mc();
        let n_in_units = self.input_spec.units();
        let base = input_hc * n_mc_in;
        let block = &mut self.blocks[hidden_hc];
        for m in 0..n_mc_h {
            let ln_py = self.b[hidden_hc * n_mc_h + m];
            let offset = m * n_in_units;
            for u in base..base + n_mc_in {
                let p = block.p_xy[offset + u];
                debug_assert!(p > 0.0);
                block.w[offset + u] = p.ln() - self.p_x[u].ln() - ln_py;
            }
        }
    }

    /// Zeroes the weight rows of one pair. Used when a flip silences it.
    pub(crate) fn zero_pair_weights(&mut self, input_hc: usize, hidden_hc: usize) {
        let n_mc_h = self.hidden_spec.n_mc();
        let n_mc_in = self.input_spec.n_mc();
        let n_in_units = self.input_spec.units();
        let base = input_hc * n_mc_in;
        let block = &mut self.blocks[hidden_hc];
        for m in 0..n_mc_h {
            let offset = m * n_in_units;
            block.w[offset + base..offset + base + n_mc_in].fill(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::LayerSpec;

    fn spec(n_hc: usize, n_mc: usize) -> LayerSpec {
        LayerSpec::new(n_hc, n_mc).unwrap()
    }

    /// Model with p_xy = p_x * p_y everywhere: all weights vanish.
    fn independent_model(input: LayerSpec, hidden: LayerSpec) -> BcpnnModel {
        let n_in = input.units();
        let p_x = vec![1.0 / input.n_mc() as f64; n_in];
        let p_y = vec![1.0 / hidden.n_mc() as f64; hidden.units()];
        let p_xy = (0..hidden.n_hc())
            .map(|j| {
                let mut block = vec![0.0; hidden.n_mc() * n_in];
                for m in 0..hidden.n_mc() {
                    for u in 0..n_in {
                        block[m * n_in + u] = p_x[u] * p_y[hidden.unit(j, m)];
                    }
                }
                block
            })
            .collect();
        BcpnnModel::from_parts(ModelParts {
            input,
            hidden,
            tau_p: 60.0,
            dt: 0.01,
            mu: 10.0,
            sp: StructuralPlasticityConfig::default(),
            seed: 0,
            mask: ConnectivityMask::full(input.n_hc(), hidden.n_hc()),
            p_x,
            p_y,
            p_xy,
        })
        .unwrap()
    }

    #[test]
    fn init_full_connectivity_when_p_ih_is_one() {
        let mut cfg = BcpnnConfig::new(spec(6, 2), spec(2, 4));
        cfg.sp.p_ih = 1.0;
        let model = BcpnnModel::init(&cfg).unwrap();
        for j in 0..2 {
            assert_eq!(model.mask().in_degree(j), 6);
        }
    }

    #[test]
    fn init_p_y_positive_and_normalized() {
        let cfg = BcpnnConfig::new(spec(5, 2), spec(3, 7));
        let model = BcpnnModel::init(&cfg).unwrap();
        for j in 0..3 {
            let s: f64 = model
                .hidden_spec()
                .hc_range(j)
                .map(|g| model.p_y()[g])
                .sum();
            assert!((s - 1.0).abs() < 1e-9, "hc {j} p_y sums to {s}");
        }
        assert!(model.p_y().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn init_joint_marginal_matches_p_x() {
        let cfg = BcpnnConfig::new(spec(4, 2), spec(2, 5));
        let model = BcpnnModel::init(&cfg).unwrap();
        let n_in = model.input_spec().units();
        for j in 0..2 {
            let block = model.joint_block(j);
            for u in 0..n_in {
                let s: f64 = (0..5).map(|m| block[m * n_in + u]).sum();
                assert!((s - model.p_x()[u]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = BcpnnConfig::new(spec(8, 2), spec(3, 6));
        let a = BcpnnModel::init(&cfg).unwrap();
        let b = BcpnnModel::init(&cfg).unwrap();
        assert_eq!(a, b);
        let mut cfg2 = cfg;
        cfg2.seed = 1;
        assert_ne!(BcpnnModel::init(&cfg2).unwrap(), a);
    }

    #[test]
    fn activity_uniform_when_weights_zero_and_biases_equal() {
        let model = independent_model(spec(3, 2), spec(2, 4));
        assert!(model.weight_entries().all(|w| w.abs() < 1e-12));
        let input =
            ModularLayer::from_activities(spec(3, 2), vec![0.9, 0.1, 0.3, 0.7, 0.5, 0.5]).unwrap();
        let hidden = model.activity_update(&input).unwrap();
        for &a in hidden.activities() {
            assert!((a - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn activity_closed_form_softmax() {
        // One binary input HC, one hidden HC with two MCs. Traces chosen so
        // the support difference is ln 3 for a one-hot input, giving
        // (0.75, 0.25) after the softmax.
        let input = spec(1, 2);
        let hidden = spec(1, 2);
        let model = BcpnnModel::from_parts(ModelParts {
            input,
            hidden,
            tau_p: 60.0,
            dt: 0.01,
            mu: 10.0,
            sp: StructuralPlasticityConfig::default(),
            seed: 0,
            mask: ConnectivityMask::full(1, 1),
            p_x: vec![0.5, 0.5],
            p_y: vec![0.5, 0.5],
            // m-major: [m0: (u0, u1), m1: (u0, u1)]
            p_xy: vec![vec![0.375, 0.25, 0.125, 0.25]],
        })
        .unwrap();
        let pi = ModularLayer::from_activities(input, vec![1.0, 0.0]).unwrap();
        let out = model.activity_update(&pi).unwrap();
        assert!((out.activities()[0] - 0.75).abs() < 1e-12);
        assert!((out.activities()[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn activity_rejects_wrong_shape() {
        let model = independent_model(spec(3, 2), spec(1, 4));
        let wrong = ModularLayer::uniform(spec(2, 2));
        assert!(model.activity_update(&wrong).is_err());
    }

    #[test]
    fn learning_single_euler_step() {
        // p = 0.5, pi = 1.0, dt = 0.01, tau_p = 60: p' = 0.5 + 0.5/6000.
        let mut model = independent_model(spec(1, 2), spec(1, 2));
        let input = ModularLayer::from_activities(spec(1, 2), vec![1.0, 0.0]).unwrap();
        let hidden = ModularLayer::uniform(spec(1, 2));
        model.learning_step(&input, &hidden).unwrap();
        let expected = 0.5 + (0.01 / 60.0) * 0.5;
        assert!((model.p_x()[0] - expected).abs() < 1e-15);
        assert!((expected - 0.5000833).abs() < 1e-7);
    }

    #[test]
    fn learning_fixed_point() {
        let mut model = independent_model(spec(2, 2), spec(1, 3));
        let before = model.clone();
        // Targets equal to the current traces everywhere: uniform input
        // (p_x = 0.5) and uniform hidden (p_y = 1/3) make pi_x * pi_y equal
        // to the independent joint traces.
        let input = ModularLayer::uniform(spec(2, 2));
        let hidden = ModularLayer::uniform(spec(1, 3));
        model.learning_step(&input, &hidden).unwrap();
        assert_eq!(model.p_x(), before.p_x());
        assert_eq!(model.p_y(), before.p_y());
        assert_eq!(model.joint_block(0), before.joint_block(0));
    }

    #[test]
    fn learning_relaxes_to_target_product() {
        // Repeating one input for 10 tau_p / dt steps drives p_xy to
        // pi_x * pi_y within 1e-3 (exponential relaxation of a linear ODE).
        let mut model = independent_model(spec(2, 2), spec(1, 3));
        let pi_in = [0.8, 0.2, 0.4, 0.6];
        let pi_hid = [0.6, 0.3, 0.1];
        let steps = (10.0 * model.tau_p() / model.dt()) as usize;
        for _ in 0..steps {
            model.learning_step_into(&pi_in, &pi_hid);
        }
        let n_in = 4;
        for m in 0..3 {
            for u in 0..n_in {
                let got = model.joint_block(0)[m * n_in + u];
                let want = pi_hid[m] * pi_in[u];
                assert!(
                    (got - want).abs() < 1e-3,
                    "p_xy[{m},{u}] = {got}, want {want}"
                );
            }
        }
        for (u, &pi) in pi_in.iter().enumerate() {
            assert!((model.p_x()[u] - pi).abs() < 1e-3);
        }
    }

    #[test]
    fn trace_consistency_preserved_by_learning() {
        let cfg = BcpnnConfig::new(spec(3, 2), spec(2, 4));
        let mut model = BcpnnModel::init(&cfg).unwrap();
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            // xorshift for cheap deterministic activity patterns
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let n_in = model.input_spec().units();
        for _ in 0..5000 {
            let mut pi_in = Vec::with_capacity(n_in);
            for _ in 0..3 {
                let v = next();
                pi_in.push(v);
                pi_in.push(1.0 - v);
            }
            let mut pi_hid = vec![0.0; 8];
            for j in 0..2 {
                let mut s = 0.0;
                for m in 0..4 {
                    let v = next() + 1e-3;
                    pi_hid[j * 4 + m] = v;
                    s += v;
                }
                for m in 0..4 {
                    pi_hid[j * 4 + m] /= s;
                }
            }
            model.learning_step_into(&pi_in, &pi_hid);
        }
        for j in 0..2 {
            let block = model.joint_block(j);
            for u in 0..n_in {
                let s: f64 = (0..4).map(|m| block[m * n_in + u]).sum();
                assert!(
                    (s - model.p_x()[u]).abs() < 1e-6,
                    "unit {u}: sum {s} vs p_x {}",
                    model.p_x()[u]
                );
            }
        }
    }

    #[test]
    fn traces_stay_floored_and_bounded() {
        let mut model = independent_model(spec(1, 2), spec(1, 2));
        // Hammer one corner: pi_x = (0, 1), pi_y = (0, 1).
        for _ in 0..200_000 {
            model.learning_step_into(&[0.0, 1.0], &[0.0, 1.0]);
        }
        for &p in model
            .p_x()
            .iter()
            .chain(model.p_y())
            .chain(model.joint_block(0))
        {
            assert!((TRACE_FLOOR..1.0).contains(&p), "trace {p} escaped (0,1)");
        }
        // The starving entries must have hit the floor exactly.
        assert_eq!(model.p_x()[0], TRACE_FLOOR);
        // And weights still compute.
        model.compute_weights().unwrap();
    }

    #[test]
    #[allow(clippy::approx_constant)] // asserting the documented rounded values
    fn compute_weights_examples() {
        // p_xy = p_x p_y -> w = 0 (independence).
        let model = independent_model(spec(2, 2), spec(1, 2));
        assert!(model.weight_entries().all(|w| w.abs() < 1e-12));

        // p_x = 0.5, p_y = 0.1, p_xy = 0.1 -> w = ln 2; p_y = 0.25 -> b = ln 0.25.
        let input = spec(1, 2);
        let hidden = spec(1, 2);
        let model = BcpnnModel::from_parts(ModelParts {
            input,
            hidden,
            tau_p: 60.0,
            dt: 0.01,
            mu: 10.0,
            sp: StructuralPlasticityConfig::default(),
            seed: 0,
            mask: ConnectivityMask::full(1, 1),
            p_x: vec![0.5, 0.5],
            p_y: vec![0.1, 0.9],
            p_xy: vec![vec![0.1, 0.05, 0.4, 0.45]],
        })
        .unwrap();
        let w00 = model.weight_block(0)[0];
        assert!((w00 - 2f64.ln()).abs() < 1e-12, "w00 = {w00}");
        assert!((2f64.ln() - 0.6931).abs() < 1e-4);

        let model2 = BcpnnModel::from_parts(ModelParts {
            input,
            hidden,
            tau_p: 60.0,
            dt: 0.01,
            mu: 10.0,
            sp: StructuralPlasticityConfig::default(),
            seed: 0,
            mask: ConnectivityMask::full(1, 1),
            p_x: vec![0.5, 0.5],
            p_y: vec![0.25, 0.75],
            p_xy: vec![vec![0.125, 0.125, 0.375, 0.375]],
        })
        .unwrap();
        assert!((model2.biases()[0] - 0.25f64.ln()).abs() < 1e-12);
        assert!((0.25f64.ln() + 1.3863).abs() < 1e-4);
    }

    #[test]
    fn compute_weights_rejects_non_positive_traces() {
        let mut model = independent_model(spec(1, 2), spec(1, 2));
        model.p_y[0] = 0.0;
        assert!(matches!(
            model.compute_weights(),
            Err(Error::TraceUnderflow { .. })
        ));
    }

    #[test]
    fn silent_pairs_have_zero_weight() {
        let mut cfg = BcpnnConfig::new(spec(10, 2), spec(2, 3));
        cfg.sp.p_ih = 0.3;
        cfg.sp.rng_seed = 5;
        let model = BcpnnModel::init(&cfg).unwrap();
        let n_in = model.input_spec().units();
        for j in 0..2 {
            let block = model.weight_block(j);
            for i in 0..10 {
                if !model.mask().is_active(i, j) {
                    for m in 0..3 {
                        for k in 0..2 {
                            assert_eq!(block[m * n_in + i * 2 + k], 0.0);
                        }
                    }
                }
            }
        }
    }
}
