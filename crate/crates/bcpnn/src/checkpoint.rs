//! Self-describing binary checkpoints.
//!
//! One container format covers BCPNN models, RBM models, linear probes, and
//! full run bundles (model + probe + run metadata). Every file starts with
//! the magic `BCPC`, a format version, and a kind tag; all integers and
//! floats are little-endian, masks are packed bitmaps (input-HC-major,
//! LSB-first), and arrays appear in the documented order. The full byte
//! layout lives in `docs/checkpoint-format.md`; write/read round-trips are
//! bit-exact.

use crate::error::{Error, Result};
use crate::layer::LayerSpec;
use crate::mask::ConnectivityMask;
use crate::model::{BcpnnModel, HcBlock};
use crate::plasticity::StructuralPlasticityConfig;
use crate::probe::{FeatureExtractor, LinearProbe, ProbeHyperparams};
use crate::rbm::{RbmConfig, RbmModel};
use std::path::Path;

const MAGIC: &[u8; 4] = b"BCPC";
pub const FORMAT_VERSION: u32 = 1;

const KIND_BCPNN: u32 = 1;
const KIND_RBM: u32 = 2;
const KIND_PROBE: u32 = 3;
const KIND_RUN: u32 = 4;

/// An unsupervised model inside a run bundle.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Bcpnn(BcpnnModel),
    Rbm(RbmModel),
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Bcpnn(_) => "bcpnn",
            TrainedModel::Rbm(_) => "rbm",
        }
    }

    pub fn zero_weight_fraction(&self) -> Option<f64> {
        match self {
            TrainedModel::Bcpnn(m) => Some(m.zero_weight_fraction()),
            TrainedModel::Rbm(_) => None,
        }
    }
}

impl FeatureExtractor for TrainedModel {
    fn feature_dim(&self) -> usize {
        match self {
            TrainedModel::Bcpnn(m) => m.feature_dim(),
            TrainedModel::Rbm(m) => m.feature_dim(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            TrainedModel::Bcpnn(m) => m.input_dim(),
            TrainedModel::Rbm(m) => m.input_dim(),
        }
    }

    fn features_into(&self, sample: &[f32], out: &mut [f32]) {
        match self {
            TrainedModel::Bcpnn(m) => m.features_into(sample, out),
            TrainedModel::Rbm(m) => m.features_into(sample, out),
        }
    }
}

/// A complete run: the frozen unsupervised model, the trained probe, and the
/// identifying metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RunBundle {
    pub model: TrainedModel,
    pub probe: LinearProbe,
    pub dataset: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)] // checkpoints hold whole models by design
pub enum Checkpoint {
    Bcpnn(BcpnnModel),
    Rbm(RbmModel),
    Probe(LinearProbe),
    Run(RunBundle),
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Checkpoint::Bcpnn(model) => {
                w.header(KIND_BCPNN);
                write_bcpnn(&mut w, model);
            }
            Checkpoint::Rbm(model) => {
                w.header(KIND_RBM);
                write_rbm(&mut w, model);
            }
            Checkpoint::Probe(probe) => {
                w.header(KIND_PROBE);
                write_probe(&mut w, probe);
            }
            Checkpoint::Run(run) => {
                w.header(KIND_RUN);
                match &run.model {
                    TrainedModel::Bcpnn(_) => w.u32(KIND_BCPNN),
                    TrainedModel::Rbm(_) => w.u32(KIND_RBM),
                }
                w.blob(run.dataset.as_bytes());
                w.u64(run.seed);
                let model_bytes = match &run.model {
                    TrainedModel::Bcpnn(m) => Checkpoint::Bcpnn(m.clone()).to_bytes(),
                    TrainedModel::Rbm(m) => Checkpoint::Rbm(m.clone()).to_bytes(),
                };
                w.blob(&model_bytes);
                w.blob(&Checkpoint::Probe(run.probe.clone()).to_bytes());
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        let mut r = Reader::new(bytes);
        let kind = r.header()?;
        let out = match kind {
            KIND_BCPNN => Checkpoint::Bcpnn(read_bcpnn(&mut r)?),
            KIND_RBM => Checkpoint::Rbm(read_rbm(&mut r)?),
            KIND_PROBE => Checkpoint::Probe(read_probe(&mut r)?),
            KIND_RUN => {
                let model_kind = r.u32()?;
                let dataset = String::from_utf8(r.blob()?.to_vec())
                    .map_err(|_| Error::format("dataset name is not utf-8"))?;
                let seed = r.u64()?;
                let model_bytes = r.blob()?;
                let model = match (model_kind, Checkpoint::from_bytes(model_bytes)?) {
                    (KIND_BCPNN, Checkpoint::Bcpnn(m)) => TrainedModel::Bcpnn(m),
                    (KIND_RBM, Checkpoint::Rbm(m)) => TrainedModel::Rbm(m),
                    _ => return Err(Error::format("run bundle model kind mismatch")),
                };
                let probe_bytes = r.blob()?;
                let probe = match Checkpoint::from_bytes(probe_bytes)? {
                    Checkpoint::Probe(p) => p,
                    _ => return Err(Error::format("run bundle probe blob has wrong kind")),
                };
                Checkpoint::Run(RunBundle {
                    model,
                    probe,
                    dataset,
                    seed,
                })
            }
            other => return Err(Error::format(format!("unknown checkpoint kind {other}"))),
        };
        r.finish()?;
        Ok(out)
    }

    /// Writes via a temp file and rename, so a failed save never leaves a
    /// partial checkpoint behind.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        Checkpoint::from_bytes(&bytes)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }
}

fn write_bcpnn(w: &mut Writer, model: &BcpnnModel) {
    let input = model.input_spec();
    let hidden = model.hidden_spec();
    w.u32(input.n_hc() as u32);
    w.u32(input.n_mc() as u32);
    w.u32(hidden.n_hc() as u32);
    w.u32(hidden.n_mc() as u32);
    w.f64(model.tau_p());
    w.f64(model.dt());
    w.f64(model.mu());
    let sp = model.sp_config();
    w.f64(sp.p_ih);
    w.u64(sp.n_flips as u64);
    w.u64(sp.rng_seed);
    w.u64(model.seed());
    w.bytes(&model.mask().to_packed_bitmap());
    for j in 0..hidden.n_hc() {
        w.u32(model.mask().in_degree(j));
    }
    w.f64_slice(model.p_x());
    w.f64_slice(model.p_y());
    for j in 0..hidden.n_hc() {
        w.f64_slice(model.joint_block(j));
    }
    for j in 0..hidden.n_hc() {
        w.f64_slice(model.weight_block(j));
    }
    w.f64_slice(model.biases());
}

fn check_traces(name: &str, values: &[f64]) -> Result<()> {
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::format(format!(
            "{name} holds {bad}, outside the trace range (0, 1]"
        )));
    }
    Ok(())
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(format!("{name} holds a non-finite value")));
    }
    Ok(())
}

fn read_bcpnn(r: &mut Reader) -> Result<BcpnnModel> {
    let input = LayerSpec::new(r.u32()? as usize, r.u32()? as usize)?;
    let hidden = LayerSpec::new(r.u32()? as usize, r.u32()? as usize)?;
    let tau_p = r.f64()?;
    let dt = r.f64()?;
    let mu = r.f64()?;
    let p_ih = r.f64()?;
    let n_flips = r.u64()? as usize;
    let rng_seed = r.u64()?;
    let seed = r.u64()?;
    let mask_bytes = r.bytes((input.n_hc() * hidden.n_hc()).div_ceil(8))?;
    let mask = ConnectivityMask::from_packed_bitmap(input.n_hc(), hidden.n_hc(), mask_bytes)?;
    for j in 0..hidden.n_hc() {
        let stored = r.u32()?;
        if stored != mask.in_degree(j) {
            return Err(Error::format(format!(
                "hidden HC {j}: stored in-degree {stored} disagrees with bitmap {}",
                mask.in_degree(j)
            )));
        }
    }
    let p_x = r.f64_vec(input.units())?;
    check_traces("p_x", &p_x)?;
    let p_y = r.f64_vec(hidden.units())?;
    check_traces("p_y", &p_y)?;
    let block_len = hidden.n_mc() * input.units();
    let mut p_xy = Vec::with_capacity(hidden.n_hc());
    for j in 0..hidden.n_hc() {
        let block = r.f64_vec(block_len)?;
        check_traces(&format!("p_xy[hc {j}]"), &block)?;
        p_xy.push(block);
    }
    let mut blocks = Vec::with_capacity(hidden.n_hc());
    for (j, joint) in p_xy.into_iter().enumerate() {
        let w = r.f64_vec(block_len)?;
        check_finite(&format!("w[hc {j}]"), &w)?;
        blocks.push(HcBlock { p_xy: joint, w });
    }
    let b = r.f64_vec(hidden.units())?;
    check_finite("b", &b)?;
    Ok(BcpnnModel {
        input_spec: input,
        hidden_spec: hidden,
        tau_p,
        dt,
        mu,
        sp: StructuralPlasticityConfig {
            p_ih,
            n_flips,
            rng_seed,
        },
        seed,
        mask,
        p_x,
        p_y,
        b,
        blocks,
    })
}

fn write_rbm(w: &mut Writer, model: &RbmModel) {
    let cfg = model.config();
    w.u32(cfg.n_visible as u32);
    w.u32(cfg.n_hidden as u32);
    w.f64(cfg.alpha);
    w.u64(cfg.batch_size as u64);
    w.u64(cfg.n_epochs as u64);
    w.u64(cfg.seed);
    w.f64_slice(model.weights());
    w.f64_slice(model.visible_biases());
    w.f64_slice(model.hidden_biases());
}

fn read_rbm(r: &mut Reader) -> Result<RbmModel> {
    let n_visible = r.u32()? as usize;
    let n_hidden = r.u32()? as usize;
    if n_visible == 0 || n_hidden == 0 {
        return Err(Error::format("rbm checkpoint with empty layer"));
    }
    let cfg = RbmConfig {
        n_visible,
        n_hidden,
        alpha: r.f64()?,
        batch_size: r.u64()? as usize,
        n_epochs: r.u64()? as usize,
        seed: r.u64()?,
    };
    let w = r.f64_vec(n_visible * n_hidden)?;
    check_finite("rbm weights", &w)?;
    let b_visible = r.f64_vec(n_visible)?;
    check_finite("rbm visible biases", &b_visible)?;
    let b_hidden = r.f64_vec(n_hidden)?;
    check_finite("rbm hidden biases", &b_hidden)?;
    Ok(RbmModel {
        w,
        b_visible,
        b_hidden,
        cfg,
    })
}

fn write_probe(w: &mut Writer, probe: &LinearProbe) {
    let hp = probe.hyperparams();
    w.u32(probe.n_in() as u32);
    w.u32(probe.n_classes() as u32);
    w.f64(hp.learning_rate);
    w.f64(hp.beta1);
    w.f64(hp.beta2);
    w.f64(hp.epsilon);
    w.u64(hp.batch_size as u64);
    w.u64(hp.n_epochs as u64);
    w.u64(probe.step_count());
    w.f64_slice(&probe.w);
    w.f64_slice(&probe.b);
    w.f64_slice(&probe.m_w);
    w.f64_slice(&probe.v_w);
    w.f64_slice(&probe.m_b);
    w.f64_slice(&probe.v_b);
}

fn read_probe(r: &mut Reader) -> Result<LinearProbe> {
    let n_in = r.u32()? as usize;
    let n_classes = r.u32()? as usize;
    if n_in == 0 || n_classes < 2 {
        return Err(Error::format("probe checkpoint with degenerate shape"));
    }
    let hp = ProbeHyperparams {
        learning_rate: r.f64()?,
        beta1: r.f64()?,
        beta2: r.f64()?,
        epsilon: r.f64()?,
        batch_size: r.u64()? as usize,
        n_epochs: r.u64()? as usize,
    };
    let step = r.u64()?;
    let probe = LinearProbe {
        n_in,
        n_classes,
        w: r.f64_vec(n_classes * n_in)?,
        b: r.f64_vec(n_classes)?,
        m_w: r.f64_vec(n_classes * n_in)?,
        v_w: r.f64_vec(n_classes * n_in)?,
        m_b: r.f64_vec(n_classes)?,
        v_b: r.f64_vec(n_classes)?,
        step,
        hp,
    };
    for (name, values) in [
        ("probe weights", &probe.w),
        ("probe biases", &probe.b),
        ("probe adam state", &probe.m_w),
    ] {
        check_finite(name, values)?;
    }
    Ok(probe)
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn header(&mut self, kind: u32) {
        self.buf.extend_from_slice(MAGIC);
        self.u32(FORMAT_VERSION);
        self.u32(kind);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    fn blob(&mut self, v: &[u8]) {
        self.u64(v.len() as u64);
        self.bytes(v);
    }

    fn f64_slice(&mut self, v: &[f64]) {
        self.buf.reserve(v.len() * 8);
        for &x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn header(&mut self) -> Result<u32> {
        let magic = self.bytes(4)?;
        if magic != MAGIC {
            return Err(Error::format("not a checkpoint (bad magic)"));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported checkpoint version {version} (this build reads {FORMAT_VERSION})"
            )));
        }
        self.u32()
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("truncated checkpoint"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn blob(&mut self) -> Result<&'a [u8]> {
        let len = self.u64()? as usize;
        self.bytes(len)
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.bytes(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after checkpoint payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
