//! Dataset ingestion and encoding.
//!
//! Datasets are loaded from IDX files (the MNIST wire format: big-endian
//! magic and dimensions, unsigned-byte payload; gzip-compressed files are
//! detected and inflated transparently). Pixel intensities are kept as real
//! probabilities in [0, 1] — a pixel's value is read as the probability of a
//! binary variable, so each pixel becomes one 2-minicolumn hypercolumn with
//! `pi(on) = v` and `pi(off) = 1 - v`.
//!
//! `synth_mixture` generates labeled binary cluster data used by the
//! mixture-model oracle tests.

use crate::error::{Error, Result};
use crate::layer::{LayerSpec, ModularLayer};
use flate2::read::GzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Probability-coded samples with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    data: Vec<f32>,
    labels: Vec<u8>,
    split: Split,
}

impl LabeledDataset {
    /// Builds a dataset from explicit rows, validating ranges and lengths.
    pub fn from_rows(rows: Vec<Vec<f32>>, labels: Vec<u8>, split: Split) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} samples vs {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::shape(format!(
                    "sample {i} has {} values, expected {dim}",
                    row.len()
                )));
            }
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(
                        "samples",
                        format!("sample {i} holds {v}, outside [0,1]"),
                    ));
                }
            }
            data.extend_from_slice(row);
        }
        Ok(LabeledDataset {
            dim,
            data,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Dimensionality of each sample.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// The input-layer shape these samples encode to: one binary HC per
    /// dimension.
    pub fn input_spec(&self) -> Result<LayerSpec> {
        LayerSpec::new(self.dim, 2)
    }
}

/// One sample probability-coded as an input layer: 2 minicolumns per pixel,
/// minicolumn index = binary value, so unit `2p` carries `1 - v` and unit
/// `2p + 1` carries `v`. The two activities sum to one exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    activities: ModularLayer,
}

impl EncodedSample {
    pub fn activities(&self) -> &ModularLayer {
        &self.activities
    }

    /// Recovers the original intensities (`pi(on)` of each hypercolumn).
    pub fn decode(&self) -> Vec<f32> {
        let acts = self.activities.activities();
        (0..acts.len() / 2)
            .map(|p| acts[2 * p + 1] as f32)
            .collect()
    }
}

/// Probability-codes one sample.
pub fn encode(sample: &[f32]) -> Result<EncodedSample> {
    for &v in sample {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid("sample", format!("{v} outside [0,1]")));
        }
    }
    let spec = LayerSpec::new(sample.len(), 2)?;
    let mut out = vec![0.0f64; spec.units()];
    encode_into(sample, &mut out);
    Ok(EncodedSample {
        activities: ModularLayer::from_activities_unchecked(spec, out),
    })
}

/// Buffer-reusing encode; `out` must have length `2 * sample.len()`.
pub fn encode_into(sample: &[f32], out: &mut [f64]) {
    debug_assert_eq!(out.len(), 2 * sample.len());
    for (p, &v) in sample.iter().enumerate() {
        let on = v as f64;
        out[2 * p] = 1.0 - on;
        out[2 * p + 1] = on;
    }
}

fn read_file_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?
        .read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut inflated = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut inflated)
            .map_err(|e| Error::format(format!("{}: bad gzip stream: {e}", path.display())))?;
        Ok(inflated)
    } else {
        Ok(raw)
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::format(format!("truncated {what}")));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Loads an IDX image/label file pair into a dataset. Intensities are
/// `byte / 255`. Fails on bad magic numbers, truncated payloads, or an
/// image/label count mismatch.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    split: Split,
) -> Result<LabeledDataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let img = read_file_maybe_gz(images_path)?;
    let magic = read_u32_be(&img, 0, "image header")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(format!(
            "{}: bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let n = read_u32_be(&img, 4, "image header")? as usize;
    let rows = read_u32_be(&img, 8, "image header")? as usize;
    let cols = read_u32_be(&img, 12, "image header")? as usize;
    let dim = rows * cols;
    if img.len() != 16 + n * dim {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, header promises {}",
            images_path.display(),
            img.len() - 16.min(img.len()),
            n * dim
        )));
    }

    let lab = read_file_maybe_gz(labels_path)?;
    let magic = read_u32_be(&lab, 0, "label header")?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(format!(
            "{}: bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}",
            labels_path.display()
        )));
    }
    let n_labels = read_u32_be(&lab, 4, "label header")? as usize;
    if lab.len() != 8 + n_labels {
        return Err(Error::format(format!(
            "{}: payload holds {} labels, header promises {n_labels}",
            labels_path.display(),
            lab.len().saturating_sub(8)
        )));
    }
    if n != n_labels {
        return Err(Error::format(format!("{n} images vs {n_labels} labels",)));
    }
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }

    let data: Vec<f32> = img[16..].iter().map(|&b| b as f32 / 255.0).collect();
    Ok(LabeledDataset {
        dim,
        data,
        labels: lab[8..].to_vec(),
        split,
    })
}

/// Writes a dataset as an IDX image/label pair. Intensities are quantized
/// back to bytes with `round(v * 255)`, which is exact for anything that
/// came out of `load_idx` or `synth_mixture`. `rows * cols` must equal the
/// sample dimensionality.
pub fn write_idx(
    ds: &LabeledDataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
) -> Result<()> {
    if rows * cols != ds.dim {
        return Err(Error::shape(format!(
            "{rows}x{cols} does not match sample dim {}",
            ds.dim
        )));
    }
    let mut img = Vec::with_capacity(16 + ds.data.len());
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend(ds.data.iter().map(|&v| (v * 255.0).round() as u8));
    File::create(images_path)?.write_all(&img)?;

    let mut lab = Vec::with_capacity(8 + ds.labels.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    lab.extend_from_slice(&ds.labels);
    File::create(labels_path)?.write_all(&lab)?;
    Ok(())
}

/// Generates a labeled binary mixture: each cluster is a random binary
/// prototype over `n_hc` pixels, and every sample is its cluster's prototype
/// with i.i.d. bit flips at rate `flip_noise`. Clusters are assigned
/// round-robin so they are exactly balanced. Deterministic per seed.
pub fn synth_mixture(
    n_clusters: usize,
    n_hc: usize,
    flip_noise: f64,
    n_samples: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_clusters < 2 {
        return Err(Error::invalid("n_clusters", "must be >= 2"));
    }
    if n_clusters > u8::MAX as usize + 1 {
        return Err(Error::invalid("n_clusters", "labels are bytes"));
    }
    if !(0.0..0.5).contains(&flip_noise) {
        return Err(Error::invalid(
            "flip_noise",
            format!("got {flip_noise}, need [0, 0.5)"),
        ));
    }
    if n_hc == 0 || n_samples == 0 {
        return Err(Error::Empty("synth_mixture"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes: Vec<Vec<bool>> = (0..n_clusters)
        .map(|_| (0..n_hc).map(|_| rng.random::<f64>() < 0.5).collect())
        .collect();
    let mut data = Vec::with_capacity(n_samples * n_hc);
    let mut labels = Vec::with_capacity(n_samples);
    for t in 0..n_samples {
        let c = t % n_clusters;
        for &bit in &prototypes[c] {
            let flipped = flip_noise > 0.0 && rng.random::<f64>() < flip_noise;
            data.push((bit ^ flipped) as u8 as f32);
        }
        labels.push(c as u8);
    }
    Ok(LabeledDataset {
        dim: n_hc,
        data,
        labels,
        split: Split::Train,
    })
}
