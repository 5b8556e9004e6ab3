//! Figure artifacts and evaluation metrics: receptive-field images, weight
//! histograms, cluster purity.
//!
//! Images are written as portable pixmaps (binary PGM for masks, PPM for
//! signed weight maps) so no plotting stack is needed; histograms also go to
//! CSV so any plotter can consume the raw values. All outputs are
//! deterministic functions of the model.

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::BcpnnModel;
use crate::rbm::RbmModel;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Histogram over weight values. `edges` has `counts.len() + 1` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of the total mass in the bin containing `value`.
    pub fn mass_at(&self, value: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        for (k, w) in self.edges.windows(2).enumerate() {
            let last = k == self.counts.len() - 1;
            if value >= w[0] && (value < w[1] || (last && value <= w[1])) {
                return self.counts[k] as f64 / total as f64;
            }
        }
        0.0
    }

    /// Writes `bin_lo,bin_hi,count` rows under a header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (k, &c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[k], self.edges[k + 1], c));
        }
        File::create(path)?.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Histograms `values` over `n_bins` equal bins spanning [min, max]. A
/// degenerate range (all values equal) widens to one unit either side so a
/// single bin carries everything.
pub fn histogram(values: impl Iterator<Item = f64> + Clone, n_bins: usize) -> Result<Histogram> {
    if n_bins < 1 {
        return Err(Error::invalid("n_bins", "must be >= 1"));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for v in values.clone() {
        min = min.min(v);
        max = max.max(v);
        any = true;
    }
    if !any {
        return Err(Error::Empty("histogram values"));
    }
    let (lo, hi) = if min == max {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    };
    let width = hi - lo;
    let mut counts = vec![0u64; n_bins];
    for v in values {
        let k = (((v - lo) / width) * n_bins as f64) as usize;
        counts[k.min(n_bins - 1)] += 1;
    }
    let edges = (0..=n_bins)
        .map(|k| lo + width * k as f64 / n_bins as f64)
        .collect();
    Ok(Histogram { edges, counts })
}

/// Histogram over every weight entry of a BCPNN model (silent zeros
/// included).
pub fn weight_histogram(model: &BcpnnModel, n_bins: usize) -> Result<Histogram> {
    histogram(model.weight_entries(), n_bins)
}

/// Histogram over an RBM's weight matrix.
pub fn rbm_weight_histogram(model: &RbmModel, n_bins: usize) -> Result<Histogram> {
    histogram(model.weights().iter().copied(), n_bins)
}

/// Purity of a clustering against ground-truth labels: for each cluster take
/// its most common label, sum those counts, divide by the total.
pub fn cluster_purity(assignments: &[usize], labels: &[u8]) -> Result<f64> {
    if assignments.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} assignments vs {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    if assignments.is_empty() {
        return Err(Error::Empty("cluster assignments"));
    }
    let n_clusters = assignments.iter().max().unwrap() + 1;
    let n_labels = *labels.iter().max().unwrap() as usize + 1;
    let mut table = vec![0u64; n_clusters * n_labels];
    for (&c, &l) in assignments.iter().zip(labels) {
        table[c * n_labels + l as usize] += 1;
    }
    let majority: u64 = table
        .chunks(n_labels)
        .map(|row| row.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / assignments.len() as f64)
}

/// Cluster assignment of every sample: the argmax minicolumn of hidden HC
/// `hidden_hc` after inference.
pub fn mc_assignments(
    model: &BcpnnModel,
    data: &LabeledDataset,
    hidden_hc: usize,
) -> Result<Vec<usize>> {
    if hidden_hc >= model.hidden_spec().n_hc() {
        return Err(Error::invalid("hidden_hc", "index out of range"));
    }
    let mut pi_in = vec![0.0f64; model.input_spec().units()];
    let mut pi_hid = vec![0.0f64; model.hidden_spec().units()];
    let mut out = Vec::with_capacity(data.len());
    let range = model.hidden_spec().hc_range(hidden_hc);
    for i in 0..data.len() {
        crate::data::encode_into(data.sample(i), &mut pi_in);
        model.activity_update_into(&pi_in, &mut pi_hid);
        out.push(crate::math::argmax(&pi_hid[range.clone()]));
    }
    Ok(out)
}

/// Chooses the image grid for `n` input HCs: a square when `n` is a perfect
/// square (e.g. 784 -> 28x28), otherwise a single row.
fn grid_dims(n: usize) -> (usize, usize) {
    let side = (n as f64).sqrt().round() as usize;
    if side * side == n {
        (side, side)
    } else {
        (1, n)
    }
}

/// Binary PGM (P5), one byte per pixel.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::shape("pixel buffer does not match dimensions"));
    }
    let mut f = File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    f.write_all(pixels)?;
    Ok(())
}

/// Binary PPM (P6), three bytes per pixel.
pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if rgb.len() != 3 * width * height {
        return Err(Error::shape("rgb buffer does not match dimensions"));
    }
    let mut f = File::create(path)?;
    write!(f, "P6\n{width} {height}\n255\n")?;
    f.write_all(rgb)?;
    Ok(())
}

/// Maps a signed value to a blue-white-red diverging color. `max_abs` is the
/// symmetric normalization bound of the image; zero maps to white.
fn diverging_rgb(v: f64, max_abs: f64) -> [u8; 3] {
    if max_abs <= 0.0 {
        return [255, 255, 255];
    }
    let t = (v / max_abs).clamp(-1.0, 1.0);
    let fade = (255.0 * (1.0 - t.abs())).round() as u8;
    if t < 0.0 {
        [fade, fade, 255]
    } else {
        [255, fade, fade]
    }
}

/// Renders a signed value map as a diverging PPM with per-image symmetric
/// normalization (max |value| maps to the color extremes).
pub fn write_signed_map(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    values: &[f64],
) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::shape("value buffer does not match dimensions"));
    }
    let max_abs = values.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let mut rgb = Vec::with_capacity(3 * values.len());
    for &v in values {
        rgb.extend_from_slice(&diverging_rgb(v, max_abs));
    }
    write_ppm(path, width, height, &rgb)
}

/// Which hidden HCs and which of their minicolumns to export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfSelection {
    pub hcs: Vec<usize>,
    pub mcs: Vec<usize>,
}

/// Exports receptive fields of a BCPNN model: per selected hidden HC, one
/// mask image (black where the connection is active) and one signed weight
/// map per selected minicolumn, built from the `pi(on)` weights of every
/// pixel. Returns the written paths.
pub fn export_receptive_fields(
    model: &BcpnnModel,
    selection: &RfSelection,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let n_input_hcs = model.input_spec().n_hc();
    let n_mc_in = model.input_spec().n_mc();
    let n_in_units = model.input_spec().units();
    let (h, w) = grid_dims(n_input_hcs);
    let mut written = Vec::new();

    for &j in &selection.hcs {
        if j >= model.hidden_spec().n_hc() {
            return Err(Error::invalid(
                "selection.hcs",
                format!("HC {j} out of range"),
            ));
        }
        let mask_pixels: Vec<u8> = (0..n_input_hcs)
            .map(|i| if model.mask().is_active(i, j) { 0 } else { 255 })
            .collect();
        let path = out_dir.join(format!("hc{j:03}_mask.pgm"));
        write_pgm(&path, w, h, &mask_pixels)?;
        written.push(path);

        let block = model.weight_block(j);
        for &m in &selection.mcs {
            if m >= model.hidden_spec().n_mc() {
                return Err(Error::invalid(
                    "selection.mcs",
                    format!("MC {m} out of range"),
                ));
            }
            // w(x = on, y) per pixel; the "on" unit of pixel i is i*n_mc + 1.
            let values: Vec<f64> = (0..n_input_hcs)
                .map(|i| block[m * n_in_units + i * n_mc_in + 1])
                .collect();
            let path = out_dir.join(format!("hc{j:03}_mc{m:03}.ppm"));
            write_signed_map(&path, w, h, &values)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Exports receptive fields of RBM hidden units: one signed weight map per
/// selected unit.
pub fn export_rbm_receptive_fields(
    model: &RbmModel,
    units: &[usize],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let nv = model.config().n_visible;
    let nh = model.config().n_hidden;
    let (h, w) = grid_dims(nv);
    let mut written = Vec::new();
    for &unit in units {
        if unit >= nh {
            return Err(Error::invalid("units", format!("unit {unit} out of range")));
        }
        let values: Vec<f64> = (0..nv).map(|v| model.weights()[v * nh + unit]).collect();
        let path = out_dir.join(format!("unit{unit:04}.ppm"));
        write_signed_map(&path, w, h, &values)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::LayerSpec;
    use crate::model::BcpnnConfig;

    #[test]
    fn histogram_single_bin_for_constant_values() {
        let h = histogram(std::iter::repeat_n(0.0, 50), 7).unwrap();
        assert_eq!(h.total(), 50);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert!((h.mass_at(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_conserves_count() {
        let values: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = histogram(values.iter().copied(), 13).unwrap();
        assert_eq!(h.total(), 1000);
        assert_eq!(h.edges.len(), 14);
        assert_eq!(
            h.edges[0],
            values.iter().cloned().fold(f64::INFINITY, f64::min)
        );
    }

    #[test]
    fn histogram_rejects_zero_bins_and_empty_input() {
        assert!(histogram([1.0].into_iter(), 0).is_err());
        assert!(histogram(std::iter::empty(), 5).is_err());
    }

    #[test]
    fn purity_examples() {
        // Identical assignment: purity 1.
        let labels = [0u8, 1, 2, 0, 1, 2];
        let assignments = [0usize, 1, 2, 0, 1, 2];
        assert_eq!(cluster_purity(&assignments, &labels).unwrap(), 1.0);

        // Single cluster over balanced 10 labels: purity 0.1.
        let labels: Vec<u8> = (0..100).map(|i| (i % 10) as u8).collect();
        let assignments = vec![0usize; 100];
        assert!((cluster_purity(&assignments, &labels).unwrap() - 0.1).abs() < 1e-12);

        // Random balanced assignment over 3 clusters hovers near 1/3.
        let labels: Vec<u8> = (0..3000).map(|i| (i % 3) as u8).collect();
        let mut state = 0x12345u64;
        let assignments: Vec<usize> = (0..3000)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state % 3) as usize
            })
            .collect();
        let p = cluster_purity(&assignments, &labels).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 0.05, "purity {p}");

        assert!(cluster_purity(&[], &[]).is_err());
    }

    #[test]
    fn grid_is_square_when_possible() {
        assert_eq!(grid_dims(784), (28, 28));
        assert_eq!(grid_dims(16), (4, 4));
        assert_eq!(grid_dims(12), (1, 12));
    }

    #[test]
    fn diverging_palette_anchors() {
        assert_eq!(diverging_rgb(0.0, 1.0), [255, 255, 255]);
        assert_eq!(diverging_rgb(1.0, 1.0), [255, 0, 0]);
        assert_eq!(diverging_rgb(-1.0, 1.0), [0, 0, 255]);
        // All-zero map: zero max_abs falls back to white.
        assert_eq!(diverging_rgb(0.0, 0.0), [255, 255, 255]);
    }

    #[test]
    fn receptive_field_export_writes_expected_files() {
        let mut cfg = BcpnnConfig::new(
            LayerSpec::new(16, 2).unwrap(),
            LayerSpec::new(2, 3).unwrap(),
        );
        cfg.sp.p_ih = 1.0;
        let model = crate::model::BcpnnModel::init(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let sel = RfSelection {
            hcs: vec![0, 1],
            mcs: vec![0, 2],
        };
        let files = export_receptive_fields(&model, &sel, dir.path()).unwrap();
        // Per HC: one mask plus two MC maps.
        assert_eq!(files.len(), 6);
        for f in &files {
            assert!(f.exists());
        }
        // Full connectivity: the mask image is all black.
        let bytes = std::fs::read(dir.path().join("hc000_mask.pgm")).unwrap();
        let header_end = bytes.len() - 16;
        assert!(bytes[header_end..].iter().all(|&b| b == 0));
    }

    #[test]
    fn exports_are_deterministic() {
        let cfg = BcpnnConfig::new(LayerSpec::new(9, 2).unwrap(), LayerSpec::new(1, 2).unwrap());
        let model = crate::model::BcpnnModel::init(&cfg).unwrap();
        let sel = RfSelection {
            hcs: vec![0],
            mcs: vec![1],
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        export_receptive_fields(&model, &sel, dir_a.path()).unwrap();
        export_receptive_fields(&model, &sel, dir_b.path()).unwrap();
        for name in ["hc000_mask.pgm", "hc000_mc001.ppm"] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b);
        }
    }
}
