//! Run configuration: defaults, config-file overlay, flag overlay,
//! validation, and the resolved-config echo.
//!
//! The config file is a flat `key = value` text format (one pair per line,
//! `#` comments). Every run writes its fully resolved configuration next to
//! its outputs; feeding that file back via `--config` reproduces the run
//! bit-exactly.

use crate::CliError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const DATA_DIR_ENV: &str = "BCPNN_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Bcpnn,
    Rbm,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Bcpnn => "bcpnn",
            ModelKind::Rbm => "rbm",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bcpnn" => Ok(ModelKind::Bcpnn),
            "rbm" => Ok(ModelKind::Rbm),
            other => Err(format!("unknown model kind '{other}' (bcpnn|rbm)")),
        }
    }
}

/// Everything a training run needs. Defaults are the standard configuration:
/// 5 epochs, 30x100 hidden layer, dt 0.01, tau_p 60, 8% connectivity, 16
/// flips per epoch, Poisson mean 10; RBM baseline alpha 0.01, 300 epochs of
/// 256-sample minibatches; probe Adam(1e-3, 0.9, 0.999, 1e-8), 256-sample
/// minibatches, 300 epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub dataset: String,
    pub data_dir: Option<PathBuf>,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    // BCPNN hyperparameters.
    pub n_epoch: usize,
    pub n_hc: usize,
    pub n_mc: usize,
    pub dt: f64,
    pub tau_p: f64,
    pub p_ih: f64,
    pub n_flips: usize,
    pub mu: f64,
    // RBM baseline hyperparameters.
    pub rbm_hidden: usize,
    pub rbm_alpha: f64,
    pub rbm_epochs: usize,
    pub rbm_batch: usize,
    // Probe hyperparameters.
    pub probe_lr: f64,
    pub probe_beta1: f64,
    pub probe_beta2: f64,
    pub probe_epsilon: f64,
    pub probe_batch: usize,
    pub probe_epochs: usize,
    /// Rayon worker threads; 0 picks the core count.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Bcpnn,
            dataset: "mnist".into(),
            data_dir: None,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            out_dir: None,
            seed: 0,
            n_epoch: 5,
            n_hc: 30,
            n_mc: 100,
            dt: 0.01,
            tau_p: 60.0,
            p_ih: 0.08,
            n_flips: 16,
            mu: 10.0,
            rbm_hidden: 3000,
            rbm_alpha: 0.01,
            rbm_epochs: 300,
            rbm_batch: 256,
            probe_lr: 1e-3,
            probe_beta1: 0.9,
            probe_beta2: 0.999,
            probe_epsilon: 1e-8,
            probe_batch: 256,
            probe_epochs: 300,
            threads: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::config(format!("{key}: cannot parse '{value}': {e}")))
}

impl RunConfig {
    /// Applies one `key = value` pair. Unknown keys are config errors.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "model" => self.model = parse(key, value)?,
            "dataset" => self.dataset = value.to_string(),
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "train_images" => self.train_images = Some(PathBuf::from(value)),
            "train_labels" => self.train_labels = Some(PathBuf::from(value)),
            "test_images" => self.test_images = Some(PathBuf::from(value)),
            "test_labels" => self.test_labels = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "n_epoch" => self.n_epoch = parse(key, value)?,
            "n_hc" => self.n_hc = parse(key, value)?,
            "n_mc" => self.n_mc = parse(key, value)?,
            "dt" => self.dt = parse(key, value)?,
            "tau_p" => self.tau_p = parse(key, value)?,
            "p_ih" => self.p_ih = parse(key, value)?,
            "n_flips" => self.n_flips = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "rbm_hidden" => self.rbm_hidden = parse(key, value)?,
            "rbm_alpha" => self.rbm_alpha = parse(key, value)?,
            "rbm_epochs" => self.rbm_epochs = parse(key, value)?,
            "rbm_batch" => self.rbm_batch = parse(key, value)?,
            "probe_lr" => self.probe_lr = parse(key, value)?,
            "probe_beta1" => self.probe_beta1 = parse(key, value)?,
            "probe_beta2" => self.probe_beta2 = parse(key, value)?,
            "probe_epsilon" => self.probe_epsilon = parse(key, value)?,
            "probe_batch" => self.probe_batch = parse(key, value)?,
            "probe_epochs" => self.probe_epochs = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            other => {
                return Err(CliError::config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Loads a `key = value` config file over the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!(
                    "config {}:{}: expected 'key = value'",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply_kv(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Checks every field against its type's invariants; the message names
    /// the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: String| Err(CliError::config(format!("{field}: {why}")));
        if self.n_hc < 1 {
            return bad("n_hc", "must be >= 1".into());
        }
        if self.n_mc < 2 {
            return bad("n_mc", "must be >= 2".into());
        }
        if !(self.dt > 0.0) {
            return bad("dt", format!("got {}, must be > 0", self.dt));
        }
        if !(self.tau_p > 0.0) || self.dt > self.tau_p {
            return bad("tau_p", format!("need tau_p >= dt > 0, got {}", self.tau_p));
        }
        if !(self.p_ih > 0.0 && self.p_ih <= 1.0) {
            return bad("p_ih", format!("got {}, need (0,1]", self.p_ih));
        }
        if !(self.mu > 0.0) {
            return bad("mu", format!("got {}, must be > 0", self.mu));
        }
        if self.rbm_hidden == 0 {
            return bad("rbm_hidden", "must be >= 1".into());
        }
        if !(self.rbm_alpha >= 0.0) || !self.rbm_alpha.is_finite() {
            return bad("rbm_alpha", format!("got {}", self.rbm_alpha));
        }
        if self.rbm_batch == 0 {
            return bad("rbm_batch", "must be >= 1".into());
        }
        if !(self.probe_lr >= 0.0) {
            return bad("probe_lr", format!("got {}", self.probe_lr));
        }
        if !(0.0..1.0).contains(&self.probe_beta1) {
            return bad(
                "probe_beta1",
                format!("got {}, need [0,1)", self.probe_beta1),
            );
        }
        if !(0.0..1.0).contains(&self.probe_beta2) {
            return bad(
                "probe_beta2",
                format!("got {}, need [0,1)", self.probe_beta2),
            );
        }
        if !(self.probe_epsilon > 0.0) {
            return bad("probe_epsilon", format!("got {}", self.probe_epsilon));
        }
        if self.probe_batch == 0 {
            return bad("probe_batch", "must be >= 1".into());
        }
        Ok(())
    }

    /// Output directory, defaulting to `runs/<model>_<dataset>_seed<seed>`.
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| {
            PathBuf::from("runs").join(format!(
                "{}_{}_seed{}",
                self.model.as_str(),
                self.dataset,
                self.seed
            ))
        })
    }

    /// Seeds derived from the master seed, one per random stream.
    pub fn mask_seed(&self) -> u64 {
        self.seed
    }

    pub fn trace_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }

    pub fn probe_seed(&self) -> u64 {
        self.seed.wrapping_add(3)
    }

    /// Full `key = value` echo of the configuration, defaults included.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("model", self.model.as_str().into());
        put("dataset", self.dataset.clone());
        if let Some(d) = &self.data_dir {
            put("data_dir", d.display().to_string());
        }
        for (k, v) in [
            ("train_images", &self.train_images),
            ("train_labels", &self.train_labels),
            ("test_images", &self.test_images),
            ("test_labels", &self.test_labels),
        ] {
            if let Some(p) = v {
                put(k, p.display().to_string());
            }
        }
        put("out_dir", self.resolved_out_dir().display().to_string());
        put("seed", self.seed.to_string());
        put("n_epoch", self.n_epoch.to_string());
        put("n_hc", self.n_hc.to_string());
        put("n_mc", self.n_mc.to_string());
        put("dt", self.dt.to_string());
        put("tau_p", self.tau_p.to_string());
        put("p_ih", self.p_ih.to_string());
        put("n_flips", self.n_flips.to_string());
        put("mu", self.mu.to_string());
        put("rbm_hidden", self.rbm_hidden.to_string());
        put("rbm_alpha", self.rbm_alpha.to_string());
        put("rbm_epochs", self.rbm_epochs.to_string());
        put("rbm_batch", self.rbm_batch.to_string());
        put("probe_lr", self.probe_lr.to_string());
        put("probe_beta1", self.probe_beta1.to_string());
        put("probe_beta2", self.probe_beta2.to_string());
        put("probe_epsilon", self.probe_epsilon.to_string());
        put("probe_batch", self.probe_batch.to_string());
        put("probe_epochs", self.probe_epochs.to_string());
        put("threads", self.threads.to_string());
        s
    }

    /// Hyperparameter echo for run reports.
    pub fn hyperparameter_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        match self.model {
            ModelKind::Bcpnn => {
                put("n_epoch", self.n_epoch.to_string());
                put("n_hc", self.n_hc.to_string());
                put("n_mc", self.n_mc.to_string());
                put("dt", self.dt.to_string());
                put("tau_p", self.tau_p.to_string());
                put("p_ih", self.p_ih.to_string());
                put("n_flips", self.n_flips.to_string());
                put("mu", self.mu.to_string());
            }
            ModelKind::Rbm => {
                put("rbm_hidden", self.rbm_hidden.to_string());
                put("rbm_alpha", self.rbm_alpha.to_string());
                put("rbm_epochs", self.rbm_epochs.to_string());
                put("rbm_batch", self.rbm_batch.to_string());
            }
        }
        put("probe_lr", self.probe_lr.to_string());
        put("probe_batch", self.probe_batch.to_string());
        put("probe_epochs", self.probe_epochs.to_string());
        map
    }
}

/// Concrete dataset file paths for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

const STD_NAMES: [(&str, &str); 4] = [
    ("train_images", "train-images-idx3-ubyte"),
    ("train_labels", "train-labels-idx1-ubyte"),
    ("test_images", "t10k-images-idx3-ubyte"),
    ("test_labels", "t10k-labels-idx1-ubyte"),
];

fn find_standard(dir: &Path, field: &str, name: &str) -> Result<PathBuf, CliError> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(CliError::config(format!(
        "{field}: neither {} nor {} exists",
        plain.display(),
        gz.display()
    )))
}

/// Resolves the four dataset files from explicit overrides or the data
/// directory (standard MNIST-layout names, `.gz` accepted). Missing files
/// are config errors naming the field.
pub fn resolve_data_paths(cfg: &RunConfig) -> Result<DataPaths, CliError> {
    let overrides = [
        ("train_images", &cfg.train_images),
        ("train_labels", &cfg.train_labels),
        ("test_images", &cfg.test_images),
        ("test_labels", &cfg.test_labels),
    ];
    let mut out: Vec<PathBuf> = Vec::with_capacity(4);
    for ((field, std_name), (_, explicit)) in STD_NAMES.iter().zip(overrides.iter()) {
        match explicit {
            Some(path) => {
                if !path.is_file() {
                    return Err(CliError::config(format!(
                        "{field}: {} does not exist",
                        path.display()
                    )));
                }
                out.push(path.clone());
            }
            None => {
                let dir = cfg.data_dir.as_ref().ok_or_else(|| {
                    CliError::config(format!(
                        "{field}: set --data-dir (or {DATA_DIR_ENV}) or pass the file explicitly"
                    ))
                })?;
                out.push(find_standard(dir, field, std_name)?);
            }
        }
    }
    let mut it = out.into_iter();
    Ok(DataPaths {
        train_images: it.next().unwrap(),
        train_labels: it.next().unwrap(),
        test_images: it.next().unwrap(),
        test_labels: it.next().unwrap(),
    })
}
