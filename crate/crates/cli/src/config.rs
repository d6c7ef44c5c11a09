//! Resolved run configurations. Each command reads an optional TOML file
//! into its resolved struct, then applies command-line flags on top.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dapa_core::ActivationKind;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

/// Writes `<output stem>.config.toml` beside `output`.
pub fn write_beside<T: Serialize>(output: &Path, resolved: &T) -> Result<PathBuf> {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    let path = output.with_file_name(format!("{stem}.config.toml"));
    let text = toml::to_string_pretty(resolved).context("serializing resolved config")?;
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Replaces `target` when the flag was given.
pub fn set<T>(target: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *target = v;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRun {
    pub samples: PathBuf,
    pub kind: ActivationKind,
    pub segments: usize,
    pub bins: usize,
    pub clip: Option<(f64, f64)>,
    pub uniform: bool,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    pub dist: Option<PathBuf>,
}

impl Default for FitRun {
    fn default() -> Self {
        Self {
            samples: PathBuf::new(),
            kind: ActivationKind::GeluTanh,
            segments: dapa_core::fitter::DEFAULT_SEGMENTS,
            bins: 2048,
            clip: None,
            uniform: false,
            out: PathBuf::from("table.json"),
            report: None,
            dist: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizeRun {
    pub table: PathBuf,
    pub dist: PathBuf,
    pub theta: f64,
    pub bit_max: u32,
    pub range: Option<(f64, f64)>,
    pub out: PathBuf,
    pub export_header: Option<PathBuf>,
    pub prefix: String,
}

impl Default for QuantizeRun {
    fn default() -> Self {
        Self {
            table: PathBuf::new(),
            dist: PathBuf::new(),
            theta: dapa_core::quantizer::DEFAULT_THETA,
            bit_max: dapa_core::quantizer::BIT_MAX,
            range: None,
            out: PathBuf::from("qtable.json"),
            export_header: None,
            prefix: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRun {
    #[serde(flatten)]
    pub train: dapa_core::netcheck::TrainConfig,
    pub samples: usize,
    pub noise: f64,
    pub label_noise: f64,
    pub data_seed: u64,
    pub out: PathBuf,
    pub plot: Option<PathBuf>,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            train: Default::default(),
            samples: 512,
            noise: 0.15,
            label_noise: 0.05,
            data_seed: 1234,
            out: PathBuf::from("train.json"),
            plot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyRun {
    #[serde(flatten)]
    pub study: dapa_core::netcheck::StudyConfig,
    pub out: PathBuf,
    pub csv: Option<PathBuf>,
}

impl Default for StudyRun {
    fn default() -> Self {
        Self {
            study: Default::default(),
            out: PathBuf::from("study.json"),
            csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftmaxRun {
    pub table: PathBuf,
    pub vectors: usize,
    pub len: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SoftmaxRun {
    fn default() -> Self {
        Self {
            table: PathBuf::new(),
            vectors: 1000,
            len: 16,
            sigma: 2.0,
            seed: 0,
        }
    }
}
