//! Desk-scale validation: twin training runs with exact vs table
//! activations, a derivative-table error report, and a study of how
//! fitting-sample count affects held-out DWMSE.

mod net;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use net::{ActivationImpl, ToyNet};

use crate::distribution::{EmpiricalDistribution, SampleSet};
use crate::error::{Error, Result};
use crate::fitter::{build_dapa, DapaTable, FitConfig, DEFAULT_SEGMENTS};
use crate::metrics;
use crate::reference::ActivationKind;
use crate::synth::{Dataset, SyntheticLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dims: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub seeds: Vec<u64>,
    pub kind: ActivationKind,
    pub segments: usize,
    /// Histogram bins for the pre-activation distribution.
    pub bins: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 32, 32, 2],
            epochs: 200,
            lr: 0.5,
            seeds: vec![0, 1, 2, 3, 4],
            kind: ActivationKind::GeluTanh,
            segments: DEFAULT_SEGMENTS,
            bins: 2048,
        }
    }
}

/// Loss curves of one seed. Entry `e` is the full-batch loss before
/// update `e`; the last entry is the loss after the final update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub exact: Vec<f64>,
    pub dapa: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub runs: Vec<SeedRun>,
    pub mean_final_exact: f64,
    pub mean_final_dapa: f64,
}

impl TrainReport {
    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    /// `mean_final_dapa / mean_final_exact`
    pub fn final_ratio(&self) -> f64 {
        self.mean_final_dapa / self.mean_final_exact
    }

    /// Long format: `seed,epoch,exact,dapa`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,epoch,exact,dapa\n");
        for r in &self.runs {
            for (e, (x, d)) in r.exact.iter().zip(&r.dapa).enumerate() {
                let _ = writeln!(out, "{},{e},{x},{d}", r.seed);
            }
        }
        out
    }
}

/// Fits the frozen table for one seed from the initial network's pooled
/// hidden pre-activations.
pub fn initial_table(net: &ToyNet, data: &Dataset, config: &TrainConfig) -> Result<DapaTable> {
    let pre = net.pre_activations(data, &ActivationImpl::Exact(config.kind));
    let samples = SampleSet::new(pre, "initial pre-activations")?;
    let d = EmpiricalDistribution::from_samples(&samples, config.bins, None)?;
    build_dapa(&d, config.kind, config.segments, &FitConfig::default())
}

/// Trains `net` in place for `epochs` full-batch steps.
pub fn train_variant(net: &mut ToyNet, data: &Dataset, act: &ActivationImpl, epochs: usize, lr: f64) -> Result<Vec<f64>> {
    let mut curve = Vec::with_capacity(epochs + 1);
    for epoch in 0..=epochs {
        let loss = if epoch < epochs {
            net.sgd_step(data, act, lr)
        } else {
            net.loss(data, act)
        };
        if !loss.is_finite() || !net.params_finite() {
            return Err(Error::Diverged {
                variant: act.label().to_string(),
                epoch,
            });
        }
        curve.push(loss);
    }
    Ok(curve)
}

/// Runs the exact and table variants from the same initialization for one
/// seed. A supplied table replaces the one fit from initial activations.
pub fn train_pair(config: &TrainConfig, data: &Dataset, seed: u64, table: Option<&DapaTable>) -> Result<SeedRun> {
    let init = ToyNet::new(&config.dims, seed);
    let table = match table {
        Some(t) => t.clone(),
        None => initial_table(&init, data, config)?,
    };
    let mut exact_net = init.clone();
    let exact = train_variant(&mut exact_net, data, &ActivationImpl::Exact(config.kind), config.epochs, config.lr)?;
    let mut dapa_net = init;
    let dapa = train_variant(&mut dapa_net, data, &ActivationImpl::Dapa(table), config.epochs, config.lr)?;
    Ok(SeedRun { seed, exact, dapa })
}

fn validate(config: &TrainConfig, data: &Dataset) -> Result<()> {
    if config.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    if config.dims.len() < 2 || config.dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("invalid layer dims {:?}", config.dims)));
    }
    if config.dims[0] != 2 || *config.dims.last().unwrap() != 2 {
        return Err(Error::InvalidArgument("the toy task needs 2 inputs and 2 outputs".into()));
    }
    if data.inputs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", config.lr)));
    }
    Ok(())
}

/// Twin training over every seed; seeds run in parallel, each run is
/// single-threaded.
pub fn train_demo(config: &TrainConfig, data: &Dataset) -> Result<TrainReport> {
    train_demo_with(config, data, None)
}

pub fn train_demo_with(config: &TrainConfig, data: &Dataset, table: Option<&DapaTable>) -> Result<TrainReport> {
    validate(config, data)?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&s| train_pair(config, data, s, table))
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: &dyn Fn(&SeedRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    let mean_final_exact = mean(&|r| *r.exact.last().unwrap());
    let mean_final_dapa = mean(&|r| *r.dapa.last().unwrap());
    Ok(TrainReport {
        config: config.clone(),
        runs,
        mean_final_exact,
        mean_final_dapa,
    })
}

/// Derivative-table error against the exact derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub range: (f64, f64),
    pub grid: usize,
    pub max_abs_err: f64,
    pub mean_abs_err: f64,
    /// Density-weighted mean; `None` when the distribution has no mass on
    /// the range.
    pub weighted_mean_abs_err: Option<f64>,
}

/// Tabulates `|deriv table - exact derivative|` on a midpoint grid. The
/// reference is the exact derivative, not the slope of the forward table.
pub fn grad_report(t: &DapaTable, d: &EmpiricalDistribution, range: (f64, f64), grid: usize) -> GradReport {
    let (a, b) = range;
    let grid = grid.max(1);
    let h = (b - a) / grid as f64;
    let kind = t.kind();
    let (mut max, mut sum, mut wsum, mut wtot) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..grid {
        let x = a + (i as f64 + 0.5) * h;
        let e = (t.eval_derivative(x) - kind.derivative(x)).abs();
        let w = d.pdf_at(x);
        max = max.max(e);
        sum += e;
        wsum += w * e;
        wtot += w;
    }
    GradReport {
        range,
        grid,
        max_abs_err: max,
        mean_abs_err: sum / grid as f64,
        weighted_mean_abs_err: (wtot > 0.0).then(|| wsum / wtot),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub counts: Vec<usize>,
    pub segments: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub law: SyntheticLaw,
    pub kind: ActivationKind,
    pub range: (f64, f64),
    pub bins: usize,
    pub heldout_count: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            counts: vec![1_000, 10_000, 100_000],
            segments: vec![DEFAULT_SEGMENTS],
            trials: 5,
            seed: 0,
            law: SyntheticLaw::StandardNormal,
            kind: ActivationKind::GeluTanh,
            range: (-4.0, 4.0),
            bins: 2048,
            heldout_count: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub count: usize,
    pub segments: usize,
    pub trials: usize,
    pub mean: f64,
    /// Unbiased sample variance across trials.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("count,segments,trials,mean,variance,min,max\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.count, r.segments, r.trials, r.mean, r.variance, r.min, r.max
            );
        }
        out
    }

    /// `(max - min) / min` of the row means for one segment count.
    pub fn relative_spread(&self, segments: usize) -> Option<f64> {
        let means: Vec<f64> = self.rows.iter().filter(|r| r.segments == segments).map(|r| r.mean).collect();
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (!means.is_empty() && lo > 0.0).then(|| (hi - lo) / lo)
    }
}

fn trial_seed(base: u64, count: usize, segments: usize, trial: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (count as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (segments as u64).wrapping_mul(0x94D0_49BB_1331_11EB)
        ^ trial as u64
}

/// For each (count, N): fit on `count` fresh draws, score DWMSE on a fixed
/// held-out distribution, summarize across trials.
pub fn sample_sensitivity_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.counts.iter().any(|&c| c < 100) {
        return Err(Error::InvalidArgument("sample counts must be >= 100".into()));
    }
    if config.trials < 3 {
        return Err(Error::InvalidArgument(format!("at least 3 trials are required, got {}", config.trials)));
    }
    let clip = Some(config.range);
    let heldout = EmpiricalDistribution::from_samples(
        &config.law.sample_set(config.heldout_count, config.seed ^ 0x5E_ED0F_4E1D),
        config.bins,
        clip,
    )?
    .without_samples();

    let cells: Vec<(usize, usize)> = config
        .segments
        .iter()
        .flat_map(|&n| config.counts.iter().map(move |&c| (c, n)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(count, segments)| {
            let scores = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let s = config.law.sample_set(count, trial_seed(config.seed, count, segments, trial));
                    let d = EmpiricalDistribution::from_samples(&s, config.bins, clip)?;
                    let t = build_dapa(&d, config.kind, segments, &FitConfig::default())?;
                    metrics::table_dwmse(&t, &heldout, config.range)
                })
                .collect::<Result<Vec<f64>>>()?;
            let k = scores.len() as f64;
            let mean = scores.iter().sum::<f64>() / k;
            let variance = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
            Ok(StudyRow {
                count,
                segments,
                trials: config.trials,
                mean,
                variance,
                min: scores.iter().copied().fold(f64::INFINITY, f64::min),
                max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport {
        config: config.clone(),
        rows,
    })
}
