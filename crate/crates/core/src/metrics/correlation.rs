//! Pearson, Spearman and Kendall tau-b correlation with Fisher-z intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numeric::{self, KahanSum};

pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub kendall_tau: f64,
    /// Fisher interval for `pearson_r`; absent when `n_pairs < 4` or
    /// `|r| = 1`.
    pub fisher_ci: Option<(f64, f64)>,
    pub n_pairs: usize,
    pub level: f64,
}

impl CorrelationReport {
    pub fn to_text(&self) -> String {
        let ci = match self.fisher_ci {
            Some((lo, hi)) => format!("[{lo:.4}, {hi:.4}]"),
            None => "n/a".to_string(),
        };
        format!(
            "{:<14} {:>10}\n{:<14} {:>10.6}\n{:<14} {:>10.6}\n{:<14} {:>10.6}\n{:<14} {:>10}\n",
            "pairs",
            self.n_pairs,
            "pearson r",
            self.pearson_r,
            "spearman rho",
            self.spearman_rho,
            "kendall tau-b",
            self.kendall_tau,
            format!("fisher {:.0}%", self.level * 100.0),
            ci
        )
    }
}

fn validate(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput(format!("need at least 2 pairs, got {}", x.len())));
    }
    if let Some((index, &value)) = x.iter().chain(y).enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index: index % x.len(), value });
    }
    Ok(())
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    validate(x, y)?;
    let n = x.len() as f64;
    let mx = numeric::sum(x.iter().copied()) / n;
    let my = numeric::sum(y.iter().copied()) / n;
    let (mut sxx, mut syy, mut sxy) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx.add(dx * dx);
        syy.add(dy * dy);
        sxy.add(dx * dy);
    }
    let (sxx, syy) = (sxx.value(), syy.value());
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sxy.value() / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties replaced by their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank (i+1 + j)/2
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    validate(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        total += t * (t - 1) / 2;
        i = j;
    }
    total
}

/// Merge sort counting inversions (strict `a > b` swaps).
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_counting_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall tau-b by Knight's O(n log n) algorithm.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    validate(x, y)?;
    let n = x.len() as u64;
    let total = n * (n - 1) / 2;

    let mut idx: Vec<usize> = (0..x.len()).collect();
    // numeric order, not total_cmp: -0.0 and 0.0 must fall in one tie group
    let cmp = |a: f64, b: f64| a.partial_cmp(&b).expect("validated finite");
    idx.sort_by(|&a, &b| cmp(x[a], x[b]).then(cmp(y[a], y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let x_ties = tie_pairs(&xs);
    let mut joint_ties = 0u64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[j] == xs[i] && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        joint_ties += t * (t - 1) / 2;
        i = j;
    }

    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let y_ties = tie_pairs(&ys);

    let denom = ((total - x_ties) as f64) * ((total - y_ties) as f64);
    if !(denom > 0.0) {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    let numer = total as i128 - x_ties as i128 - y_ties as i128 + joint_ties as i128 - 2 * swaps as i128;
    Ok((numer as f64 / denom.sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided Fisher-z confidence interval for a correlation coefficient.
pub fn fisher_ci(r: f64, n: usize, level: f64) -> Result<(f64, f64)> {
    if n < 4 {
        return Err(Error::InvalidArgument(format!("fisher interval needs n >= 4, got {n}")));
    }
    if !(r.abs() < 1.0) {
        return Err(Error::DegenerateInput(format!("|r| must be < 1, got {r}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    let z_crit = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let z = r.atanh();
    let half = z_crit / ((n - 3) as f64).sqrt();
    Ok(((z - half).tanh(), (z + half).tanh()))
}

/// All three coefficients plus the Fisher interval at [`DEFAULT_LEVEL`].
pub fn correlations(pairs: &[(f64, f64)]) -> Result<CorrelationReport> {
    correlations_at(pairs, DEFAULT_LEVEL)
}

pub fn correlations_at(pairs: &[(f64, f64)], level: f64) -> Result<CorrelationReport> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let pearson_r = pearson(&x, &y)?;
    let spearman_rho = spearman(&x, &y)?;
    let kendall_tau = kendall_tau_b(&x, &y)?;
    let fisher = if pairs.len() >= 4 && pearson_r.abs() < 1.0 {
        Some(fisher_ci(pearson_r, pairs.len(), level)?)
    } else {
        None
    };
    Ok(CorrelationReport {
        pearson_r,
        spearman_rho,
        kendall_tau,
        fisher_ci: fisher,
        n_pairs: pairs.len(),
        level,
    })
}
