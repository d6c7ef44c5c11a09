//! Empirical distributions of pre-activation values.
//!
//! A distribution is an equal-width histogram normalized to unit mass. The
//! CDF is piecewise linear (linear inside each bin), so quantiles are unique
//! and continuous. When the number of collected samples is below a cap the
//! sorted samples are kept as well, and knot placement uses them directly.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numeric;

pub const DEFAULT_BINS: usize = 2048;
pub const DEFAULT_RETAIN_CAP: usize = 1_000_000;

/// Collected pre-activation values. Always non-empty and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    source_tag: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, source_tag: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self {
            values,
            source_tag: source_tag.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Appends another set, keeping this set's tag.
    pub fn extend(&mut self, other: &SampleSet) {
        self.values.extend_from_slice(&other.values);
    }
}

/// Reads one decimal float per line. Blank lines and lines starting with
/// `#` are skipped.
pub fn parse_text_samples(text: &str, source_tag: &str) -> Result<SampleSet> {
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: cannot parse {line:?} as a float", lineno + 1)))?;
        values.push(v);
    }
    SampleSet::new(values, source_tag)
}

/// Decodes raw little-endian IEEE-754 binary32 values with no header.
pub fn parse_f32le_samples(bytes: &[u8], source_tag: &str) -> Result<SampleSet> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::Parse(format!(
            "raw f32 input length {} is not a multiple of 4",
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    SampleSet::new(values, source_tag)
}

pub fn encode_f32le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

/// Reads a sample file. `.f32`, `.bin` and `.raw` are raw little-endian
/// binary32; everything else is text.
pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let tag = path.display().to_string();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::Io(format!("{tag}: {e}")))?;
    let raw = matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("f32" | "bin" | "raw")
    );
    if raw {
        parse_f32le_samples(&bytes, &tag)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(format!("{tag}: {e}")))?;
        parse_text_samples(&text, &tag)
    }
}

#[derive(Serialize, Deserialize)]
struct DistributionWire {
    bin_edges: Vec<f64>,
    bin_mass: Vec<f64>,
    sample_count: u64,
    range: [f64; 2],
}

/// Histogram density estimate with exact CDF and quantile queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionWire", into = "DistributionWire")]
pub struct EmpiricalDistribution {
    bin_edges: Vec<f64>,
    bin_mass: Vec<f64>,
    sample_count: u64,
    sorted_samples: Option<Vec<f64>>,
    cumulative: Vec<f64>,
}

impl TryFrom<DistributionWire> for EmpiricalDistribution {
    type Error = Error;

    fn try_from(w: DistributionWire) -> Result<Self> {
        if w.bin_edges.first() != Some(&w.range[0]) || w.bin_edges.last() != Some(&w.range[1]) {
            return Err(Error::Parse("range does not match the outer bin edges".into()));
        }
        let total = numeric::sum(w.bin_mass.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parse(format!("bin mass sums to {total}, expected 1")));
        }
        Self::from_parts(w.bin_edges, w.bin_mass, w.sample_count, None)
    }
}

impl From<EmpiricalDistribution> for DistributionWire {
    fn from(d: EmpiricalDistribution) -> Self {
        let range = [d.lo(), d.hi()];
        DistributionWire {
            bin_edges: d.bin_edges,
            bin_mass: d.bin_mass,
            sample_count: d.sample_count,
            range,
        }
    }
}

fn equal_width_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let width = hi - lo;
    let mut edges: Vec<f64> = (0..=bins)
        .map(|i| lo + width * (i as f64 / bins as f64))
        .collect();
    edges[bins] = hi;
    edges
}

/// Index of the half-open bin `[e_i, e_{i+1})` holding `x`; `x == hi` maps
/// to the last bin. Caller guarantees `lo <= x <= hi`.
fn locate_bin(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    let lo = edges[0];
    let hi = edges[bins];
    let guess = (((x - lo) / (hi - lo)) * bins as f64).floor();
    let mut i = if guess.is_nan() || guess < 0.0 {
        0
    } else {
        (guess as usize).min(bins - 1)
    };
    while i > 0 && x < edges[i] {
        i -= 1;
    }
    while i + 1 < bins && x >= edges[i + 1] {
        i += 1;
    }
    i
}

impl EmpiricalDistribution {
    /// Builds an equal-width histogram with the default retention cap.
    pub fn from_samples(samples: &SampleSet, bins: usize, clip: Option<(f64, f64)>) -> Result<Self> {
        Self::from_samples_with_cap(samples, bins, clip, DEFAULT_RETAIN_CAP)
    }

    /// Builds an equal-width histogram. Samples outside `clip` are clamped to
    /// the clip boundary and still counted. Without a clip the range is the
    /// observed min/max, widened by 0.5 on each side for a point mass.
    pub fn from_samples_with_cap(
        samples: &SampleSet,
        bins: usize,
        clip: Option<(f64, f64)>,
        retain_cap: usize,
    ) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("bins must be >= 2, got {bins}")));
        }
        let values = samples.values();
        let mut clamped: Vec<f64> = match clip {
            Some((lo, hi)) => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidArgument(format!("clip requires lo < hi, got ({lo}, {hi})")));
                }
                values.iter().map(|&v| v.clamp(lo, hi)).collect()
            }
            None => values.to_vec(),
        };
        clamped.sort_by(f64::total_cmp);
        let (mut lo, mut hi) = (clamped[0], clamped[clamped.len() - 1]);
        if let Some((clo, chi)) = clip {
            lo = lo.min(clo);
            hi = hi.max(chi);
        }
        if lo == hi {
            lo -= 0.5;
            hi += 0.5;
        }
        let edges = equal_width_edges(lo, hi, bins);
        let mut counts = vec![0u64; bins];
        for &v in &clamped {
            counts[locate_bin(&edges, v)] += 1;
        }
        let n = clamped.len() as f64;
        let mass = counts.iter().map(|&c| c as f64 / n).collect();
        let retained = (clamped.len() <= retain_cap).then_some(clamped);
        Self::from_parts(edges, mass, values.len() as u64, retained)
    }

    /// Builds a distribution from explicit edges and nonnegative bin weights;
    /// weights are normalized to unit mass.
    pub fn from_bin_weights(bin_edges: Vec<f64>, weights: &[f64], sample_count: u64) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("bin weights must be finite and nonnegative".into()));
        }
        let total = numeric::sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("bin weights sum to zero".into()));
        }
        let mass = weights.iter().map(|w| w / total).collect();
        Self::from_parts(bin_edges, mass, sample_count, None)
    }

    fn from_parts(
        bin_edges: Vec<f64>,
        bin_mass: Vec<f64>,
        sample_count: u64,
        sorted_samples: Option<Vec<f64>>,
    ) -> Result<Self> {
        if bin_mass.is_empty() || bin_edges.len() != bin_mass.len() + 1 {
            return Err(Error::InvalidArgument(format!(
                "need B+1 edges for B bins, got {} edges and {} bins",
                bin_edges.len(),
                bin_mass.len()
            )));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("bin edges must be finite and strictly increasing".into()));
        }
        if bin_mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidArgument("bin mass must be finite and nonnegative".into()));
        }
        if sample_count < 1 {
            return Err(Error::InvalidArgument("sample_count must be >= 1".into()));
        }
        let mut cumulative = Vec::with_capacity(bin_mass.len() + 1);
        let mut acc = numeric::KahanSum::new();
        cumulative.push(0.0);
        for &m in &bin_mass {
            acc.add(m);
            cumulative.push(acc.value());
        }
        Ok(Self {
            bin_edges,
            bin_mass,
            sample_count,
            sorted_samples,
            cumulative,
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn bin_mass(&self) -> &[f64] {
        &self.bin_mass
    }

    pub fn bins(&self) -> usize {
        self.bin_mass.len()
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn lo(&self) -> f64 {
        self.bin_edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.bin_edges[self.bins()]
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo(), self.hi())
    }

    /// Sorted (clamped) samples, present when the sample count was within
    /// the retention cap.
    pub fn retained_samples(&self) -> Option<&[f64]> {
        self.sorted_samples.as_deref()
    }

    /// Returns a copy without retained samples, forcing bin-based fitting.
    pub fn without_samples(&self) -> Self {
        Self {
            sorted_samples: None,
            ..self.clone()
        }
    }

    /// Hex digest over edges, mass and sample count.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.bins() as u64).to_le_bytes());
        for e in &self.bin_edges {
            h.update(e.to_le_bytes());
        }
        for m in &self.bin_mass {
            h.update(m.to_le_bytes());
        }
        h.update(self.sample_count.to_le_bytes());
        hex::encode(&h.finalize()[..16])
    }

    fn bin_of(&self, x: f64) -> Option<usize> {
        (x >= self.lo() && x <= self.hi()).then(|| locate_bin(&self.bin_edges, x))
    }

    /// Density at `x`: bin mass over bin width, zero outside the support.
    pub fn pdf_at(&self, x: f64) -> f64 {
        match self.bin_of(x) {
            Some(i) => self.bin_mass[i] / (self.bin_edges[i + 1] - self.bin_edges[i]),
            None => 0.0,
        }
    }

    /// Piecewise-linear CDF. Exactly 0 at or below `lo`, exactly 1 at or
    /// above `hi`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= self.lo() {
            return 0.0;
        }
        if x >= self.hi() {
            return 1.0;
        }
        let i = locate_bin(&self.bin_edges, x);
        let (e0, e1) = (self.bin_edges[i], self.bin_edges[i + 1]);
        let frac = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
        (self.cumulative[i] + frac * self.bin_mass[i]).min(1.0)
    }

    /// Smallest `x` with `cdf_at(x) >= q`. `quantile(0) = lo`,
    /// `quantile(1) = hi`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
        }
        if q == 0.0 {
            return Ok(self.lo());
        }
        if q == 1.0 {
            return Ok(self.hi());
        }
        // first bin whose upper cumulative reaches q; its own mass is then > 0
        let i = self.cumulative[1..].partition_point(|&c| c < q);
        if i >= self.bins() {
            return Ok(self.hi());
        }
        let (e0, e1) = (self.bin_edges[i], self.bin_edges[i + 1]);
        let frac = ((q - self.cumulative[i]) / self.bin_mass[i]).clamp(0.0, 1.0);
        Ok((e0 + frac * (e1 - e0)).min(e1))
    }

    /// Quantile taken from the retained order statistics when available:
    /// the midpoint between the two samples that straddle rank `q * m`.
    /// Falls back to the histogram quantile otherwise.
    pub fn sample_quantile(&self, q: f64) -> Result<f64> {
        let Some(s) = self.retained_samples() else {
            return self.quantile(q);
        };
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("quantile level {q} outside [0, 1]")));
        }
        if q == 0.0 || q == 1.0 || s.len() < 2 {
            return self.quantile(q);
        }
        let rank = ((q * s.len() as f64).round() as usize).clamp(1, s.len() - 1);
        Ok(0.5 * (s[rank - 1] + s[rank]))
    }

    /// Histogram pieces overlapping `[a, b]`: `(left, right, mass)` where
    /// the mass is the bin mass scaled by the overlap fraction.
    pub fn pieces(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let first = if a <= self.lo() { 0 } else if a >= self.hi() { self.bins() } else { locate_bin(&self.bin_edges, a) };
        (first..self.bins()).map_while(move |i| {
            let (e0, e1) = (self.bin_edges[i], self.bin_edges[i + 1]);
            if e0 >= b {
                return None;
            }
            let left = e0.max(a);
            let right = e1.min(b);
            let mass = if left == e0 && right == e1 {
                self.bin_mass[i]
            } else {
                self.bin_mass[i] * ((right - left) / (e1 - e0)).max(0.0)
            };
            Some((left, right, mass))
        })
        .filter(|&(l, r, _)| r > l)
    }

    /// Probability mass inside `[a, b]`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        numeric::sum(self.pieces(a, b).map(|(_, _, m)| m))
    }

    /// Merges two distributions as if built from the concatenated samples.
    ///
    /// When both sides retained their samples the merged histogram is
    /// rebuilt from them over the union range. Otherwise each source bin's
    /// mass is spread over the union bins in proportion to overlap, weighted
    /// by sample count.
    pub fn merge(a: &Self, b: &Self) -> Result<Self> {
        let lo = a.lo().min(b.lo());
        let hi = a.hi().max(b.hi());
        let bins = a.bins().max(b.bins());
        let count = a.sample_count + b.sample_count;
        if let (Some(sa), Some(sb)) = (a.retained_samples(), b.retained_samples()) {
            let mut all = Vec::with_capacity(sa.len() + sb.len());
            all.extend_from_slice(sa);
            all.extend_from_slice(sb);
            let set = SampleSet::new(all, "merged")?;
            let mut merged = Self::from_samples_with_cap(&set, bins, Some((lo, hi)), DEFAULT_RETAIN_CAP)?;
            merged.sample_count = count;
            return Ok(merged);
        }
        let edges = if a.range() == (lo, hi) && a.bins() == bins {
            a.bin_edges.clone()
        } else if b.range() == (lo, hi) && b.bins() == bins {
            b.bin_edges.clone()
        } else {
            equal_width_edges(lo, hi, bins)
        };
        let wa = a.sample_count as f64 / count as f64;
        let wb = b.sample_count as f64 / count as f64;
        let mut weights = vec![0.0; bins];
        for (src, w) in [(a, wa), (b, wb)] {
            for i in 0..src.bins() {
                let (s0, s1) = (src.bin_edges[i], src.bin_edges[i + 1]);
                let m = src.bin_mass[i] * w;
                if m == 0.0 {
                    continue;
                }
                let mut j = locate_bin(&edges, s0);
                while j < bins && edges[j] < s1 {
                    let overlap = s1.min(edges[j + 1]) - s0.max(edges[j]);
                    if overlap > 0.0 {
                        weights[j] += m * (overlap / (s1 - s0));
                    }
                    j += 1;
                }
            }
        }
        Self::from_bin_weights(edges, &weights, count)
    }
}
