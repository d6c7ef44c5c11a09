//! Equal-mass knot placement and per-segment weighted least squares.
//!
//! Each table has `N` segments bounded by `N + 1` knots. Interior knots sit
//! at the `n / N` quantiles of the distribution; the outer knots are the
//! distribution range. Every segment gets two independent lines: one fitted
//! to the activation and one fitted to its exact derivative, both over the
//! same knots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::numeric::{self, KahanSum};
use crate::reference::ActivationKind;

pub const DEFAULT_SEGMENTS: usize = 16;

/// Normal matrices with a condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// How sample points inside a segment are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Distribution weighting. Retained samples get unit weight (they were
    /// drawn from the density already); bin midpoints get their bin mass.
    #[default]
    Distribution,
    /// Unweighted baseline: a uniform grid over each segment with unit
    /// weights, i.e. the plain-MSE fit on the same knots.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub weighting: Weighting,
    /// Grid points per segment for [`Weighting::Uniform`].
    pub uniform_points: usize,
    pub parallel: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            weighting: Weighting::Distribution,
            uniform_points: 256,
            parallel: true,
        }
    }
}

impl FitConfig {
    pub fn uniform() -> Self {
        Self {
            weighting: Weighting::Uniform,
            ..Self::default()
        }
    }
}

/// Knots `k_0 .. k_N` for `segments` equal-mass segments.
///
/// Interior knots come from the retained order statistics when the
/// distribution kept its samples, otherwise from the histogram quantile.
pub fn compute_knots(d: &EmpiricalDistribution, segments: usize) -> Result<Vec<f64>> {
    if segments < 2 || !numeric::is_power_of_two(segments) {
        return Err(Error::InvalidArgument(format!(
            "segment count must be a power of two >= 2, got {segments}"
        )));
    }
    let mut knots = Vec::with_capacity(segments + 1);
    knots.push(d.quantile(0.0)?);
    for n in 1..segments {
        knots.push(d.sample_quantile(n as f64 / segments as f64)?);
    }
    knots.push(d.quantile(1.0)?);
    check_strictly_increasing(&knots)?;
    Ok(knots)
}

fn check_strictly_increasing(knots: &[f64]) -> Result<()> {
    match knots.windows(2).position(|w| !(w[0] < w[1])) {
        Some(i) => Err(Error::DegenerateQuantiles {
            lower: i,
            upper: i + 1,
            value: knots[i + 1],
        }),
        None => Ok(()),
    }
}

/// Solves `min sum w_i (f(x_i) - (a x_i + b))^2` with `f` the exact
/// function or its derivative.
pub fn fit_segment_wls(kind: ActivationKind, xs: &[f64], ws: &[f64], derivative: bool) -> Result<(f64, f64)> {
    let f = |x: f64| if derivative { kind.derivative(x) } else { kind.value(x) };
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    solve_weighted_line(xs, &ys, ws)
}

/// Weighted straight-line fit through centered 2x2 normal equations.
pub fn solve_weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ws.len() || xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} abscissae, {} ordinates, {} weights",
            xs.len(),
            ys.len(),
            ws.len()
        )));
    }
    if let Some((index, &value)) = xs.iter().chain(ys).enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index: index % xs.len().max(1), value });
    }
    if ws.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and positive".into()));
    }
    let distinct = match xs.first() {
        None => 0,
        Some(&x0) if xs.iter().all(|&x| x == x0) => 1,
        Some(_) => 2,
    };
    if distinct < 2 {
        return Err(Error::UnderdeterminedSegment { distinct });
    }

    let total: f64 = numeric::sum(ws.iter().copied());
    let x_mean = numeric::sum(xs.iter().zip(ws).map(|(x, w)| w * x)) / total;
    let y_mean = numeric::sum(ys.iter().zip(ws).map(|(y, w)| w * y)) / total;
    let mut sxx = KahanSum::new();
    let mut sxy = KahanSum::new();
    for ((&x, &y), &w) in xs.iter().zip(ys).zip(ws) {
        let dx = x - x_mean;
        sxx.add(w * dx * dx);
        sxy.add(w * dx * (y - y_mean));
    }
    let (sxx, sxy) = (sxx.value(), sxy.value());

    // eigenvalues of [[sum w x^2, sum w x], [sum w x, sum w]]; det = W * Sxx
    let p = sxx + total * x_mean * x_mean;
    let q = total * x_mean;
    let r = total;
    let lambda_max = 0.5 * ((p + r) + ((p - r) * (p - r) + 4.0 * q * q).sqrt());
    let det = total * sxx;
    let condition = if det > 0.0 { lambda_max * lambda_max / det } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedSegment { condition });
    }

    let a = sxy / sxx;
    let b = y_mean - a * x_mean;
    Ok((a, b))
}

/// Points and weights used to fit one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPoints {
    pub xs: Vec<f64>,
    pub ws: Vec<f64>,
    /// Probability mass of the segment under the distribution.
    pub mass: f64,
}

/// Collects the fitting points of segment `index` of `knots`.
pub fn segment_points(
    d: &EmpiricalDistribution,
    knots: &[f64],
    index: usize,
    config: &FitConfig,
) -> SegmentPoints {
    let (lo, hi) = (knots[index], knots[index + 1]);
    let bin_mass = || d.mass_in(lo, hi);
    match (config.weighting, d.retained_samples()) {
        (Weighting::Uniform, _) => {
            let m = config.uniform_points.max(2);
            let step = (hi - lo) / m as f64;
            let xs = (0..m).map(|i| lo + (i as f64 + 0.5) * step).collect();
            let mass = d.retained_samples().map_or_else(bin_mass, |s| {
                let (start, end) = sample_span(s, knots, index);
                (end - start) as f64 / s.len() as f64
            });
            SegmentPoints { xs, ws: vec![1.0; m], mass }
        }
        (Weighting::Distribution, Some(s)) => {
            let (start, end) = sample_span(s, knots, index);
            let xs = s[start..end].to_vec();
            let ws = vec![1.0; xs.len()];
            SegmentPoints {
                xs,
                ws,
                mass: (end - start) as f64 / s.len() as f64,
            }
        }
        (Weighting::Distribution, None) => {
            let (xs, ws) = d
                .pieces(lo, hi)
                .filter(|&(_, _, m)| m > 0.0)
                .map(|(l, r, m)| (0.5 * (l + r), m))
                .unzip();
            SegmentPoints { xs, ws, mass: bin_mass() }
        }
    }
}

/// Index range of the sorted samples in `[k_n, k_{n+1})`; the last segment
/// also takes samples equal to `k_N`.
fn sample_span(sorted: &[f64], knots: &[f64], index: usize) -> (usize, usize) {
    let segments = knots.len() - 1;
    let start = if index == 0 { 0 } else { sorted.partition_point(|&v| v < knots[index]) };
    let end = if index + 1 == segments {
        sorted.len()
    } else {
        sorted.partition_point(|&v| v < knots[index + 1])
    };
    (start, end.max(start))
}

fn tangent_line(kind: ActivationKind, x: f64, derivative: bool) -> (f64, f64) {
    // slope of f' is f''; approximate it with a central difference
    if derivative {
        let h = 1e-5 * x.abs().max(1.0);
        let a = (kind.derivative(x + h) - kind.derivative(x - h)) / (2.0 * h);
        (a, kind.derivative(x) - a * x)
    } else {
        let a = kind.derivative(x);
        (a, kind.value(x) - a * x)
    }
}

fn fit_or_tangent(kind: ActivationKind, pts: &SegmentPoints, lo: f64, hi: f64, derivative: bool) -> Result<(f64, f64)> {
    match fit_segment_wls(kind, &pts.xs, &pts.ws, derivative) {
        Err(Error::UnderdeterminedSegment { .. }) => {
            let x = pts.xs.first().copied().unwrap_or(0.5 * (lo + hi));
            Ok(tangent_line(kind, x, derivative))
        }
        other => other,
    }
}

/// A fitted N-segment piecewise-linear approximation and its derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "wire::TableWire", into = "wire::TableWire")]
pub struct DapaTable {
    kind: ActivationKind,
    knots: Vec<f64>,
    fwd: Vec<(f64, f64)>,
    deriv: Vec<(f64, f64)>,
    segment_mass: Vec<f64>,
    dist_fingerprint: String,
}

impl DapaTable {
    /// Assembles a table from parts, checking the structural invariants.
    pub fn from_parts(
        kind: ActivationKind,
        knots: Vec<f64>,
        fwd: Vec<(f64, f64)>,
        deriv: Vec<(f64, f64)>,
        segment_mass: Vec<f64>,
        dist_fingerprint: String,
    ) -> Result<Self> {
        let segments = knots.len().saturating_sub(1);
        if segments < 2 || !numeric::is_power_of_two(segments) {
            return Err(Error::InvalidArgument(format!(
                "segment count must be a power of two >= 2, got {segments}"
            )));
        }
        if fwd.len() != segments || deriv.len() != segments || segment_mass.len() != segments {
            return Err(Error::InvalidArgument(format!(
                "expected {segments} coefficient pairs and masses, got {}/{}/{}",
                fwd.len(),
                deriv.len(),
                segment_mass.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidArgument("knots must be finite".into()));
        }
        check_strictly_increasing(&knots)?;
        if fwd.iter().chain(&deriv).any(|(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        Ok(Self {
            kind,
            knots,
            fwd,
            deriv,
            segment_mass,
            dist_fingerprint,
        })
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn fwd(&self) -> &[(f64, f64)] {
        &self.fwd
    }

    pub fn deriv(&self) -> &[(f64, f64)] {
        &self.deriv
    }

    pub fn segment_mass(&self) -> &[f64] {
        &self.segment_mass
    }

    pub fn dist_fingerprint(&self) -> &str {
        &self.dist_fingerprint
    }

    pub fn segments(&self) -> usize {
        self.fwd.len()
    }

    /// Segment `n` with `k_n <= x < k_{n+1}`; below `k_0` is segment 0 and
    /// at or above `k_N` is segment `N - 1`.
    #[inline]
    pub fn segment_of(&self, x: f64) -> usize {
        let interior = &self.knots[1..self.knots.len() - 1];
        interior.partition_point(|&k| k <= x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.fwd[self.segment_of(x)];
        a * x + b
    }

    /// Derivative table value; approximates the exact derivative, not the
    /// slope of the forward table.
    #[inline]
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let (a, b) = self.deriv[self.segment_of(x)];
        a * x + b
    }

    /// Replaces one segment's forward line; used for perturbation checks.
    pub fn with_fwd_line(&self, index: usize, line: (f64, f64)) -> Self {
        let mut t = self.clone();
        t.fwd[index] = line;
        t
    }
}

pub fn eval_piecewise(t: &DapaTable, x: f64, derivative: bool) -> f64 {
    if derivative {
        t.eval_derivative(x)
    } else {
        t.eval(x)
    }
}

/// Places equal-mass knots and fits every segment.
pub fn build_dapa(
    d: &EmpiricalDistribution,
    kind: ActivationKind,
    segments: usize,
    config: &FitConfig,
) -> Result<DapaTable> {
    let knots = compute_knots(d, segments)?;
    build_with_knots(d, kind, knots, config)
}

/// Fits every segment over caller-supplied knots.
pub fn build_with_knots(
    d: &EmpiricalDistribution,
    kind: ActivationKind,
    knots: Vec<f64>,
    config: &FitConfig,
) -> Result<DapaTable> {
    check_strictly_increasing(&knots)?;
    let segments = knots.len() - 1;
    let fit_one = |n: usize| -> Result<((f64, f64), (f64, f64), f64)> {
        let pts = segment_points(d, &knots, n, config);
        let (lo, hi) = (knots[n], knots[n + 1]);
        let fwd = fit_or_tangent(kind, &pts, lo, hi, false).map_err(|e| e.in_segment(n))?;
        let deriv = fit_or_tangent(kind, &pts, lo, hi, true).map_err(|e| e.in_segment(n))?;
        Ok((fwd, deriv, pts.mass))
    };
    let fitted: Vec<_> = if config.parallel {
        (0..segments).into_par_iter().map(fit_one).collect::<Result<_>>()?
    } else {
        (0..segments).map(fit_one).collect::<Result<_>>()?
    };
    let mut fwd = Vec::with_capacity(segments);
    let mut deriv = Vec::with_capacity(segments);
    let mut mass = Vec::with_capacity(segments);
    for (f, dv, m) in fitted {
        fwd.push(f);
        deriv.push(dv);
        mass.push(m);
    }
    DapaTable::from_parts(kind, knots, fwd, deriv, mass, d.fingerprint())
}

mod wire {
    use super::*;

    fn num(x: f64) -> String {
        format!("{x}")
    }

    fn parse(s: &str) -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Parse(format!("cannot parse {s:?} as a float")))
    }

    fn pairs(v: &[[String; 2]]) -> Result<Vec<(f64, f64)>> {
        v.iter().map(|[a, b]| Ok((parse(a)?, parse(b)?))).collect()
    }

    /// Floats are carried as shortest round-trip decimal strings.
    #[derive(Serialize, Deserialize)]
    pub struct TableWire {
        kind: ActivationKind,
        knots: Vec<String>,
        fwd: Vec<[String; 2]>,
        deriv: Vec<[String; 2]>,
        segment_mass: Vec<String>,
        dist_fingerprint: String,
    }

    impl From<DapaTable> for TableWire {
        fn from(t: DapaTable) -> Self {
            let pairs = |v: &[(f64, f64)]| v.iter().map(|&(a, b)| [num(a), num(b)]).collect();
            TableWire {
                kind: t.kind,
                knots: t.knots.iter().copied().map(num).collect(),
                fwd: pairs(&t.fwd),
                deriv: pairs(&t.deriv),
                segment_mass: t.segment_mass.iter().copied().map(num).collect(),
                dist_fingerprint: t.dist_fingerprint,
            }
        }
    }

    impl TryFrom<TableWire> for DapaTable {
        type Error = Error;

        fn try_from(w: TableWire) -> Result<Self> {
            DapaTable::from_parts(
                w.kind,
                w.knots.iter().map(|s| parse(s)).collect::<Result<_>>()?,
                pairs(&w.fwd)?,
                pairs(&w.deriv)?,
                w.segment_mass.iter().map(|s| parse(s)).collect::<Result<_>>()?,
                w.dist_fingerprint,
            )
        }
    }
}
