//! Approximation error metrics.
//!
//! `mse` is the plain mean squared error over a uniform midpoint grid.
//! `dwmse` weights the squared error by the empirical density, renormalized
//! to unit mass inside the evaluation range, and integrates with the
//! midpoint rule at histogram-bin resolution:
//!
//! ```text
//! DWMSE = 1/(b-a) * sum_bins  p~(x_mid) * (f(x_mid) - g(x_mid))^2 * dx
//! ```

mod correlation;

pub use correlation::{
    average_ranks, correlations, correlations_at, fisher_ci, kendall_tau_b, pearson, spearman, CorrelationReport,
    DEFAULT_LEVEL,
};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::distribution::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::fitter::DapaTable;
use crate::numeric::KahanSum;

pub const DEFAULT_MSE_GRID: usize = 100_000;

fn check_range(range: (f64, f64)) -> Result<()> {
    if range.0 < range.1 && range.0.is_finite() && range.1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "range requires a < b, got ({}, {})",
            range.0, range.1
        )))
    }
}

/// Mean squared difference over `grid` midpoints of `[a, b]`.
pub fn mse<F, G>(f_ref: F, f_approx: G, range: (f64, f64), grid: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    check_range(range)?;
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid must be >= 2, got {grid}")));
    }
    let (a, b) = range;
    let h = (b - a) / grid as f64;
    let mut acc = KahanSum::new();
    for i in 0..grid {
        let x = a + (i as f64 + 0.5) * h;
        let e = f_ref(x) - f_approx(x);
        acc.add(e * e);
    }
    Ok(acc.value() / grid as f64)
}

/// Evaluation points `(x, weight)` for the distribution-weighted metric:
/// histogram pieces inside `[a, b]` with mass renormalized to one. Also
/// returns the raw in-range mass.
pub fn weighted_points(d: &EmpiricalDistribution, range: (f64, f64)) -> Result<(Vec<(f64, f64)>, f64)> {
    check_range(range)?;
    let (a, b) = range;
    let pieces: Vec<(f64, f64)> = d
        .pieces(a, b)
        .filter(|&(_, _, m)| m > 0.0)
        .map(|(l, r, m)| (0.5 * (l + r), m))
        .collect();
    let in_mass = crate::numeric::sum(pieces.iter().map(|p| p.1));
    if !(in_mass > 0.0) {
        return Err(Error::NoSupportInRange { lo: a, hi: b });
    }
    Ok((pieces.into_iter().map(|(x, m)| (x, m / in_mass)).collect(), in_mass))
}

/// Distribution-weighted mean squared error over `[a, b]`.
pub fn dwmse<F, G>(f_ref: F, f_approx: G, d: &EmpiricalDistribution, range: (f64, f64)) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let (points, _) = weighted_points(d, range)?;
    Ok(dwmse_on_points(&points, range, f_ref, f_approx))
}

pub(crate) fn dwmse_on_points<F, G>(points: &[(f64, f64)], range: (f64, f64), f_ref: F, f_approx: G) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut acc = KahanSum::new();
    for &(x, w) in points {
        let e = f_ref(x) - f_approx(x);
        acc.add(w * e * e);
    }
    acc.value() / (range.1 - range.0)
}

/// Distribution-weighted MSE of a table's forward function.
pub fn table_dwmse(t: &DapaTable, d: &EmpiricalDistribution, range: (f64, f64)) -> Result<f64> {
    let kind = t.kind();
    dwmse(|x| kind.value(x), |x| t.eval(x), d, range)
}

/// Error summary of a fitted table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub mse: f64,
    pub dwmse: f64,
    pub range: (f64, f64),
    pub per_segment_dwmse: Vec<f64>,
    pub eval_grid_size: usize,
    /// Distribution mass inside `range` before renormalization.
    pub in_range_mass: f64,
}

impl ApproxReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} [{}, {}]", "range", self.range.0, self.range.1);
        let _ = writeln!(s, "{:<18} {:.6e}", "mse", self.mse);
        let _ = writeln!(s, "{:<18} {:.6e}", "dwmse", self.dwmse);
        let _ = writeln!(s, "{:<18} {:.6}", "in-range mass", self.in_range_mass);
        let _ = writeln!(s, "{:<18} {}", "mse grid", self.eval_grid_size);
        let _ = writeln!(s, "{:>8}  {:>14}", "segment", "dwmse");
        for (i, v) in self.per_segment_dwmse.iter().enumerate() {
            let _ = writeln!(s, "{i:>8}  {v:>14.6e}");
        }
        s
    }
}

/// MSE, DWMSE and the per-segment DWMSE split of a table's forward function.
/// Each evaluation piece is charged to the segment holding its midpoint.
pub fn approx_report(t: &DapaTable, d: &EmpiricalDistribution, range: (f64, f64), grid: usize) -> Result<ApproxReport> {
    let kind = t.kind();
    let mse = mse(|x| kind.value(x), |x| t.eval(x), range, grid)?;
    let (points, in_range_mass) = weighted_points(d, range)?;
    let width = range.1 - range.0;
    let mut per_segment = vec![KahanSum::new(); t.segments()];
    let mut total = KahanSum::new();
    for &(x, w) in &points {
        let e = kind.value(x) - t.eval(x);
        let term = w * e * e / width;
        per_segment[t.segment_of(x)].add(term);
        total.add(term);
    }
    Ok(ApproxReport {
        mse,
        dwmse: total.value(),
        range,
        per_segment_dwmse: per_segment.iter().map(KahanSum::value).collect(),
        eval_grid_size: grid,
        in_range_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::SampleSet;
    use crate::fitter::{build_dapa, FitConfig};
    use crate::reference::ActivationKind;
    use crate::synth;

    fn gelu(x: f64) -> f64 {
        ActivationKind::GeluTanh.value(x)
    }

    #[test]
    fn mse_basic_identities() {
        assert_eq!(mse(gelu, gelu, (-4.0, 4.0), 1000).unwrap(), 0.0);
        let m = mse(gelu, |x| gelu(x) + 0.1, (-4.0, 4.0), 1000).unwrap();
        assert!((m - 0.01).abs() < 1e-12);
        assert!(mse(gelu, gelu, (1.0, 1.0), 10).is_err());
        assert!(mse(gelu, gelu, (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn dwmse_constant_offset() {
        let d = synth::standard_normal_distribution(20_000, 512, Some((-4.0, 4.0)), 2);
        let eps = 0.03;
        for range in [(-4.0, 4.0), (-1.0, 2.0), (-10.0, 10.0)] {
            let v = dwmse(gelu, |x| gelu(x) + eps, &d, range).unwrap();
            let want = eps * eps / (range.1 - range.0);
            assert!((v - want).abs() < 1e-9, "{range:?}: {v} vs {want}");
        }
        assert_eq!(dwmse(gelu, gelu, &d, (-4.0, 4.0)).unwrap(), 0.0);
    }

    #[test]
    fn dwmse_without_support_errors() {
        let s = SampleSet::new(vec![0.0, 0.5, 1.0], "x").unwrap();
        let d = EmpiricalDistribution::from_samples(&s, 4, None).unwrap();
        let err = dwmse(gelu, gelu, &d, (5.0, 6.0)).unwrap_err();
        assert!(err.to_string().contains("no support in range"));
    }

    #[test]
    fn dwmse_is_scale_free_in_raw_mass() {
        let d = synth::standard_normal_distribution(20_000, 256, Some((-4.0, 4.0)), 6);
        let scaled: Vec<f64> = d.bin_mass().iter().map(|m| m * 7.0).collect();
        let d7 = EmpiricalDistribution::from_bin_weights(d.bin_edges().to_vec(), &scaled, d.sample_count()).unwrap();
        let approx = |x: f64| 0.9 * x;
        let a = dwmse(gelu, approx, &d, (-3.0, 3.0)).unwrap();
        let b = dwmse(gelu, approx, &d7, (-3.0, 3.0)).unwrap();
        assert!((a - b).abs() < 1e-12 * a.max(1.0));
    }

    #[test]
    fn metrics_are_symmetric() {
        let d = synth::standard_normal_distribution(5_000, 128, None, 8);
        let g = |x: f64| x.sin();
        let r = (-2.0, 2.0);
        assert_eq!(dwmse(gelu, g, &d, r).unwrap(), dwmse(g, gelu, &d, r).unwrap());
        assert_eq!(mse(gelu, g, r, 500).unwrap(), mse(g, gelu, r, 500).unwrap());
    }

    #[test]
    fn report_segments_tile_total() {
        let d = synth::standard_normal_distribution(50_000, 1024, Some((-4.0, 4.0)), 4);
        let t = build_dapa(&d, ActivationKind::GeluTanh, 16, &FitConfig::default()).unwrap();
        let r = approx_report(&t, &d, (-4.0, 4.0), 10_000).unwrap();
        let sum: f64 = crate::numeric::sum(r.per_segment_dwmse.iter().copied());
        assert!((sum - r.dwmse).abs() < 1e-9);
        assert!((r.dwmse - table_dwmse(&t, &d, (-4.0, 4.0)).unwrap()).abs() < 1e-15);
        assert!(r.to_text().contains("dwmse"));
    }
}
