//! I/O format search under a distribution-weighted error budget.
//!
//! The integer width comes from the input range, `m = ceil(log2(max(|a|,|b|))) + 1`
//! with the `+1` as the sign bit. Fractional bits start at zero and grow
//! while the deployed pipeline's DWMSE exceeds `theta` times the float
//! table's DWMSE and the total stays under the bit budget.

use serde::{Deserialize, Serialize};

use super::{eval_fixed, quantize_table, FixedPointFormat};
use crate::distribution::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::fitter::DapaTable;
use crate::metrics;

pub const DEFAULT_THETA: f64 = 1.05;

/// Outcome of the format search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatSelection {
    pub format: FixedPointFormat,
    pub threshold_met: bool,
    pub theta: f64,
    pub threshold: f64,
    pub fp_dwmse: f64,
    pub quantized_dwmse: f64,
    /// `(frac_bits, dwmse)` for every candidate evaluated, in order.
    pub sweep: Vec<(u32, f64)>,
}

/// `ceil(log2(max(|a|, |b|))) + 1`, at least 1.
pub fn integer_bits_for_range(range: (f64, f64)) -> i32 {
    let max_abs = range.0.abs().max(range.1.abs());
    if !(max_abs > 0.0) {
        return 1;
    }
    (max_abs.log2().ceil() as i32 + 1).max(1)
}

/// DWMSE of the fully quantized pipeline (input encode, fixed-point
/// segment select and MAC, decode) against the exact function. A format
/// whose knots collapse scores `+inf`.
pub fn quantized_dwmse(t: &DapaTable, d: &EmpiricalDistribution, range: (f64, f64), io: FixedPointFormat) -> Result<f64> {
    let q = match quantize_table(t, io) {
        Ok(q) => q,
        Err(Error::KnotsCollapse { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let kind = t.kind();
    metrics::dwmse(
        |x| kind.value(x),
        |x| io.decode(eval_fixed(&q, io.encode_code(x))),
        d,
        range,
    )
}

pub fn select_format(
    t: &DapaTable,
    d: &EmpiricalDistribution,
    range: (f64, f64),
    theta: f64,
    bit_max: u32,
) -> Result<FormatSelection> {
    if !(theta >= 1.0) {
        return Err(Error::InvalidArgument(format!("theta must be >= 1, got {theta}")));
    }
    if !(1..=super::BIT_MAX).contains(&bit_max) {
        return Err(Error::InvalidArgument(format!("bit_max must lie in 1..=16, got {bit_max}")));
    }
    if !(range.0 < range.1) {
        return Err(Error::InvalidArgument(format!(
            "range requires a < b, got ({}, {})",
            range.0, range.1
        )));
    }
    let fp_dwmse = metrics::table_dwmse(t, d, range)?;
    let threshold = theta * fp_dwmse;
    let m = integer_bits_for_range(range);
    if m >= bit_max as i32 {
        return Err(Error::IntegerBitsExceedBudget { int_bits: m, bit_max });
    }
    let m = m as u32;
    let mut n = 0;
    let mut sweep = Vec::new();
    loop {
        let fmt = FixedPointFormat::new(m, n)?;
        let err = quantized_dwmse(t, d, range, fmt)?;
        sweep.push((n, err));
        if err <= threshold || m + n >= bit_max {
            return Ok(FormatSelection {
                format: fmt,
                threshold_met: err <= threshold,
                theta,
                threshold,
                fp_dwmse,
                quantized_dwmse: err,
                sweep,
            });
        }
        n += 1;
    }
}
