//! Behavioral model of the lookup pipeline.
//!
//! ```text
//!  x ──► [cmp stage 1] ─► [cmp stage 2] ─► … ─► [cmp stage log2 N] ─► LUT (a_n, b_n) ─► [MAC] ─► y
//! ```
//!
//! The comparator tree is a balanced binary search over the interior knot
//! codes; each stage emits one bit of the segment index, MSB first. The MAC
//! stage forms the exact product-plus-offset as a rational number and rounds
//! it to the I/O format. The softmax unit composes max-shift, table lookup,
//! a 32-bit accumulator and a rounding divider.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::quantizer::{eval_fixed, FixedPointFormat, QuantizedTable};

/// Comparator stages plus one MAC stage.
pub fn pipeline_depth(segments: usize) -> Result<u32> {
    if segments < 2 || !numeric::is_power_of_two(segments) {
        return Err(Error::InvalidArgument(format!(
            "segment count must be a power of two >= 2, got {segments}"
        )));
    }
    Ok(segments.trailing_zeros() + 1)
}

/// Stage-by-stage record of one lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineTrace {
    pub input_code: i32,
    /// Comparator outcomes, first stage first; `true` means `x >= knot`.
    pub comparator_bits: Vec<bool>,
    pub selected_segment: usize,
    pub coeff_codes: (i32, i32),
    pub output_code: i32,
    pub stage_count: u32,
}

impl PipelineTrace {
    pub fn bits_string(&self) -> String {
        self.comparator_bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// `code<TAB>bits<TAB>segment<TAB>output`
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.input_code,
            self.bits_string(),
            self.selected_segment,
            self.output_code
        )
    }
}

/// Rounds `num / 2^shift` to nearest, ties to even, using exact division.
fn round_div_pow2(num: i128, shift: u32) -> i128 {
    let den = 1i128 << shift;
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal if q % 2 != 0 => q + 1,
        _ => q,
    }
}

fn mac_stage(x: i32, io: FixedPointFormat, a: i32, a_fmt: FixedPointFormat, b: i32, b_fmt: FixedPointFormat) -> i32 {
    // value = a x / 2^(fa + n) + b / 2^fb ; output code = value * 2^n
    // common denominator 2^(fa + n + fb), expressed in output units
    let (fa, fb, n) = (a_fmt.frac_bits(), b_fmt.frac_bits(), io.frac_bits());
    let num = (a as i128 * x as i128) * (1i128 << fb) + (b as i128) * (1i128 << (fa + n));
    let y = round_div_pow2(num, fa + fb);
    y.clamp(io.min_code() as i128, io.max_code() as i128) as i32
}

/// Runs one input code through the comparator tree and the MAC stage.
pub fn simulate_lookup(q: &QuantizedTable, x_code: i32) -> PipelineTrace {
    let segments = q.segments();
    let knots = q.knots();
    let stages = segments.trailing_zeros();
    let mut base = 0usize;
    let mut width = segments;
    let mut bits = Vec::with_capacity(stages as usize);
    for _ in 0..stages {
        width /= 2;
        let pivot = base + width;
        let upper = x_code >= knots[pivot];
        bits.push(upper);
        if upper {
            base = pivot;
        }
    }
    let (a, b) = q.fwd()[base];
    let f = q.coeff_formats();
    PipelineTrace {
        input_code: x_code,
        comparator_bits: bits,
        selected_segment: base,
        coeff_codes: (a, b),
        output_code: mac_stage(x_code, q.io_format(), a, f.fwd_a, b, f.fwd_b),
        stage_count: stages + 1,
    }
}

/// Traces every code of the I/O format, in ascending order.
pub fn sweep(q: &QuantizedTable) -> Vec<PipelineTrace> {
    let io = q.io_format();
    (io.min_code()..=io.max_code())
        .into_par_iter()
        .map(|c| simulate_lookup(q, c))
        .collect()
}

/// Number of codes where the pipeline model disagrees with `eval_fixed`.
pub fn count_mismatches(q: &QuantizedTable) -> usize {
    let io = q.io_format();
    (io.min_code()..=io.max_code())
        .into_par_iter()
        .filter(|&c| simulate_lookup(q, c).output_code != eval_fixed(q, c))
        .count()
}

/// Fixed-point softmax: max-shift, table exponential, 32-bit accumulation,
/// rounding division back to the I/O format. Negative table outputs are
/// clamped to zero before accumulation.
pub fn softmax_unit(q_exp: &QuantizedTable, v_codes: &[i32]) -> Result<Vec<i32>> {
    let max = *v_codes.iter().max().ok_or(Error::EmptyInput)?;
    let io = q_exp.io_format();
    let exps: Vec<i32> = v_codes
        .iter()
        .map(|&v| {
            let (shifted, _) = io.saturate(v as i64 - max as i64);
            simulate_lookup(q_exp, shifted).output_code.max(0)
        })
        .collect();
    let mut acc: i32 = 0;
    for &e in &exps {
        acc = acc
            .checked_add(e)
            .ok_or(Error::AccumulatorOverflow { len: v_codes.len() })?;
    }
    if acc == 0 {
        return Err(Error::DegenerateInput("exponential sum is zero".into()));
    }
    let n = io.frac_bits();
    let den = acc as i64;
    Ok(exps
        .iter()
        .map(|&e| {
            let num = (e as i64) << n;
            let (qt, r) = (num / den, num % den);
            let y = match (2 * r).cmp(&den) {
                std::cmp::Ordering::Greater => qt + 1,
                std::cmp::Ordering::Equal if qt % 2 != 0 => qt + 1,
                _ => qt,
            };
            io.saturate(y).0
        })
        .collect())
}
