//! Fixed-point quantization of fitted tables.
//!
//! Knots are encoded in the I/O format. Each coefficient array (forward
//! slopes, forward intercepts, derivative slopes, derivative intercepts)
//! gets its own 16-bit format with as many fractional bits as its largest
//! magnitude allows. Evaluation multiplies in a 64-bit accumulator, aligns
//! the intercept, and rounds once back to the I/O format.

mod fixed;
pub mod header;
mod select;

pub use fixed::{encode_decode, shift_round_even, Encoded, FixedPointFormat, BIT_MAX};
pub use select::{integer_bits_for_range, quantized_dwmse, select_format, FormatSelection, DEFAULT_THETA};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitter::DapaTable;
use crate::reference::ActivationKind;

/// Per-array coefficient formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoeffFormats {
    pub fwd_a: FixedPointFormat,
    pub fwd_b: FixedPointFormat,
    pub deriv_a: FixedPointFormat,
    pub deriv_b: FixedPointFormat,
}

/// How coefficient formats are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoeffPolicy {
    /// Maximal fractional bits per array without saturation.
    #[default]
    Auto,
    /// One format for every array.
    Fixed(FixedPointFormat),
}

/// Smallest 16-bit format that holds every value of `values` without
/// saturating after rounding.
pub fn coefficient_format(values: &[f64]) -> Result<FixedPointFormat> {
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !max_abs.is_finite() {
        return Err(Error::InvalidArgument("coefficients must be finite".into()));
    }
    // smallest m with max_abs < 2^(m-1), then widen while rounding saturates
    let mut m = if max_abs == 0.0 {
        1
    } else {
        (max_abs.log2().floor() as i64 + 2).max(1)
    };
    while m <= BIT_MAX as i64 {
        let fmt = FixedPointFormat::new(m as u32, BIT_MAX - m as u32)?;
        if values.iter().all(|&v| !fmt.encode(v).saturated) {
            return Ok(fmt);
        }
        m += 1;
    }
    Err(Error::InvalidArgument(format!(
        "coefficient magnitude {max_abs} does not fit in {BIT_MAX} bits"
    )))
}

/// A table with every knot and coefficient stored as a fixed-point code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizedWire", into = "QuantizedWire")]
pub struct QuantizedTable {
    kind: ActivationKind,
    io_format: FixedPointFormat,
    coeff_formats: CoeffFormats,
    knots: Vec<i32>,
    fwd: Vec<(i32, i32)>,
    deriv: Vec<(i32, i32)>,
    source: String,
}

#[derive(Serialize, Deserialize)]
struct QuantizedWire {
    kind: ActivationKind,
    segments: usize,
    io_format: FixedPointFormat,
    coeff_formats: CoeffFormats,
    knots: Vec<i32>,
    fwd: Vec<[i32; 2]>,
    deriv: Vec<[i32; 2]>,
    source: String,
}

impl From<QuantizedTable> for QuantizedWire {
    fn from(q: QuantizedTable) -> Self {
        QuantizedWire {
            kind: q.kind,
            segments: q.segments(),
            io_format: q.io_format,
            coeff_formats: q.coeff_formats,
            knots: q.knots,
            fwd: q.fwd.iter().map(|&(a, b)| [a, b]).collect(),
            deriv: q.deriv.iter().map(|&(a, b)| [a, b]).collect(),
            source: q.source,
        }
    }
}

impl TryFrom<QuantizedWire> for QuantizedTable {
    type Error = Error;

    fn try_from(w: QuantizedWire) -> Result<Self> {
        if w.segments != w.fwd.len() {
            return Err(Error::Parse(format!(
                "segments = {} but {} forward pairs",
                w.segments,
                w.fwd.len()
            )));
        }
        QuantizedTable::from_parts(
            w.kind,
            w.io_format,
            w.coeff_formats,
            w.knots,
            w.fwd.into_iter().map(|[a, b]| (a, b)).collect(),
            w.deriv.into_iter().map(|[a, b]| (a, b)).collect(),
            w.source,
        )
    }
}

impl QuantizedTable {
    pub fn from_parts(
        kind: ActivationKind,
        io_format: FixedPointFormat,
        coeff_formats: CoeffFormats,
        knots: Vec<i32>,
        fwd: Vec<(i32, i32)>,
        deriv: Vec<(i32, i32)>,
        source: String,
    ) -> Result<Self> {
        let segments = knots.len().saturating_sub(1);
        if segments < 2 || !crate::numeric::is_power_of_two(segments) {
            return Err(Error::InvalidArgument(format!(
                "segment count must be a power of two >= 2, got {segments}"
            )));
        }
        if fwd.len() != segments || deriv.len() != segments {
            return Err(Error::InvalidArgument(format!(
                "expected {segments} coefficient pairs, got {}/{}",
                fwd.len(),
                deriv.len()
            )));
        }
        if let Some(i) = knots.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::KnotsCollapse {
                lower: i,
                upper: i + 1,
                code: knots[i + 1],
            });
        }
        let check = |fmt: FixedPointFormat, c: i32, what: &str| {
            if fmt.contains_code(c as i64) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} code {c} outside {fmt}")))
            }
        };
        for &k in &knots {
            check(io_format, k, "knot")?;
        }
        for &(a, b) in &fwd {
            check(coeff_formats.fwd_a, a, "forward slope")?;
            check(coeff_formats.fwd_b, b, "forward intercept")?;
        }
        for &(a, b) in &deriv {
            check(coeff_formats.deriv_a, a, "derivative slope")?;
            check(coeff_formats.deriv_b, b, "derivative intercept")?;
        }
        Ok(Self {
            kind,
            io_format,
            coeff_formats,
            knots,
            fwd,
            deriv,
            source,
        })
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn io_format(&self) -> FixedPointFormat {
        self.io_format
    }

    pub fn coeff_formats(&self) -> CoeffFormats {
        self.coeff_formats
    }

    pub fn knots(&self) -> &[i32] {
        &self.knots
    }

    pub fn interior_knots(&self) -> &[i32] {
        &self.knots[1..self.knots.len() - 1]
    }

    pub fn fwd(&self) -> &[(i32, i32)] {
        &self.fwd
    }

    pub fn deriv(&self) -> &[(i32, i32)] {
        &self.deriv
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn segments(&self) -> usize {
        self.fwd.len()
    }

    pub fn knot_values(&self) -> Vec<f64> {
        self.knots.iter().map(|&k| self.io_format.decode(k)).collect()
    }

    pub fn decoded_fwd(&self) -> Vec<(f64, f64)> {
        let f = self.coeff_formats;
        self.fwd.iter().map(|&(a, b)| (f.fwd_a.decode(a), f.fwd_b.decode(b))).collect()
    }

    pub fn decoded_deriv(&self) -> Vec<(f64, f64)> {
        let f = self.coeff_formats;
        self.deriv
            .iter()
            .map(|&(a, b)| (f.deriv_a.decode(a), f.deriv_b.decode(b)))
            .collect()
    }

    /// Segment chosen by comparing against the interior knot codes.
    #[inline]
    pub fn segment_of(&self, x_code: i32) -> usize {
        self.interior_knots().partition_point(|&k| k <= x_code)
    }
}

/// `y = a x + b` on codes: 64-bit product, intercept aligned to the wider
/// of the two binary points, single round-to-nearest-even back to `io`,
/// then saturation.
#[inline]
pub fn mac(x_code: i32, io: FixedPointFormat, a: i32, a_fmt: FixedPointFormat, b: i32, b_fmt: FixedPointFormat) -> i32 {
    let prod_frac = a_fmt.frac_bits() + io.frac_bits();
    let frac = prod_frac.max(b_fmt.frac_bits());
    let prod = (a as i64 * x_code as i64) << (frac - prod_frac);
    let bias = (b as i64) << (frac - b_fmt.frac_bits());
    let y = shift_round_even(prod + bias, frac - io.frac_bits());
    io.saturate(y).0
}

/// Bit-exact fixed-point forward evaluation.
pub fn eval_fixed(q: &QuantizedTable, x_code: i32) -> i32 {
    let (a, b) = q.fwd[q.segment_of(x_code)];
    let f = q.coeff_formats;
    mac(x_code, q.io_format, a, f.fwd_a, b, f.fwd_b)
}

/// Bit-exact fixed-point derivative-table evaluation.
pub fn eval_fixed_derivative(q: &QuantizedTable, x_code: i32) -> i32 {
    let (a, b) = q.deriv[q.segment_of(x_code)];
    let f = q.coeff_formats;
    mac(x_code, q.io_format, a, f.deriv_a, b, f.deriv_b)
}

pub fn quantize_table(t: &DapaTable, io_format: FixedPointFormat) -> Result<QuantizedTable> {
    quantize_table_with(t, io_format, CoeffPolicy::Auto)
}

pub fn quantize_table_with(t: &DapaTable, io_format: FixedPointFormat, policy: CoeffPolicy) -> Result<QuantizedTable> {
    let knots: Vec<i32> = t.knots().iter().map(|&k| io_format.encode_code(k)).collect();
    if let Some(i) = knots.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::KnotsCollapse {
            lower: i,
            upper: i + 1,
            code: knots[i + 1],
        });
    }
    let column = |v: &[(f64, f64)], first: bool| -> Vec<f64> {
        v.iter().map(|&(a, b)| if first { a } else { b }).collect()
    };
    let (fa, fb, da, db) = (
        column(t.fwd(), true),
        column(t.fwd(), false),
        column(t.deriv(), true),
        column(t.deriv(), false),
    );
    let coeff_formats = match policy {
        CoeffPolicy::Auto => CoeffFormats {
            fwd_a: coefficient_format(&fa)?,
            fwd_b: coefficient_format(&fb)?,
            deriv_a: coefficient_format(&da)?,
            deriv_b: coefficient_format(&db)?,
        },
        CoeffPolicy::Fixed(f) => CoeffFormats {
            fwd_a: f,
            fwd_b: f,
            deriv_a: f,
            deriv_b: f,
        },
    };
    let enc = |fmt: FixedPointFormat, v: &[f64]| -> Vec<i32> { v.iter().map(|&x| fmt.encode_code(x)).collect() };
    let zip = |a: Vec<i32>, b: Vec<i32>| a.into_iter().zip(b).collect::<Vec<_>>();
    QuantizedTable::from_parts(
        t.kind(),
        io_format,
        coeff_formats,
        knots,
        zip(enc(coeff_formats.fwd_a, &fa), enc(coeff_formats.fwd_b, &fb)),
        zip(enc(coeff_formats.deriv_a, &da), enc(coeff_formats.deriv_b, &db)),
        t.dist_fingerprint().to_string(),
    )
}

/// Real input through the deployed pipeline: encode, evaluate, decode.
pub fn eval_quantized(q: &QuantizedTable, x: f64) -> f64 {
    let io = q.io_format();
    io.decode(eval_fixed(q, io.encode_code(x)))
}
