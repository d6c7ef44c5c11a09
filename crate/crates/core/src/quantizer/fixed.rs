//! Signed Q(m,n) fixed-point formats.
//!
//! `m` counts integer bits including the sign, `n` fractional bits. Codes
//! are two's-complement integers in `[-2^(m+n-1), 2^(m+n-1) - 1]` and a
//! code `c` represents `c / 2^n`. Rounding is to nearest, ties to even;
//! out-of-range values saturate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BIT_MAX: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FixedPointFormat {
    int_bits: u32,
    frac_bits: u32,
}

/// Result of quantizing one real value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Encoded {
    pub code: i32,
    pub value: f64,
    pub saturated: bool,
}

impl FixedPointFormat {
    pub fn new(int_bits: u32, frac_bits: u32) -> Result<Self> {
        if int_bits < 1 || int_bits + frac_bits > BIT_MAX {
            return Err(Error::InvalidArgument(format!(
                "Q{int_bits}.{frac_bits} is not a valid format (need m >= 1 and m + n <= {BIT_MAX})"
            )));
        }
        Ok(Self { int_bits, frac_bits })
    }

    pub fn int_bits(self) -> u32 {
        self.int_bits
    }

    pub fn frac_bits(self) -> u32 {
        self.frac_bits
    }

    pub fn total_bits(self) -> u32 {
        self.int_bits + self.frac_bits
    }

    pub fn max_code(self) -> i32 {
        (1i32 << (self.total_bits() - 1)) - 1
    }

    pub fn min_code(self) -> i32 {
        -(1i32 << (self.total_bits() - 1))
    }

    /// Weight of one code step, `2^-n`.
    pub fn lsb(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn max_value(self) -> f64 {
        self.decode(self.max_code())
    }

    pub fn min_value(self) -> f64 {
        self.decode(self.min_code())
    }

    pub fn contains_code(self, code: i64) -> bool {
        code >= self.min_code() as i64 && code <= self.max_code() as i64
    }

    #[inline]
    pub fn decode(self, code: i32) -> f64 {
        code as f64 * self.lsb()
    }

    /// Clamps a wide integer to the code range.
    #[inline]
    pub fn saturate(self, v: i64) -> (i32, bool) {
        if v > self.max_code() as i64 {
            (self.max_code(), true)
        } else if v < self.min_code() as i64 {
            (self.min_code(), true)
        } else {
            (v as i32, false)
        }
    }

    /// Round-to-nearest-even and saturate. NaN encodes to 0 and is flagged
    /// as saturated.
    pub fn encode(self, x: f64) -> Encoded {
        if x.is_nan() {
            return Encoded {
                code: 0,
                value: 0.0,
                saturated: true,
            };
        }
        let scaled = (x * (self.frac_bits as f64).exp2()).round_ties_even();
        let (code, saturated) = if scaled > self.max_code() as f64 {
            (self.max_code(), true)
        } else if scaled < self.min_code() as f64 {
            (self.min_code(), true)
        } else {
            (scaled as i32, false)
        };
        Encoded {
            code,
            value: self.decode(code),
            saturated,
        }
    }

    #[inline]
    pub fn encode_code(self, x: f64) -> i32 {
        self.encode(x).code
    }

    /// All valid codes, ascending.
    pub fn codes(self) -> impl Iterator<Item = i32> {
        self.min_code()..=self.max_code()
    }
}

pub fn encode_decode(fmt: FixedPointFormat, x: f64) -> Encoded {
    fmt.encode(x)
}

/// Arithmetic right shift by `shift` bits rounding to nearest, ties to even.
#[inline]
pub fn shift_round_even(v: i64, shift: u32) -> i64 {
    if shift == 0 {
        return v;
    }
    let floor = v >> shift;
    let rem = v - (floor << shift);
    let half = 1i64 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}", self.int_bits, self.frac_bits)
    }
}

impl FromStr for FixedPointFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("expected a format like \"Q9.7\", got {s:?}"));
        let body = s.trim().strip_prefix('Q').ok_or_else(bad)?;
        let (m, n) = body.split_once('.').ok_or_else(bad)?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        let n: u32 = n.parse().map_err(|_| bad())?;
        FixedPointFormat::new(m, n)
    }
}

impl TryFrom<String> for FixedPointFormat {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FixedPointFormat> for String {
    fn from(f: FixedPointFormat) -> Self {
        f.to_string()
    }
}
