//! Distribution-aware piecewise-linear approximation of activation functions.
//!
//! The pipeline runs in five steps:
//!
//! ```text
//! samples ──► EmpiricalDistribution ──► quantile knots ──► per-segment WLS ──► DapaTable
//!                    │                                                        │
//!                    └──────────── distribution-weighted error ◄──────────────┤
//!                                                                             ▼
//!                          Q(m,n) format search ──► QuantizedTable ──► comparator tree + MAC
//! ```
//!
//! * [`distribution`] builds histogram densities, CDFs and quantiles from
//!   collected pre-activation values.
//! * [`reference`] holds the exact activation functions and softmax.
//! * [`fitter`] places equal-mass knots and fits each segment (forward and
//!   derivative) by weighted least squares.
//! * [`metrics`] scores approximations (MSE, distribution-weighted MSE) and
//!   provides the correlation statistics used to compare metrics.
//! * [`quantizer`] selects a 16-bit fixed-point format, quantizes tables and
//!   evaluates them bit-exactly; it also exports C headers.
//! * [`hwmodel`] is a behavioral model of the comparator-tree/MAC pipeline
//!   and the composed softmax unit.
//! * [`netcheck`] trains a toy network with exact or table activations and
//!   runs the sample-count sensitivity study.

pub mod distribution;
pub mod error;
pub mod fitter;
pub mod hwmodel;
pub mod metrics;
pub mod netcheck;
pub mod numeric;
pub mod quantizer;
pub mod reference;
pub mod synth;

pub use distribution::{EmpiricalDistribution, SampleSet};
pub use error::{Error, Result};
pub use fitter::{build_dapa, DapaTable, FitConfig};
pub use quantizer::{FixedPointFormat, QuantizedTable};
pub use reference::ActivationKind;
