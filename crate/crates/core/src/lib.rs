//! Correctly rounded elementary functions for lane-parallel execution.
//!
//! * [`kernels_f32`]: branch-free `exp2f`/`log2f` for all four rounding modes.
//! * [`kernels_f64`]: `exp2`/`log` with a double-double fast path, a per-lane
//!   rounding test and a scalar callout for the lanes that fail it.
//! * [`oracle`]: arbitrary-precision evaluation plus a Ziv-style correct rounder.
//! * [`coeffgen`]: generation and certification of every table and polynomial.
//! * [`verify`] and [`bench`]: the verification and throughput harnesses.

pub mod bench;
pub mod coeffgen;
pub mod fpbits;
pub mod hexfloat;
pub mod kernels_f32;
pub mod kernels_f64;
pub mod oracle;
pub mod verify;
pub mod vlanes;

pub use fpbits::{Binary32, Binary64, Format, RoundingMode};
pub use kernels_f32::F32Fn;
pub use kernels_f64::F64Fn;
pub use oracle::FnId;
pub use verify::KernelId;
pub use vlanes::{BackendKind, LaneBatch, LaneMask};
