//! Criterion benchmarks live in `benches/`; this crate only hosts them.

pub use crvec_core::bench::default_distribution;
