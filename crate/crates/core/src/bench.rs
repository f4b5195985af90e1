//! Reciprocal-throughput measurement of scalar and batch kernels.
//!
//! Each repetition times one pass over pre-generated independent inputs
//! and reports nanoseconds per element; a warmup pass is discarded and the
//! median over repetitions is the headline number.

use crate::coeffgen::tables;
use crate::fpbits::RoundingMode;
use crate::kernels_f32;
use crate::kernels_f64;
use crate::verify::checks::Distribution;
use crate::verify::{oracle_bits, KernelId};
use crate::vlanes::{BackendKind, WIDTHS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::hint::black_box;
use std::time::{Duration, Instant};

pub const MIN_ELEMENTS: usize = 1 << 16;
pub const MIN_REPS: usize = 9;
pub const SPOT_CHECK_INPUTS: usize = 10_000;
/// Shortest repetition accepted as measurable.
pub const MIN_REP_TIME: Duration = Duration::from_micros(500);
/// Buffer length used when inputs must not fit in the last-level cache.
pub const LARGE_BUFFER_ELEMENTS: usize = 1 << 24;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BenchError {
    #[error("n_elements must be at least {MIN_ELEMENTS}, got {0}")]
    TooFewElements(usize),
    #[error("repetitions must be at least {MIN_REPS}, got {0}")]
    TooFewReps(usize),
    #[error("a repetition took {0:?}, below timer resolution; raise n_elements")]
    TimerResolution(Duration),
    #[error("unknown variant `{0}` (expected scalar or batch<W>[:backend])")]
    UnknownVariant(String),
    #[error("backend {0} is not available on this host")]
    Unavailable(BackendKind),
}

/// Scalar CR is the width-1 entry point of the reference backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Scalar,
    Batch { width: usize, backend: BackendKind },
}

impl Variant {
    /// `scalar`, `batch8` (fastest backend) or `batch8:reference`.
    pub fn parse(s: &str) -> Result<Variant, BenchError> {
        let bad = || BenchError::UnknownVariant(s.to_string());
        if s == "scalar" {
            return Ok(Variant::Scalar);
        }
        let (w, b) = s.split_once(':').map_or((s, None), |(w, b)| (w, Some(b)));
        let width: usize = w.strip_prefix("batch").and_then(|w| w.parse().ok()).ok_or_else(bad)?;
        if !WIDTHS.contains(&width) {
            return Err(bad());
        }
        let backend = match b {
            None => BackendKind::best(),
            Some(b) => BackendKind::from_name(b).ok_or_else(bad)?,
        };
        if !backend.is_available() {
            return Err(BenchError::Unavailable(backend));
        }
        Ok(Variant::Batch { width, backend })
    }

    pub fn name(&self) -> String {
        match self {
            Variant::Scalar => "scalar".into(),
            Variant::Batch { width, backend } => format!("batch{width}:{backend}"),
        }
    }

    fn backend_width(&self) -> (BackendKind, usize) {
        match *self {
            Variant::Scalar => (BackendKind::Reference, 1),
            Variant::Batch { width, backend } => (backend, width),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub n_elements: usize,
    pub reps: usize,
    pub mode: RoundingMode,
    pub distribution: Distribution,
    pub seed: u64,
    /// Use a buffer of at least [`LARGE_BUFFER_ELEMENTS`].
    pub large_buffer: bool,
}

impl BenchConfig {
    pub fn new(k: KernelId) -> Self {
        BenchConfig {
            n_elements: 1 << 20,
            reps: 15,
            mode: RoundingMode::NearestEven,
            distribution: default_distribution(k),
            seed: 1,
            large_buffer: false,
        }
    }
}

/// Uniform on [-20, 20] for the exponentials and [0.125, 8] for the logarithms.
pub fn default_distribution(k: KernelId) -> Distribution {
    match k {
        KernelId::Exp2f | KernelId::Exp2 => Distribution::Uniform { lo: -20.0, hi: 20.0 },
        KernelId::Log2f | KernelId::Log => Distribution::Uniform { lo: 0.125, hi: 8.0 },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub inputs: usize,
    pub mismatches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub function: KernelId,
    pub variant: String,
    pub mode: String,
    pub distribution: Distribution,
    pub n_elements: usize,
    pub median_ns: f64,
    pub min_ns: f64,
    pub max_ns: f64,
    /// `(max - min) / median` over repetitions.
    pub spread: f64,
    /// Time-stamp-counter ticks per element where the host has one.
    pub median_ticks: Option<f64>,
    /// Per-repetition ns per element, in run order.
    pub samples_ns: Vec<f64>,
    pub spot_check: SpotCheck,
}

impl BenchReport {
    pub fn stable_within(&self, tol: f64) -> bool {
        self.spread < tol
    }
}

fn inputs(k: KernelId, cfg: &BenchConfig, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f32_input = k.f32_fn().is_some();
    (0..n)
        .map(|_| {
            let x = cfg.distribution.sample(&mut rng);
            if f32_input {
                x as f32 as f64
            } else {
                x
            }
        })
        .collect()
}

#[cfg(target_arch = "x86_64")]
fn ticks() -> Option<u64> {
    // SAFETY: rdtsc has no preconditions on x86_64
    Some(unsafe { core::arch::x86_64::_rdtsc() })
}

#[cfg(not(target_arch = "x86_64"))]
fn ticks() -> Option<u64> {
    None
}

/// One evaluation pass over a pre-generated buffer.
enum Buffers {
    F32(Vec<f32>, Vec<f32>),
    F64(Vec<f64>, Vec<f64>),
}

impl Buffers {
    fn new(k: KernelId, xs: &[f64]) -> Buffers {
        if k.f32_fn().is_some() {
            Buffers::F32(xs.iter().map(|&x| x as f32).collect(), vec![0.0; xs.len()])
        } else {
            Buffers::F64(xs.to_vec(), vec![0.0; xs.len()])
        }
    }

    fn pass(&mut self, k: KernelId, v: Variant, mode: RoundingMode) {
        let (backend, w) = v.backend_width();
        match self {
            Buffers::F32(x, y) => kernels_f32::eval_slice(k.f32_fn().expect("f32"), backend, w, mode, black_box(x), y),
            Buffers::F64(x, y) => {
                kernels_f64::eval_slice(k.f64_fn().expect("f64"), backend, w, mode, black_box(x), y);
            }
        }
        match self {
            Buffers::F32(_, y) => {
                black_box(y);
            }
            Buffers::F64(_, y) => {
                black_box(y);
            }
        }
    }

    fn bits(&self) -> Vec<u64> {
        match self {
            Buffers::F32(_, y) => y.iter().map(|v| v.to_bits() as u64).collect(),
            Buffers::F64(_, y) => y.iter().map(|v| v.to_bits()).collect(),
        }
    }
}

/// Runs [`SPOT_CHECK_INPUTS`] inputs of the bench distribution through
/// `v` and compares with the oracle.
pub fn spot_check(k: KernelId, v: Variant, cfg: &BenchConfig) -> SpotCheck {
    let xs = inputs(k, &BenchConfig { seed: cfg.seed ^ 0x5eed, ..cfg.clone() }, SPOT_CHECK_INPUTS);
    let mut b = Buffers::new(k, &xs);
    b.pass(k, v, cfg.mode);
    let got = b.bits();
    let mismatches =
        xs.iter().zip(&got).filter(|(&x, &g)| oracle_bits(k.oracle_fn(), x, k.format(), &[cfg.mode])[0] != g).count();
    SpotCheck { inputs: xs.len(), mismatches }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Measures `v` on `k`. Single-threaded.
pub fn throughput(k: KernelId, v: Variant, cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.n_elements < MIN_ELEMENTS {
        return Err(BenchError::TooFewElements(cfg.n_elements));
    }
    if cfg.reps < MIN_REPS {
        return Err(BenchError::TooFewReps(cfg.reps));
    }
    if let Variant::Batch { backend, .. } = v {
        if !backend.is_available() {
            return Err(BenchError::Unavailable(backend));
        }
    }
    let n = if cfg.large_buffer { cfg.n_elements.max(LARGE_BUFFER_ELEMENTS) } else { cfg.n_elements };
    let mut buf = Buffers::new(k, &inputs(k, cfg, n));
    buf.pass(k, v, cfg.mode);
    let mut samples = Vec::with_capacity(cfg.reps);
    let mut tick_samples = Vec::with_capacity(cfg.reps);
    for _ in 0..cfg.reps {
        let (c0, t0) = (ticks(), Instant::now());
        buf.pass(k, v, cfg.mode);
        let dt = t0.elapsed();
        let c1 = ticks();
        if dt < MIN_REP_TIME {
            return Err(BenchError::TimerResolution(dt));
        }
        samples.push(dt.as_nanos() as f64 / n as f64);
        if let (Some(a), Some(b)) = (c0, c1) {
            tick_samples.push(b.wrapping_sub(a) as f64 / n as f64);
        }
    }
    let med = median(&samples);
    let (lo, hi) = samples.iter().fold((f64::INFINITY, 0f64), |(a, b), &s| (a.min(s), b.max(s)));
    Ok(BenchReport {
        function: k,
        variant: v.name(),
        mode: cfg.mode.short_name().into(),
        distribution: cfg.distribution,
        n_elements: n,
        median_ns: med,
        min_ns: lo,
        max_ns: hi,
        spread: (hi - lo) / med,
        median_ticks: (!tick_samples.is_empty()).then(|| median(&tick_samples)),
        samples_ns: samples,
        spot_check: spot_check(k, v, cfg),
    })
}

/// Bytes of lookup tables and coefficients each kernel reads.
pub fn table_bytes(k: KernelId) -> usize {
    let t = tables();
    let f = std::mem::size_of::<f64>();
    match k {
        KernelId::Exp2f => (t.exp2f.t.len() + t.exp2f.c.len()) * f,
        KernelId::Log2f => t.log2f.c.iter().map(|d| d.len()).sum::<usize>() * f,
        KernelId::Exp2 => {
            let e = &t.exp2d;
            ((e.t1.len() + e.t2.len() + e.t3.len()) * 2 + 2 + e.q.len()) * f
        }
        KernelId::Log => {
            let l = &t.logd;
            // the correction term shares the reciprocal's word
            (l.rcp.len() + l.l.len() + 2 + l.q.len()) * f
        }
    }
}

/// Reference variant for ratios: the widest batch on the fastest backend,
/// else the first report.
fn baseline(reports: &[&BenchReport]) -> usize {
    let key = |r: &&BenchReport| {
        let v = Variant::parse(&r.variant).ok();
        match v {
            Some(Variant::Batch { width, backend }) => (1, (backend == BackendKind::best()) as usize, width),
            _ => (0, 0, 0),
        }
    };
    reports.iter().enumerate().max_by_key(|(i, r)| (key(r), std::cmp::Reverse(*i))).map_or(0, |(i, _)| i)
}

/// Per-function comparison tables, ratios of medians with the baseline
/// batch variant at 1.0 (lower is faster).
pub fn report_tables(reports: &[BenchReport]) -> String {
    let mut s = String::new();
    let mut fns: Vec<KernelId> = Vec::new();
    for r in reports {
        if !fns.contains(&r.function) {
            fns.push(r.function);
        }
    }
    for k in fns {
        let rs: Vec<&BenchReport> = reports.iter().filter(|r| r.function == k).collect();
        let base = rs[baseline(&rs)];
        let _ = writeln!(
            s,
            "{} ({} bytes of tables), mode {}, {:?}",
            k.name(),
            table_bytes(k),
            base.mode,
            base.distribution
        );
        let _ = writeln!(
            s,
            "  {:<20} {:>10} {:>8} {:>8} {:>8} {:>10}",
            "variant", "ns/elem", "ratio", "spread", "ticks", "spot-check"
        );
        for r in rs {
            let ticks = r.median_ticks.map_or("-".into(), |t| format!("{t:.2}"));
            let _ = writeln!(
                s,
                "  {:<20} {:>10.3} {:>8.3} {:>7.1}% {:>8} {:>4}/{}",
                r.variant,
                r.median_ns,
                r.median_ns / base.median_ns,
                r.spread * 100.0,
                ticks,
                r.spot_check.mismatches,
                r.spot_check.inputs
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_parse() {
        assert_eq!(Variant::parse("scalar"), Ok(Variant::Scalar));
        assert_eq!(
            Variant::parse("batch4:reference"),
            Ok(Variant::Batch { width: 4, backend: BackendKind::Reference })
        );
        assert_eq!(Variant::parse("batch8").unwrap().name(), format!("batch8:{}", BackendKind::best()));
        assert!(Variant::parse("batch3").is_err());
        assert!(Variant::parse("vector").is_err());
        assert!(Variant::parse("batch8:gpu").is_err());
    }

    #[test]
    fn exp2f_table_size() {
        assert_eq!(table_bytes(KernelId::Exp2f), 8 * 8 + 7 * 8);
        assert_eq!(table_bytes(KernelId::Log2f), 10 * 8 * 8);
    }

    #[test]
    fn rejects_bad_configs() {
        let cfg = BenchConfig { n_elements: 100, ..BenchConfig::new(KernelId::Exp2f) };
        assert_eq!(throughput(KernelId::Exp2f, Variant::Scalar, &cfg), Err(BenchError::TooFewElements(100)));
        let cfg = BenchConfig { reps: 3, ..BenchConfig::new(KernelId::Exp2f) };
        assert_eq!(throughput(KernelId::Exp2f, Variant::Scalar, &cfg), Err(BenchError::TooFewReps(3)));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn ratio_table_uses_widest_batch() {
        let cfg = BenchConfig { n_elements: 1 << 16, reps: 9, ..BenchConfig::new(KernelId::Log2f) };
        let a = throughput(KernelId::Log2f, Variant::Scalar, &cfg).unwrap();
        let b = throughput(KernelId::Log2f, Variant::parse("batch16").unwrap(), &cfg).unwrap();
        assert_eq!(a.spot_check.mismatches, 0);
        assert_eq!(b.spot_check, SpotCheck { inputs: SPOT_CHECK_INPUTS, mismatches: 0 });
        assert_eq!(baseline(&[&a, &b]), 1);
        let t = report_tables(&[a, b]);
        assert!(t.contains("1.000"), "{t}");
        assert!(t.contains("640 bytes"), "{t}");
    }
}
