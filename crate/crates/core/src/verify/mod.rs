//! Verification harness: binary32 sweeps, hard-case corpus replay,
//! callout statistics and cross-backend consistency, all against the oracle.

pub mod checks;
pub mod corpus;

use crate::fpbits::{ulp32_distance, ulp64_distance, Binary32, Binary64, Format, RoundingMode, UlpDistance};
use crate::hexfloat::{format_f32, format_f64};
use crate::kernels_f32::{self, F32Fn};
use crate::kernels_f64::F64Fn;
use crate::oracle::{ziv_all_modes, ziv_correctly_round, FnId};
use crate::vlanes::BackendKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::time::Instant;

/// Bit patterns per sweep chunk.
pub const CHUNK: u64 = 1 << 20;
/// Default number of mismatches kept in a report.
pub const DEFAULT_CAP: usize = 100;
/// Patterns on each side of an exponent-boundary preimage.
pub const BOUNDARY_HALF_WIDTH: u32 = 1 << 12;
pub const DIRECTED_STRIDE: u32 = 1 << 8;
pub const DIRECTED_RANDOM: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelId {
    Exp2f,
    Log2f,
    Exp2,
    Log,
}

impl KernelId {
    pub const ALL: [KernelId; 4] = [KernelId::Exp2f, KernelId::Log2f, KernelId::Exp2, KernelId::Log];

    pub fn name(self) -> &'static str {
        match self {
            KernelId::Exp2f => "exp2f",
            KernelId::Log2f => "log2f",
            KernelId::Exp2 => "exp2",
            KernelId::Log => "log",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn f32_fn(self) -> Option<F32Fn> {
        match self {
            KernelId::Exp2f => Some(F32Fn::Exp2f),
            KernelId::Log2f => Some(F32Fn::Log2f),
            _ => None,
        }
    }

    pub fn f64_fn(self) -> Option<F64Fn> {
        match self {
            KernelId::Exp2 => Some(F64Fn::Exp2),
            KernelId::Log => Some(F64Fn::Log),
            _ => None,
        }
    }

    pub fn oracle_fn(self) -> FnId {
        match self {
            KernelId::Exp2f | KernelId::Exp2 => FnId::Exp2,
            KernelId::Log2f => FnId::Log2,
            KernelId::Log => FnId::Log,
        }
    }

    pub fn format(self) -> Format {
        if self.f32_fn().is_some() {
            Format::BINARY32
        } else {
            Format::BINARY64
        }
    }
}

impl From<F32Fn> for KernelId {
    fn from(f: F32Fn) -> Self {
        match f {
            F32Fn::Exp2f => KernelId::Exp2f,
            F32Fn::Log2f => KernelId::Log2f,
        }
    }
}

impl From<F64Fn> for KernelId {
    fn from(f: F64Fn) -> Self {
        match f {
            F64Fn::Exp2 => KernelId::Exp2,
            F64Fn::Log => KernelId::Log,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub input: String,
    pub mode: String,
    pub got: String,
    pub expected: String,
    /// `None` when either side is NaN.
    pub ulp_distance: Option<u64>,
}

impl Mismatch {
    pub fn f32(x: f32, mode: RoundingMode, got: u32, want: u32) -> Self {
        let d = ulp32_distance(Binary32(got), Binary32(want));
        Mismatch {
            input: format_f32(x),
            mode: mode.short_name().into(),
            got: format_f32(f32::from_bits(got)),
            expected: format_f32(f32::from_bits(want)),
            ulp_distance: finite(d),
        }
    }

    pub fn f64(x: f64, mode: RoundingMode, got: u64, want: u64) -> Self {
        let d = ulp64_distance(Binary64(got), Binary64(want));
        Mismatch {
            input: format_f64(x),
            mode: mode.short_name().into(),
            got: format_f64(f64::from_bits(got)),
            expected: format_f64(f64::from_bits(want)),
            ulp_distance: finite(d),
        }
    }
}

fn finite(d: UlpDistance) -> Option<u64> {
    match d {
        UlpDistance::Finite(n) => Some(n),
        UlpDistance::Incomparable => None,
    }
}

/// Contiguous run of binary32 patterns `lo, lo + stride, ..., <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: u32,
    pub hi: u32,
    pub stride: u32,
}

impl Segment {
    pub fn new(lo: u32, hi: u32, stride: u32) -> Self {
        assert!(lo <= hi && stride >= 1);
        Segment { lo, hi, stride }
    }

    pub fn len(&self) -> u64 {
        (self.hi - self.lo) as u64 / self.stride as u64 + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn pattern(&self, k: u64) -> u32 {
        (self.lo as u64 + k * self.stride as u64) as u32
    }
}

/// What a report covered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Coverage {
    /// Bit-pattern segments, plus `random` seeded random patterns.
    Sweep {
        segments: Vec<Segment>,
        boundary_segments: usize,
        random: u64,
        seed: u64,
    },
    Corpus {
        path: String,
        records: usize,
        parse_errors: Vec<String>,
        corpus_disagreements: Vec<Mismatch>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub function: KernelId,
    pub modes: Vec<String>,
    /// Distinct evaluations per mode.
    pub inputs_tested: u64,
    pub mismatch_count: u64,
    /// First mismatches in input order, up to the cap.
    pub mismatches: Vec<Mismatch>,
    pub coverage: Coverage,
    /// Excluded from the JSON so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatch_count == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let cov = match &self.coverage {
            Coverage::Sweep { segments, boundary_segments, random, seed } => {
                let strides: Vec<String> = segments
                    .iter()
                    .take(segments.len() - boundary_segments)
                    .map(|g| format!("{:08x}..={:08x}/{}", g.lo, g.hi, g.stride))
                    .collect();
                format!(
                    "sweep {} + {boundary_segments} boundary windows + {random} random (seed {seed})",
                    strides.join(", ")
                )
            }
            Coverage::Corpus { path, records, parse_errors, corpus_disagreements } => format!(
                "corpus {path}: {records} records, {} parse errors, {} corpus/oracle disagreements",
                parse_errors.len(),
                corpus_disagreements.len()
            ),
        };
        let _ = writeln!(s, "function    {}", self.function.name());
        let _ = writeln!(s, "modes       {}", self.modes.join(","));
        let _ = writeln!(s, "coverage    {cov}");
        let _ = writeln!(s, "inputs      {}", self.inputs_tested);
        let _ = writeln!(s, "mismatches  {}", self.mismatch_count);
        let _ = writeln!(s, "wall time   {:.1} s", self.wall_time_s);
        let _ = writeln!(s, "result      {}", if self.passed() { "PASS" } else { "FAIL" });
        if !self.mismatches.is_empty() {
            let _ = writeln!(s, "\n{:<26} {:<4} {:<26} {:<26} ulp", "input", "mode", "got", "expected");
            for m in &self.mismatches {
                let ulp = m.ulp_distance.map_or("-".into(), |d| d.to_string());
                let _ = writeln!(s, "{:<26} {:<4} {:<26} {:<26} {ulp}", m.input, m.mode, m.got, m.expected);
            }
        }
        s
    }
}

pub fn mode_names(modes: &[RoundingMode]) -> Vec<String> {
    modes.iter().map(|m| m.short_name().to_string()).collect()
}

/// Oracle results for `modes` from one shared evaluation when more than
/// one mode is requested.
pub fn oracle_bits(f: FnId, x: f64, fmt: Format, modes: &[RoundingMode]) -> Vec<u64> {
    if let [m] = modes {
        return vec![ziv_correctly_round(f, x, fmt, *m).expect("oracle").rounded_bits];
    }
    let all = ziv_all_modes(f, x, fmt).expect("oracle");
    modes.iter().map(|m| all[RoundingMode::ALL.iter().position(|a| a == m).expect("mode")].rounded_bits).collect()
}

#[derive(Default)]
struct ChunkResult {
    tested: u64,
    count: u64,
    mismatches: Vec<Mismatch>,
}

impl ChunkResult {
    fn merge(mut self, o: ChunkResult, cap: usize) -> ChunkResult {
        self.tested += o.tested;
        self.count += o.count;
        let room = cap.saturating_sub(self.mismatches.len());
        self.mismatches.extend(o.mismatches.into_iter().take(room));
        self
    }
}

fn check_f32_chunk(f: F32Fn, modes: &[RoundingMode], xs: &[f32], cap: usize) -> ChunkResult {
    let backend = BackendKind::best();
    let outs: Vec<Vec<f32>> = modes
        .iter()
        .map(|&m| {
            let mut out = vec![0.0f32; xs.len()];
            kernels_f32::eval_slice(f, backend, 16, m, xs, &mut out);
            out
        })
        .collect();
    let mut r = ChunkResult { tested: xs.len() as u64, ..Default::default() };
    for (i, &x) in xs.iter().enumerate() {
        let want = oracle_bits(f.oracle_fn(), x as f64, Format::BINARY32, modes);
        for (k, &m) in modes.iter().enumerate() {
            let got = outs[k][i].to_bits();
            if got as u64 != want[k] {
                r.count += 1;
                if r.mismatches.len() < cap {
                    r.mismatches.push(Mismatch::f32(x, m, got, want[k] as u32));
                }
            }
        }
    }
    r
}

/// A unit of sweep work: part of a segment or part of the random list.
enum Work<'a> {
    Seg(Segment, u64, u64),
    List(&'a [u32]),
}

fn run_sweep(
    f: F32Fn,
    modes: &[RoundingMode],
    segments: &[Segment],
    random: &[u32],
    jobs: usize,
    cap: usize,
) -> ChunkResult {
    let mut work = Vec::new();
    for s in segments {
        let n = s.len();
        let mut k = 0;
        while k < n {
            work.push(Work::Seg(*s, k, (k + CHUNK).min(n)));
            k += CHUNK;
        }
    }
    work.extend(random.chunks(CHUNK as usize).map(Work::List));
    let job = |w: &Work| {
        let xs: Vec<f32> = match w {
            Work::Seg(s, a, b) => (*a..*b).map(|k| f32::from_bits(s.pattern(k))).collect(),
            Work::List(l) => l.iter().map(|&b| f32::from_bits(b)).collect(),
        };
        check_f32_chunk(f, modes, &xs, cap)
    };
    let results: Vec<ChunkResult> = if jobs == 1 {
        work.iter().map(job).collect()
    } else {
        let mut b = rayon::ThreadPoolBuilder::new();
        if jobs > 0 {
            b = b.num_threads(jobs);
        }
        b.build().expect("thread pool").install(|| work.par_iter().map(job).collect())
    };
    results.into_iter().fold(ChunkResult::default(), |a, r| a.merge(r, cap))
}

/// Options of a binary32 sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub stride: u32,
    /// Inclusive bit-pattern range; the full space when `None`.
    pub range: Option<(u32, u32)>,
    pub boundary: bool,
    pub random: u64,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub cap: usize,
}

impl SweepOptions {
    pub fn exhaustive() -> Self {
        SweepOptions { stride: 1, range: None, boundary: false, random: 0, seed: 0, jobs: 0, cap: DEFAULT_CAP }
    }

    /// Stride 2^8, exponent-boundary windows and 2^20 random patterns.
    pub fn stratified(seed: u64) -> Self {
        SweepOptions {
            stride: DIRECTED_STRIDE,
            range: None,
            boundary: true,
            random: DIRECTED_RANDOM,
            seed,
            jobs: 0,
            cap: DEFAULT_CAP,
        }
    }
}

/// Windows of `BOUNDARY_HALF_WIDTH` patterns around every input whose
/// exact result is a power of two, plus for `exp2f` the binades of tiny
/// inputs whose results all lie within a few ulp of 1.
pub fn boundary_segments(f: F32Fn) -> Vec<Segment> {
    let mut centers: Vec<u32> = Vec::new();
    let mut out = Vec::new();
    match f {
        F32Fn::Exp2f => {
            for k in -150..=128 {
                centers.push((k as f32).to_bits());
            }
            for sign in [0u32, 1 << 31] {
                out.push(Segment::new(sign | (2f32.powi(-26)).to_bits(), sign | (2f32.powi(-19)).to_bits(), 1));
            }
        }
        F32Fn::Log2f => {
            centers.push(1f32.to_bits());
            for j in -24..=7 {
                for s in [1.0, -1.0] {
                    let x = (s * 2f64.powi(j)).exp2() as f32;
                    if x.is_finite() && x > 0.0 {
                        centers.push(x.to_bits());
                    }
                }
            }
        }
    }
    let h = BOUNDARY_HALF_WIDTH;
    for c in centers {
        // stay inside the sign half of the center
        let (base, mag) = (c & (1 << 31), c & !(1 << 31));
        let lo = mag.saturating_sub(h);
        let hi = (mag + h).min(0x7f80_0000);
        out.push(Segment::new(base | lo, base | hi, 1));
    }
    out
}

pub fn random_patterns(n: u64, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen()).collect()
}

/// Sweeps binary32 inputs of `f` against the oracle in every mode of `modes`.
pub fn sweep_f32(f: F32Fn, modes: &[RoundingMode], opts: &SweepOptions) -> VerifyReport {
    let t0 = Instant::now();
    let (lo, hi) = opts.range.unwrap_or((0, u32::MAX));
    let mut segments = vec![Segment::new(lo, hi, opts.stride)];
    let boundary = if opts.boundary { boundary_segments(f) } else { Vec::new() };
    let nb = boundary.len();
    segments.extend(boundary);
    let random = random_patterns(opts.random, opts.seed);
    let r = run_sweep(f, modes, &segments, &random, opts.jobs, opts.cap);
    VerifyReport {
        function: f.into(),
        modes: mode_names(modes),
        inputs_tested: r.tested,
        mismatch_count: r.count,
        mismatches: r.mismatches,
        coverage: Coverage::Sweep { segments, boundary_segments: nb, random: opts.random, seed: opts.seed },
        wall_time_s: t0.elapsed().as_secs_f64(),
    }
}

/// Every pattern at `stride` (all 2^32 when 1), optionally restricted to
/// an inclusive range.
pub fn exhaustive_f32(
    f: F32Fn,
    modes: &[RoundingMode],
    stride: u32,
    range: Option<(u32, u32)>,
    jobs: usize,
) -> VerifyReport {
    sweep_f32(f, modes, &SweepOptions { stride, range, jobs, ..SweepOptions::exhaustive() })
}
