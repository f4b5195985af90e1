//! Round-test soundness, callout rates, exactness, monotonicity and
//! backend consistency.

use super::{mode_names, oracle_bits, KernelId, Mismatch, CHUNK};
use crate::fpbits::{Format, RoundingMode};
use crate::kernels_f32::{self, F32Fn};
use crate::kernels_f64::{self, F64Fn};
use crate::vlanes::{BackendKind, WIDTHS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Input distribution of the randomized checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Uniform over all 64-bit patterns.
    Bits,
}

impl Distribution {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => rng.gen_range(lo..hi),
            Distribution::Bits => f64::from_bits(rng.gen()),
        }
    }

    /// Default sampling range of each binary64 function.
    pub fn default_for(f: F64Fn) -> Self {
        match f {
            F64Fn::Exp2 => Distribution::Uniform { lo: -20.0, hi: 20.0 },
            F64Fn::Log => Distribution::Uniform { lo: 0.125, hi: 8.0 },
        }
    }
}

/// Chunk `c` of a seeded stream; chunks are independent of each other.
fn chunk_rng(seed: u64, c: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(c);
    rng
}

fn samples(dist: Distribution, n: u64, seed: u64, c: u64) -> Vec<f64> {
    let mut rng = chunk_rng(seed, c);
    let len = CHUNK.min(n - c * CHUNK);
    (0..len).map(|_| dist.sample(&mut rng)).collect()
}

fn chunks(n: u64) -> u64 {
    n.div_ceil(CHUNK)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub function: KernelId,
    pub distribution: Distribution,
    pub n: u64,
    pub seed: u64,
    pub modes: Vec<String>,
    /// Per mode, lanes the fast path settled.
    pub decided: Vec<u64>,
    pub undecided: Vec<u64>,
    /// Decided lanes that differ from the oracle.
    pub violations: u64,
    pub examples: Vec<Mismatch>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl SoundnessReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Undecided lanes over all modes and inputs.
    pub fn undecided_rate(&self) -> f64 {
        self.undecided.iter().sum::<u64>() as f64 / (self.n * self.modes.len() as u64) as f64
    }
}

/// Checks every lane the fast path decides against the oracle, in all
/// four modes.
pub fn soundness(f: F64Fn, dist: Distribution, n: u64, seed: u64) -> SoundnessReport {
    let t0 = Instant::now();
    let modes = RoundingMode::ALL;
    let mut decided = vec![0u64; 4];
    let mut violations = 0;
    let mut examples = Vec::new();
    for c in 0..chunks(n) {
        let xs = samples(dist, n, seed, c);
        let mut outs = Vec::new();
        for (k, &m) in modes.iter().enumerate() {
            let mut out = vec![0.0; xs.len()];
            let mut calls = vec![false; xs.len()];
            let nc = kernels_f64::fast_slice(f, BackendKind::best(), 8, m, &xs, &mut out, &mut calls);
            decided[k] += (xs.len() - nc) as u64;
            outs.push((out, calls));
        }
        for (i, &x) in xs.iter().enumerate() {
            if outs.iter().all(|(_, calls)| calls[i]) {
                continue;
            }
            let want = oracle_bits(f.oracle_fn(), x, Format::BINARY64, &modes);
            for (k, &m) in modes.iter().enumerate() {
                let (out, calls) = &outs[k];
                if !calls[i] && out[i].to_bits() != want[k] {
                    violations += 1;
                    if examples.len() < super::DEFAULT_CAP {
                        examples.push(Mismatch::f64(x, m, out[i].to_bits(), want[k]));
                    }
                }
            }
        }
    }
    SoundnessReport {
        function: f.into(),
        distribution: dist,
        n,
        seed,
        modes: mode_names(&modes),
        undecided: decided.iter().map(|d| n - d).collect(),
        decided,
        violations,
        examples,
        wall_time_s: t0.elapsed().as_secs_f64(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalloutStats {
    pub function: KernelId,
    pub distribution: Distribution,
    pub n: u64,
    pub seed: u64,
    pub mode: String,
    pub width: usize,
    pub undecided: u64,
    pub rate: f64,
    /// `histogram[k]`: batches with exactly `k` callout lanes.
    pub histogram: Vec<u64>,
}

impl CalloutStats {
    pub fn log2_rate(&self) -> f64 {
        self.rate.log2()
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "function {}  mode {}  width {}  n {}  seed {}\nundecided {}  rate {:.3e} (2^{:.2})\n\nlanes/batch  batches\n",
            self.function.name(),
            self.mode,
            self.width,
            self.n,
            self.seed,
            self.undecided,
            self.rate,
            self.log2_rate()
        );
        for (k, b) in self.histogram.iter().enumerate() {
            s += &format!("{k:>11}  {b}\n");
        }
        s
    }
}

pub fn callout_stats(
    f: F64Fn,
    dist: Distribution,
    n: u64,
    seed: u64,
    mode: RoundingMode,
    width: usize,
) -> CalloutStats {
    assert!(n >= 1);
    let mut histogram = vec![0u64; width + 1];
    let mut undecided = 0;
    for c in 0..chunks(n) {
        let xs = samples(dist, n, seed, c);
        let mut out = vec![0.0; xs.len()];
        let mut calls = vec![false; xs.len()];
        undecided += kernels_f64::fast_slice(f, BackendKind::best(), width, mode, &xs, &mut out, &mut calls) as u64;
        for b in calls.chunks(width) {
            histogram[b.iter().filter(|&&c| c).count()] += 1;
        }
    }
    CalloutStats {
        function: f.into(),
        distribution: dist,
        n,
        seed,
        mode: mode.short_name().into(),
        width,
        undecided,
        rate: undecided as f64 / n as f64,
        histogram,
    }
}

/// Outcome of a pass/fail check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub function: KernelId,
    pub checked: u64,
    pub failures: u64,
    pub examples: Vec<String>,
}

impl CheckReport {
    fn new(check: &str, function: KernelId) -> Self {
        CheckReport { check: check.into(), function, checked: 0, failures: 0, examples: Vec::new() }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.examples.len() < 20 {
                self.examples.push(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn eval_f32(f: F32Fn, backend: BackendKind, w: usize, mode: RoundingMode, xs: &[f32]) -> Vec<f32> {
    let mut out = vec![0.0; xs.len()];
    kernels_f32::eval_slice(f, backend, w, mode, xs, &mut out);
    out
}

fn eval_f64(f: F64Fn, backend: BackendKind, w: usize, mode: RoundingMode, xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    kernels_f64::eval_slice(f, backend, w, mode, xs, &mut out);
    out
}

/// Exact cases: `2^k` for every integer `k` with a representable result,
/// `log2f(2^k) = k`, and `log(1) = +0`, through the batch entry points.
pub fn exactness(k: KernelId) -> CheckReport {
    let mut r = CheckReport::new("exactness", k);
    let b = BackendKind::best();
    for mode in RoundingMode::ALL {
        match k {
            KernelId::Exp2f | KernelId::Log2f => {
                let f = k.f32_fn().expect("f32 kernel");
                let ks: Vec<i32> = (-149..=127).collect();
                let pows: Vec<f32> = ks.iter().map(|&e| (2f64.powi(e)) as f32).collect();
                let (xs, want): (Vec<f32>, Vec<f32>) = match f {
                    F32Fn::Exp2f => (ks.iter().map(|&e| e as f32).collect(), pows),
                    F32Fn::Log2f => (pows, ks.iter().map(|&e| e as f32).collect()),
                };
                let got = eval_f32(f, b, 16, mode, &xs);
                for i in 0..xs.len() {
                    r.record(got[i].to_bits() == want[i].to_bits(), || {
                        format!("{}({:e}) {} = {:e}", k.name(), xs[i], mode.short_name(), got[i])
                    });
                }
            }
            KernelId::Exp2 => {
                let xs: Vec<f64> = (-1074..=1023).map(|e| e as f64).collect();
                let got = eval_f64(F64Fn::Exp2, b, 8, mode, &xs);
                for (x, y) in xs.iter().zip(&got) {
                    let e = *x as i32;
                    let want = 2f64.powi(e.max(-1022)) * 2f64.powi((e + 1022).min(0));
                    r.record(y.to_bits() == want.to_bits(), || format!("exp2({x}) {} = {y:e}", mode.short_name()));
                }
            }
            KernelId::Log => {
                let got = eval_f64(F64Fn::Log, b, 8, mode, &[1.0; 8]);
                for y in got {
                    r.record(y.to_bits() == 0, || format!("log(1) {} = {y:e}", mode.short_name()));
                }
            }
        }
    }
    r
}

/// `len` consecutive binary32 values from `start` upward.
pub fn ladder_f32(start: f32, len: usize) -> Vec<f32> {
    std::iter::successors(Some(start), |x| Some(x.next_up())).take(len).collect()
}

pub fn ladder_f64(start: f64, len: usize) -> Vec<f64> {
    std::iter::successors(Some(start), |x| Some(x.next_up())).take(len).collect()
}

/// Ladder starting points covering underflow, zero crossings, the
/// neighborhood of 1 and overflow.
pub fn default_ladder_starts(k: KernelId) -> Vec<f64> {
    match k {
        KernelId::Exp2f => vec![-150.5, -(f32::from_bits(500_000) as f64), -1.0, 3.3, 127.99],
        KernelId::Log2f => vec![f32::from_bits(1) as f64, 1.0 - 500_000.0 * 2f64.powi(-24), 7.7, 3.0e38],
        KernelId::Exp2 => vec![-1075.0, -1021.0 - 1e-9, -f64::from_bits(500_000), 0.7, 1023.99999999],
        KernelId::Log => vec![f64::from_bits(1), 1.0 - 500_000.0 * 2f64.powi(-53), 2.0, 1e300],
    }
}

/// Outputs along each ladder are weakly increasing in every mode.
pub fn monotonicity(k: KernelId, starts: &[f64], len: usize) -> CheckReport {
    let mut r = CheckReport::new("monotonicity", k);
    let b = BackendKind::best();
    for &s in starts {
        for mode in RoundingMode::ALL {
            let ys: Vec<f64> = match (k.f32_fn(), k.f64_fn()) {
                (Some(f), _) => {
                    eval_f32(f, b, 16, mode, &ladder_f32(s as f32, len)).iter().map(|&y| y as f64).collect()
                }
                (_, Some(f)) => eval_f64(f, b, 8, mode, &ladder_f64(s, len)),
                _ => unreachable!(),
            };
            for (i, w) in ys.windows(2).enumerate() {
                r.record(w[0] <= w[1], || {
                    format!("{} ladder from {s:e} step {i} {}: {:e} > {:e}", k.name(), mode.short_name(), w[0], w[1])
                });
            }
        }
    }
    r
}

fn consistency_inputs(k: KernelId, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = match k {
        KernelId::Exp2f => (-160.0, 160.0),
        KernelId::Exp2 => (-1100.0, 1100.0),
        KernelId::Log2f | KernelId::Log => (0.0, 16.0),
    };
    let mut xs: Vec<f64> = (0..n)
        .map(|i| match (k.f32_fn().is_some(), i % 2) {
            (true, 0) => f32::from_bits(rng.gen()) as f64,
            (false, 0) => f64::from_bits(rng.gen()),
            _ => rng.gen_range(lo..hi),
        })
        .collect();
    let specials = [0.0, -0.0, 1.0, -1.0, f64::INFINITY, f64::NEG_INFINITY, f64::NAN, f64::MIN_POSITIVE, 5e-324];
    for (x, s) in xs.iter_mut().zip(specials) {
        *x = s;
    }
    xs
}

/// Every backend and width against the reference backend at width 1,
/// which is the scalar entry point; `lanes` inputs split over the four
/// modes. Binary64 kernels compare fast-path values and callout flags.
pub fn consistency(k: KernelId, lanes: u64, seed: u64) -> CheckReport {
    let mut r = CheckReport::new("consistency", k);
    let xs = consistency_inputs(k, lanes as usize, seed);
    let per_mode = xs.len().div_ceil(4);
    for (mode, part) in RoundingMode::ALL.into_iter().zip(xs.chunks(per_mode)) {
        for piece in part.chunks(CHUNK as usize) {
            match (k.f32_fn(), k.f64_fn()) {
                (Some(f), _) => {
                    let x32: Vec<f32> = piece.iter().map(|&x| x as f32).collect();
                    let base = eval_f32(f, BackendKind::Reference, 1, mode, &x32);
                    for backend in BackendKind::available() {
                        for w in WIDTHS {
                            if backend == BackendKind::Reference && w == 1 {
                                continue;
                            }
                            let got = eval_f32(f, backend, w, mode, &x32);
                            for i in 0..x32.len() {
                                r.record(got[i].to_bits() == base[i].to_bits(), || {
                                    format!("{}({:e}) {backend} W={w} {}", k.name(), x32[i], mode.short_name())
                                });
                            }
                        }
                    }
                }
                (_, Some(f)) => {
                    let fast = |backend, w| {
                        let mut out = vec![0.0; piece.len()];
                        let mut calls = vec![false; piece.len()];
                        kernels_f64::fast_slice(f, backend, w, mode, piece, &mut out, &mut calls);
                        (out, calls)
                    };
                    let (bv, bc) = fast(BackendKind::Reference, 1);
                    for backend in BackendKind::available() {
                        for w in WIDTHS {
                            if backend == BackendKind::Reference && w == 1 {
                                continue;
                            }
                            let (v, c) = fast(backend, w);
                            for i in 0..piece.len() {
                                r.record(v[i].to_bits() == bv[i].to_bits() && c[i] == bc[i], || {
                                    format!("{}({:e}) {backend} W={w} {}", k.name(), piece[i], mode.short_name())
                                });
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    r
}
