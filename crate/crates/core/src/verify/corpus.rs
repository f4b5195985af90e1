//! Hard-case corpora: parsing, replay through the kernels, and generation.
//!
//! A corpus file holds one record per line, `<hex-float>[,<hex-float>]`,
//! the optional second field being the expected round-to-nearest result.
//! `#` starts a comment.

use super::checks::Distribution;
use super::{mode_names, oracle_bits, Coverage, KernelId, Mismatch, VerifyReport};
use crate::fpbits::{Format, RoundingMode};
use crate::hexfloat::{format_f64, parse_f32, parse_f64};
use crate::kernels_f32;
use crate::kernels_f64::{self, F64Fn};
use crate::oracle::{eval_hp, BigFixed};
use crate::vlanes::BackendKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardCaseRecord {
    pub line: usize,
    pub input: f64,
    pub expected: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedCorpus {
    pub records: Vec<HardCaseRecord>,
    /// `line N: message` for every rejected line.
    pub errors: Vec<String>,
}

/// Parses a corpus; values must be exact in `fmt`.
pub fn parse_corpus(text: &str, fmt: Format) -> ParsedCorpus {
    let parse = |s: &str| -> Result<f64, String> {
        if fmt == Format::BINARY32 {
            parse_f32(s).map(|v| v as f64).map_err(|e| e.to_string())
        } else {
            parse_f64(s).map_err(|e| e.to_string())
        }
    };
    let mut out = ParsedCorpus::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let input = fields.next().map(parse).expect("split yields one field");
        let expected = fields.next().map(parse).transpose();
        let extra = fields.next();
        match (input, expected, extra) {
            (Ok(input), Ok(expected), None) => out.records.push(HardCaseRecord { line: n + 1, input, expected }),
            (_, _, Some(_)) => out.errors.push(format!("line {}: more than two fields", n + 1)),
            (Err(e), _, _) | (_, Err(e), _) => out.errors.push(format!("line {}: {e}", n + 1)),
        }
    }
    out
}

/// Batch width used for corpus replay.
pub const REPLAY_WIDTH: usize = 8;

/// Every record sits at a random lane of its own batch, next to random
/// co-resident inputs.
fn replay_inputs(k: KernelId, records: &[HardCaseRecord], seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = match k.f64_fn() {
        Some(f) => Distribution::default_for(f),
        None => Distribution::Uniform { lo: 0.125, hi: 8.0 },
    };
    let mut xs = Vec::with_capacity(records.len() * REPLAY_WIDTH);
    let mut pos = Vec::with_capacity(records.len());
    for r in records {
        let lane = rng.gen_range(0..REPLAY_WIDTH);
        for i in 0..REPLAY_WIDTH {
            if i == lane {
                pos.push(xs.len());
                xs.push(r.input);
            } else {
                xs.push(filler.sample(&mut rng));
            }
        }
    }
    (xs, pos)
}

/// Replays `text` through the full kernel in each of `modes`. Kernel
/// mismatches are counted against the oracle; expected values that
/// disagree with the oracle are listed separately.
pub fn corpus_check(label: &str, text: &str, k: KernelId, modes: &[RoundingMode], seed: u64) -> VerifyReport {
    let t0 = Instant::now();
    let fmt = k.format();
    let parsed = parse_corpus(text, fmt);
    let (xs, pos) = replay_inputs(k, &parsed.records, seed);
    let outs: Vec<Vec<u64>> = modes
        .iter()
        .map(|&m| match (k.f32_fn(), k.f64_fn()) {
            (Some(f), _) => {
                let x32: Vec<f32> = xs.iter().map(|&x| x as f32).collect();
                let mut out = vec![0.0f32; xs.len()];
                kernels_f32::eval_slice(f, BackendKind::best(), REPLAY_WIDTH, m, &x32, &mut out);
                out.iter().map(|y| y.to_bits() as u64).collect()
            }
            (_, Some(f)) => {
                let mut out = vec![0.0; xs.len()];
                kernels_f64::eval_slice(f, BackendKind::best(), REPLAY_WIDTH, m, &xs, &mut out);
                out.iter().map(|y| y.to_bits()).collect()
            }
            _ => unreachable!(),
        })
        .collect();
    let mismatch = |x: f64, m, got: u64, want: u64| {
        if fmt == Format::BINARY32 {
            Mismatch::f32(x as f32, m, got as u32, want as u32)
        } else {
            Mismatch::f64(x, m, got, want)
        }
    };
    let mut count = 0;
    let mut mismatches = Vec::new();
    let mut disagreements = Vec::new();
    for (r, &p) in parsed.records.iter().zip(&pos) {
        let want = oracle_bits(k.oracle_fn(), r.input, fmt, &RoundingMode::ALL);
        if let Some(e) = r.expected {
            let e_bits = if fmt == Format::BINARY32 { (e as f32).to_bits() as u64 } else { e.to_bits() };
            let nan_pair = e.is_nan() && f64::from_bits(want[0]).is_nan() || (fmt == Format::BINARY32 && e.is_nan());
            if e_bits != want[0] && !nan_pair {
                disagreements.push(mismatch(r.input, RoundingMode::NearestEven, e_bits, want[0]));
            }
        }
        for (k, &m) in modes.iter().enumerate() {
            let w = want[RoundingMode::ALL.iter().position(|a| *a == m).expect("mode")];
            if outs[k][p] != w {
                count += 1;
                if mismatches.len() < super::DEFAULT_CAP {
                    mismatches.push(mismatch(r.input, m, outs[k][p], w));
                }
            }
        }
    }
    VerifyReport {
        function: k,
        modes: mode_names(modes),
        inputs_tested: parsed.records.len() as u64,
        mismatch_count: count,
        mismatches,
        coverage: Coverage::Corpus {
            path: label.into(),
            records: parsed.records.len(),
            parse_errors: parsed.errors,
            corpus_disagreements: disagreements,
        },
        wall_time_s: t0.elapsed().as_secs_f64(),
    }
}

/// log2 of the distance from `f(x)` to the nearest rounding boundary of
/// any mode, in binary64 ulps. `None` for exact or non-finite results.
pub fn hardness(f: F64Fn, x: f64) -> Option<f64> {
    let v = eval_hp(f.oracle_fn(), x, 320).ok()?;
    if v.exact || v.is_zero() {
        return None;
    }
    let mut a = v.clone();
    a.neg = false;
    let t = f64::from_bits(a.round(Format::BINARY64, RoundingMode::TowardZero));
    let next = t.next_up();
    if !next.is_finite() {
        return None;
    }
    let ulp = next - t;
    let lu = ulp.log2() as i64;
    let tb = BigFixed::from_f64(t, 320);
    let below = a.sub(&tb);
    let above = BigFixed::from_f64(next, 320).sub(&a);
    let mid = a.sub(&tb.add(&BigFixed::from_parts(false, 1, lu - 1, 320)));
    let dist = [below, above, mid]
        .iter()
        .map(|d| if d.is_zero() { i64::MIN } else { d.leading_exponent() })
        .max_by_key(|&e| std::cmp::Reverse(e))
        .expect("three distances");
    if dist == i64::MIN {
        return None;
    }
    Some((dist - lu) as f64)
}

/// A candidate with the family it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct HardCase {
    pub x: f64,
    pub family: &'static str,
    pub hardness: Option<f64>,
}

fn structured(f: F64Fn) -> Vec<(f64, &'static str)> {
    let mut v = Vec::new();
    match f {
        F64Fn::Exp2 => {
            for j in 53..=1074 {
                for m in [1.0, 3.0, 5.0, 7.0] {
                    let t = m * 2f64.powi(-j.min(1022)) * 2f64.powi((1022 - j).min(0));
                    if t > 0.0 {
                        v.push((t, "tiny x: 2^x just above 1"));
                        v.push((-t, "tiny x: 2^x just below 1"));
                    }
                }
            }
            for m in 0..48u32 {
                let h = (2 * m + 1) as f64;
                v.push((h * 2f64.powi(-53) / std::f64::consts::LN_2, "2^x near a midpoint above 1"));
                v.push((-h * 2f64.powi(-54) / std::f64::consts::LN_2, "2^x near a midpoint below 1"));
            }
            for k in [-1000.0, -100.0, -7.0, -1.0, 1.0, 7.0, 100.0, 1000.0, 1023.0] {
                for j in 20..=52 {
                    let d = 2f64.powi(-j);
                    for x in [k + d, k - d] {
                        if x != k && ((x - k) - d.copysign(x - k)) == 0.0 {
                            v.push((x, "integer plus tiny"));
                        }
                    }
                }
            }
            for k in 0..24 {
                v.push((-1022.0 - k as f64 * 2.21, "subnormal result"));
            }
            v.push((1024.0 - 2f64.powi(-42), "just below overflow"));
        }
        F64Fn::Log => {
            for j in 1..=52 {
                v.push((1.0 + 2f64.powi(-j), "1 + 2^-j"));
            }
            for j in 1..=53 {
                v.push((1.0 - 2f64.powi(-j), "1 - 2^-j"));
            }
            for m in 2..40 {
                v.push((1.0 + m as f64 * f64::EPSILON, "1 + m ulp"));
                v.push((1.0 - m as f64 * f64::EPSILON / 2.0, "1 - m ulp"));
            }
            for k in -1074..=1023 {
                v.push((2f64.powi(k.max(-1022)) * 2f64.powi((k + 1022).min(0)), "power of two"));
            }
            for k in -744..=709 {
                let y = (k as f64).exp();
                if y > 0.0 && y.is_finite() {
                    for x in [y.next_down(), y, y.next_up()] {
                        v.push((x, "near e^k"));
                    }
                }
            }
            v.push((f64::MAX, "largest finite"));
            v.push((f64::from_bits(1), "smallest subnormal"));
        }
    }
    v
}

/// Structured families plus random inputs the fast path cannot decide,
/// keeping those whose result lies within `2^threshold` ulp of a rounding
/// boundary. Subnormal-result `exp2` inputs are kept regardless.
pub fn generate_hard_cases(f: F64Fn, n_random: u64, seed: u64, threshold: f64) -> Vec<HardCase> {
    let mut cands = structured(f);
    let dist = Distribution::default_for(f);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flagged = std::collections::BTreeSet::new();
    let mut left = n_random;
    while left > 0 {
        let n = left.min(super::CHUNK);
        left -= n;
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        for m in RoundingMode::ALL {
            let mut out = vec![0.0; xs.len()];
            let mut calls = vec![false; xs.len()];
            kernels_f64::fast_slice(f, BackendKind::best(), 8, m, &xs, &mut out, &mut calls);
            flagged.extend(xs.iter().zip(&calls).filter(|(_, &c)| c).map(|(x, _)| x.to_bits()));
        }
    }
    cands.extend(flagged.into_iter().map(|b| (f64::from_bits(b), "random, undecided by the fast path")));
    let mut seen = std::collections::HashSet::new();
    cands
        .into_iter()
        .filter(|(x, _)| seen.insert(x.to_bits()))
        .filter_map(|(x, family)| {
            let h = hardness(f, x);
            let keep = family == "subnormal result" || family == "power of two" || h.is_some_and(|h| h <= threshold);
            keep.then_some(HardCase { x, family, hardness: h })
        })
        .collect()
}

/// Corpus text grouped by family; expected values are left to an
/// independent tool.
pub fn format_corpus(cases: &[HardCase], header: &str) -> String {
    let mut s = String::new();
    for l in header.lines() {
        s += &format!("# {l}\n");
    }
    let mut order: Vec<&str> = Vec::new();
    for c in cases {
        if !order.contains(&c.family) {
            order.push(c.family);
        }
    }
    let mut sorted: Vec<&HardCase> = cases.iter().collect();
    sorted.sort_by_key(|c| order.iter().position(|f| *f == c.family));
    let mut last = "";
    for c in sorted {
        if c.family != last {
            s += &format!("# {}\n", c.family);
            last = c.family;
        }
        s += &format_f64(c.x);
        s.push('\n');
    }
    s
}
