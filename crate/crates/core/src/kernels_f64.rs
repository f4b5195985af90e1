//! Correctly rounded binary64 `exp2` and `log`.
//!
//! A double-double fast path runs on every lane. A per-lane rounding test
//! then decides whether the fast value rounds the same way as every value
//! within its error bound; lanes that fail are recomputed by the scalar
//! oracle.

pub mod dd;

use crate::coeffgen::{tables, Exp2dTables, LogdTable, LOG_CORR_BITS, LOG_CORR_SCALE, LOG_SCALE, LOG_TABLE_SIZE};
use crate::fpbits::{next_down_f64, next_up_f64, Format, RoundingMode};
use crate::oracle::{ziv_correctly_round, FnId, OracleError};
use crate::vlanes::scalar::{pow2, two_sum};
use crate::vlanes::{Backend, BackendKind, F64Batch, I64Batch, LaneBatch, LaneMask, Reference};
use dd::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

pub const EXP2_CLAMP: f64 = 1100.0;
/// 1.5 * 2^52: adding it to `4096 x` leaves round(4096 x) in the low bits.
pub const EXP2_SHIFTER: f64 = 1.5 * (1u64 << 52) as f64;
/// Below this the scaled result may be subnormal and is left to the callout.
pub const EXP2_TINY: f64 = -1021.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F64Fn {
    Exp2,
    Log,
}

impl F64Fn {
    pub const ALL: [F64Fn; 2] = [F64Fn::Exp2, F64Fn::Log];

    pub fn name(self) -> &'static str {
        match self {
            F64Fn::Exp2 => "exp2",
            F64Fn::Log => "log",
        }
    }

    pub fn oracle_fn(self) -> FnId {
        match self {
            F64Fn::Exp2 => FnId::Exp2,
            F64Fn::Log => FnId::Log,
        }
    }
}

/// Decomposition `x = N + (256 i1 + 16 i2 + i3) / 4096 + R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Exp2Decomp {
    /// round(4096 x)
    pub k: i64,
    pub n: i64,
    pub i1: i64,
    pub i2: i64,
    pub i3: i64,
    pub r_bits: u64,
}

impl Exp2Decomp {
    pub fn r(&self) -> f64 {
        f64::from_bits(self.r_bits)
    }
}

/// Scalar form of the argument split; `|x| <= 1100`.
pub fn exp2_decompose(x: f64) -> Exp2Decomp {
    let r = crate::vlanes::scalar::reduce_frac(x, 12);
    let k = ((x - r) * 4096.0) as i64;
    let idx = crate::vlanes::scalar::shifter_index(x * 4096.0, EXP2_SHIFTER, 12);
    debug_assert_eq!(idx, k.rem_euclid(4096));
    Exp2Decomp { k, n: k >> 12, i1: idx >> 8, i2: (idx >> 4) & 15, i3: idx & 15, r_bits: r.to_bits() }
}

/// Tables rearranged for lane lookups.
#[derive(Clone, Debug)]
pub struct Exp2dPlanes {
    /// `[table][hi/lo][index]`
    pub t: [[[f64; 16]; 2]; 3],
    pub c1: DD,
    pub q: Vec<f64>,
    pub eps: f64,
}

impl Exp2dPlanes {
    pub fn new(tab: &Exp2dTables) -> Self {
        let plane = |src: &[[f64; 2]; 16], h: usize| std::array::from_fn(|i| src[i][h]);
        let t = [&tab.t1, &tab.t2, &tab.t3].map(|s| [plane(s, 0), plane(s, 1)]);
        Exp2dPlanes { t, c1: DD::from_pair(tab.c1), q: tab.q.clone(), eps: tab.eps }
    }
}

const CORR_MASK: i64 = (1 << LOG_CORR_BITS) - 1;
const CORR_BIAS: i64 = 1 << (LOG_CORR_BITS - 1);

#[derive(Clone, Debug)]
pub struct LogdPlanes {
    /// Bit pattern of `rcp[i]` with the biased table residual in its zero
    /// low bits.
    pub rcp_corr: [i64; LOG_TABLE_SIZE],
    pub l: [i64; LOG_TABLE_SIZE],
    pub ln2: DD,
    pub q: Vec<f64>,
    pub eps_rel: f64,
    pub eps_abs: f64,
}

impl LogdPlanes {
    pub fn new(tab: &LogdTable) -> Self {
        LogdPlanes {
            rcp_corr: std::array::from_fn(|i| {
                let bits = tab.rcp[i].to_bits() as i64;
                assert!(bits & CORR_MASK == 0 && tab.corr[i].abs() < CORR_BIAS);
                bits | (tab.corr[i] + CORR_BIAS)
            }),
            l: tab.l,
            ln2: DD::from_pair(tab.ln2),
            q: tab.q.clone(),
            eps_rel: tab.eps_rel,
            eps_abs: tab.eps_abs,
        }
    }
}

pub fn exp2d_planes() -> &'static Exp2dPlanes {
    static P: OnceLock<Exp2dPlanes> = OnceLock::new();
    P.get_or_init(|| Exp2dPlanes::new(&tables().exp2d))
}

pub fn logd_planes() -> &'static LogdPlanes {
    static P: OnceLock<LogdPlanes> = OnceLock::new();
    P.get_or_init(|| LogdPlanes::new(&tables().logd))
}

/// Result of the per-lane rounding test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundTestOutcome<const W: usize> {
    pub fast_result: F64Batch<W>,
    pub decided: LaneMask<W>,
    pub error_bound: f64,
}

/// `hi + l` rounded under `mode`.
fn add_round(hi: f64, l: f64, mode: RoundingMode) -> f64 {
    let (s, e) = two_sum(hi, l);
    match mode {
        RoundingMode::NearestEven => s,
        RoundingMode::TowardPositive if e > 0.0 => next_up_f64(s),
        RoundingMode::TowardNegative if e < 0.0 => next_down_f64(s),
        RoundingMode::TowardZero if e != 0.0 && (e < 0.0) != (s < 0.0) => {
            if s > 0.0 {
                next_down_f64(s)
            } else {
                next_up_f64(s)
            }
        }
        _ => s,
    }
}

/// Rounds every lane of `v` and reports whether `v ± bound` round alike.
fn round_lanes<const W: usize>(v: &DDBatch<W>, bound: &[f64; W], mode: RoundingMode) -> (F64Batch<W>, LaneMask<W>) {
    let mut out = [0.0; W];
    let mut dec = [false; W];
    for i in 0..W {
        let (hi, lo) = (v.hi.0[i], v.lo.0[i]);
        let a1 = add_round(hi, lo - bound[i], mode);
        let a2 = add_round(hi, lo + bound[i], mode);
        out[i] = a1;
        dec[i] = a1 == a2;
    }
    (LaneBatch(out), LaneMask(dec))
}

/// Rounding test with a relative bound `eps * |hi|` on every lane.
pub fn round_test<const W: usize>(v: DDBatch<W>, eps: f64, mode: RoundingMode) -> RoundTestOutcome<W> {
    let bound = v.hi.0.map(|h| eps * h.abs());
    let (fast_result, decided) = round_lanes(&v, &bound, mode);
    RoundTestOutcome { fast_result, decided, error_bound: eps }
}

/// Correctly rounded value from the oracle.
pub fn callout(f: F64Fn, x: f64, mode: RoundingMode) -> Result<f64, OracleError> {
    ziv_correctly_round(f.oracle_fn(), x, Format::BINARY64, mode).map(|r| f64::from_bits(r.rounded_bits))
}

fn callout_or_panic(f: F64Fn, x: f64, mode: RoundingMode) -> f64 {
    callout(f, x, mode).unwrap_or_else(|e| panic!("callout failed: {e}"))
}

/// Fast-path output of one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastPath<const W: usize> {
    /// Final value on lanes not marked for callout.
    pub value: F64Batch<W>,
    pub callout: LaneMask<W>,
}

#[inline(always)]
fn splat<const W: usize>(v: f64) -> F64Batch<W> {
    LaneBatch([v; W])
}

#[inline(always)]
fn lookup_dd<B: Backend, const W: usize>(planes: &[[f64; 16]; 2], idx: I64Batch<W>) -> DDBatch<W> {
    DDBatch { hi: B::permute_table(&planes[0], idx), lo: B::permute_table(&planes[1], idx) }
}

#[inline(always)]
pub fn exp2_fast<B: Backend, const W: usize>(x: F64Batch<W>, mode: RoundingMode, p: &Exp2dPlanes) -> FastPath<W> {
    let xc = B::clamp(x, -EXP2_CLAMP, EXP2_CLAMP);
    let r = B::reduce_frac(xc, 12);
    let idx = B::shifter_index(B::mul_rn(xc, splat(4096.0)), EXP2_SHIFTER, 12);
    let nd = B::sub_rn(xc, r);
    let i3 = B::and_int(idx, 15);
    let i2 = B::and_int(B::shift_right(idx, 4), 15);
    let i1 = B::shift_right(idx, 8);
    let t12 = dd_mul_b::<B, W>(lookup_dd::<B, W>(&p.t[0], i1), lookup_dd::<B, W>(&p.t[1], i2));
    let t = dd_mul_b::<B, W>(t12, lookup_dd::<B, W>(&p.t[2], i3));
    let q = &p.q;
    let mut qv = splat(q[q.len() - 1]);
    for &c in q[..q.len() - 1].iter().rev() {
        qv = B::fma_rn(qv, r, splat(c));
    }
    let u = B::mul_rn(r, qv);
    let w = dd_add_f64_b::<B, W>(DDBatch::splat(p.c1), u);
    let z = dd_mul_f64_b::<B, W>(w, r);
    let poly = dd_add_f64_b::<B, W>(z, splat(1.0));
    let v = dd_mul_b::<B, W>(t, poly);

    let mut bound = [0.0; W];
    let mut exact = [false; W];
    for i in 0..W {
        exact[i] = r.0[i] == 0.0 && idx.0[i] == 0;
        bound[i] = if exact[i] { 0.0 } else { p.eps * v.hi.0[i].abs() };
    }
    let (a, decided) = round_lanes(&v, &bound, mode);
    let mut res = B::scalef(a, nd);
    let special = B::is_nan_mask(B::sub_rn(x, x));
    let directed_down = matches!(mode, RoundingMode::TowardZero | RoundingMode::TowardNegative);
    let mut call = [false; W];
    for i in 0..W {
        if directed_down && res.0[i] == f64::INFINITY && !special.0[i] {
            res.0[i] = f64::MAX;
        }
        let tiny = xc.0[i] <= EXP2_TINY && !(exact[i] && xc.0[i] >= -1074.0);
        call[i] = !special.0[i] && (!decided.0[i] || tiny);
    }
    res = B::select(special, B::scalef(splat(1.0), x), res);
    res = B::select(B::is_nan_mask(res), splat(f64::NAN), res);
    FastPath { value: res, callout: LaneMask(call) }
}

#[inline(always)]
pub fn log_fast<B: Backend, const W: usize>(x: F64Batch<W>, mode: RoundingMode, p: &LogdPlanes) -> FastPath<W> {
    let mx = B::getmant_075_15(x);
    let e = B::sub_rn(B::getexp(x), B::getexp(mx));
    let i = B::and_int(B::shift_right(B::bits_of(mx), 45), (LOG_TABLE_SIZE - 1) as i64);
    let packed = B::gather64(&p.rcp_corr, i);
    let rcp = B::or_bits(splat(0.0), B::and_int(packed, !CORR_MASK));
    let corr = B::sub_rn(B::int_to_f64(B::and_int(packed, CORR_MASK)), splat(CORR_BIAS as f64));
    let r = B::fma_rn(rcp, mx, splat(-1.0));
    let lbits = B::gather64(&p.l, i);
    let scale = splat(pow2(-LOG_SCALE));
    let l_lo = B::mul_rn(B::int_to_f64(B::and_int(lbits, 0x7ff)), scale);
    let l = DDBatch {
        hi: B::mul_rn(B::int_to_f64(B::and_int(lbits, !0x7ff)), scale),
        lo: B::fma_rn(corr, splat(pow2(-LOG_CORR_SCALE)), l_lo),
    };
    let el = dd_mul_f64_b::<B, W>(DDBatch::splat(p.ln2), e);

    let q = &p.q;
    let mut tv = splat(q[q.len() - 1]);
    for &c in q[1..q.len() - 1].iter().rev() {
        tv = B::fma_rn(tv, r, splat(c));
    }
    let q3 = dd_add_f64_b::<B, W>(DDBatch::splat(DD::new(q[0], 0.0)), B::mul_rn(r, tv));
    let r2 = two_prod_b::<B, W>(r, r);
    let r3 = dd_mul_f64_b::<B, W>(r2, r);
    let cubic = dd_mul_b::<B, W>(r3, q3);
    let half = splat(-0.5);
    let neg_half_r2 = DDBatch { hi: B::mul_rn(r2.hi, half), lo: B::mul_rn(r2.lo, half) };
    let poly = dd_add_f64_b::<B, W>(dd_add_b::<B, W>(neg_half_r2, cubic), r);
    let v = dd_add_b::<B, W>(dd_add_b::<B, W>(el, l), poly);

    let mut bound = [0.0; W];
    for k in 0..W {
        let abs = if lbits.0[k] != 0 { p.eps_abs } else { 0.0 };
        bound[k] = p.eps_rel * v.hi.0[k].abs() + abs;
    }
    let (mut res, decided) = round_lanes(&v, &bound, mode);
    let special = B::is_nan_mask(B::sub_rn(x, x)).or(B::compare_le_mask(x, splat(0.0)));
    let mut call = [false; W];
    for k in 0..W {
        // ln 1 is the only zero result
        if res.0[k] == 0.0 {
            res.0[k] = 0.0;
        }
        call[k] = !special.0[k] && !decided.0[k];
    }
    let sv = B::add_rn(B::getexp(x), B::mul_rn(mx, splat(0.0)));
    res = B::select(special, sv, res);
    res = B::select(B::is_nan_mask(res), splat(f64::NAN), res);
    FastPath { value: res, callout: LaneMask(call) }
}

#[inline(always)]
fn fast<B: Backend, const W: usize>(f: F64Fn, x: F64Batch<W>, mode: RoundingMode) -> FastPath<W> {
    match f {
        F64Fn::Exp2 => exp2_fast::<B, W>(x, mode, exp2d_planes()),
        F64Fn::Log => log_fast::<B, W>(x, mode, logd_planes()),
    }
}

/// Fast path plus callouts for the failing lanes only.
#[inline(always)]
pub fn kernel<B: Backend, const W: usize>(f: F64Fn, x: F64Batch<W>, mode: RoundingMode) -> F64Batch<W> {
    let mut fp = fast::<B, W>(f, x, mode);
    for i in 0..W {
        if fp.callout.0[i] {
            fp.value.0[i] = callout_or_panic(f, x.0[i], mode);
        }
    }
    fp.value
}

/// Slice driver. With `calls` given, callouts are skipped and their lanes
/// flagged instead. Returns the number of callout lanes.
#[inline(always)]
fn run<B: Backend, const W: usize>(
    f: F64Fn,
    mode: RoundingMode,
    xs: &[f64],
    out: &mut [f64],
    mut calls: Option<&mut [bool]>,
) -> usize {
    assert_eq!(xs.len(), out.len());
    if let Some(c) = &calls {
        assert_eq!(c.len(), xs.len());
    }
    let mut n = 0;
    for (j, x) in xs.chunks(W).enumerate() {
        let mut pad = [1.0f64; W];
        pad[..x.len()].copy_from_slice(x);
        let fp = fast::<B, W>(f, LaneBatch(pad), mode);
        let base = j * W;
        for i in 0..x.len() {
            let mut v = fp.value.0[i];
            if fp.callout.0[i] {
                n += 1;
                match calls.as_deref_mut() {
                    Some(c) => c[base + i] = true,
                    None => v = callout_or_panic(f, x[i], mode),
                }
            } else if let Some(c) = calls.as_deref_mut() {
                c[base + i] = false;
            }
            out[base + i] = v;
        }
    }
    n
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn run_avx512<const W: usize>(
    f: F64Fn,
    mode: RoundingMode,
    xs: &[f64],
    out: &mut [f64],
    calls: Option<&mut [bool]>,
) -> usize {
    run::<crate::vlanes::avx512::Avx512, W>(f, mode, xs, out, calls)
}

fn run_on<const W: usize>(
    backend: BackendKind,
    f: F64Fn,
    mode: RoundingMode,
    xs: &[f64],
    out: &mut [f64],
    calls: Option<&mut [bool]>,
) -> usize {
    match backend {
        BackendKind::Reference => run::<Reference, W>(f, mode, xs, out, calls),
        #[cfg(target_arch = "x86_64")]
        BackendKind::Avx512 => {
            assert!(backend.is_available(), "avx512 backend not supported on this host");
            // SAFETY: the required CPU features were just checked
            unsafe { run_avx512::<W>(f, mode, xs, out, calls) }
        }
        #[cfg(not(target_arch = "x86_64"))]
        BackendKind::Avx512 => panic!("avx512 backend not supported on this host"),
    }
}

fn dispatch(
    backend: BackendKind,
    width: usize,
    f: F64Fn,
    mode: RoundingMode,
    xs: &[f64],
    out: &mut [f64],
    calls: Option<&mut [bool]>,
) -> usize {
    match width {
        1 => run_on::<1>(backend, f, mode, xs, out, calls),
        4 => run_on::<4>(backend, f, mode, xs, out, calls),
        8 => run_on::<8>(backend, f, mode, xs, out, calls),
        16 => run_on::<16>(backend, f, mode, xs, out, calls),
        w => panic!("unsupported width {w}"),
    }
}

/// Evaluates `f` over a slice in batches of `width` lanes, callouts
/// included. Returns the number of lanes that went to the callout.
pub fn eval_slice(
    f: F64Fn,
    backend: BackendKind,
    width: usize,
    mode: RoundingMode,
    xs: &[f64],
    out: &mut [f64],
) -> usize {
    dispatch(backend, width, f, mode, xs, out, None)
}

/// Fast path only: `out` holds the final value wherever `callout` is false.
pub fn fast_slice(
    f: F64Fn,
    backend: BackendKind,
    width: usize,
    mode: RoundingMode,
    xs: &[f64],
    out: &mut [f64],
    callout: &mut [bool],
) -> usize {
    dispatch(backend, width, f, mode, xs, out, Some(callout))
}

pub fn cr_exp2_on<const W: usize>(backend: BackendKind, x: F64Batch<W>, mode: RoundingMode) -> F64Batch<W> {
    let mut out = [0.0; W];
    run_on::<W>(backend, F64Fn::Exp2, mode, &x.0, &mut out, None);
    LaneBatch(out)
}

pub fn cr_log_on<const W: usize>(backend: BackendKind, x: F64Batch<W>, mode: RoundingMode) -> F64Batch<W> {
    let mut out = [0.0; W];
    run_on::<W>(backend, F64Fn::Log, mode, &x.0, &mut out, None);
    LaneBatch(out)
}

/// Batch `exp2` on the fastest available backend.
pub fn cr_exp2<const W: usize>(x: F64Batch<W>, mode: RoundingMode) -> F64Batch<W> {
    cr_exp2_on(BackendKind::best(), x, mode)
}

/// Batch `log` on the fastest available backend.
pub fn cr_log<const W: usize>(x: F64Batch<W>, mode: RoundingMode) -> F64Batch<W> {
    cr_log_on(BackendKind::best(), x, mode)
}

pub fn cr_exp2_scalar(x: f64, mode: RoundingMode) -> f64 {
    cr_exp2::<1>(LaneBatch([x]), mode).0[0]
}

pub fn cr_log_scalar(x: f64, mode: RoundingMode) -> f64 {
    cr_log::<1>(LaneBatch([x]), mode).0[0]
}

pub fn eval_scalar(f: F64Fn, x: f64, mode: RoundingMode) -> f64 {
    match f {
        F64Fn::Exp2 => cr_exp2_scalar(x, mode),
        F64Fn::Log => cr_log_scalar(x, mode),
    }
}

/// Whether the fast path of the reference backend settles `x` without a callout.
pub fn fast_path_decides(f: F64Fn, x: f64, mode: RoundingMode) -> bool {
    !fast::<Reference, 1>(f, LaneBatch([x]), mode).callout.0[0]
}
