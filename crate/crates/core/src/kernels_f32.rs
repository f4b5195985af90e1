//! Correctly rounded binary32 `exp2f` and `log2f`.
//!
//! Both kernels evaluate in binary64 and perform a single final conversion
//! under the requested mode. The instruction path is identical for every
//! input; specials are patched in by a final select.

use crate::coeffgen::{tables, Exp2fTables, Log2fTables};
use crate::fpbits::RoundingMode;
use crate::vlanes::{Backend, BackendKind, F32Batch, F64Batch, I64Batch, LaneBatch, Reference};
use serde::{Deserialize, Serialize};

pub const EXP2F_CLAMP: f64 = 260.0;
/// 1.5 * 2^49: adding it leaves round(8x) in the low mantissa bits.
pub const EXP2F_SHIFTER: f64 = 1.5 * (1u64 << 49) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum F32Fn {
    Exp2f,
    Log2f,
}

impl F32Fn {
    pub const ALL: [F32Fn; 2] = [F32Fn::Exp2f, F32Fn::Log2f];

    pub fn name(self) -> &'static str {
        match self {
            F32Fn::Exp2f => "exp2f",
            F32Fn::Log2f => "log2f",
        }
    }

    pub fn oracle_fn(self) -> crate::oracle::FnId {
        match self {
            F32Fn::Exp2f => crate::oracle::FnId::Exp2,
            F32Fn::Log2f => crate::oracle::FnId::Log2,
        }
    }
}

/// Intermediate values of one `exp2f` lane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exp2fTrace {
    pub xd: f64,
    pub r: f64,
    /// `clamp(xd) + shifter`
    pub d_index: f64,
    pub index: i64,
    pub nd: f64,
    pub t: f64,
    pub poly: f64,
    pub sticky: bool,
    pub result64: f64,
    pub result: f32,
}

/// Intermediate values of one `log2f` lane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Log2fTrace {
    pub xd: f64,
    pub mx: f64,
    pub ex: f64,
    pub index: i64,
    pub r: f64,
    pub poly: f64,
    pub result64: f64,
    pub result: f32,
}

struct Exp2fStages<const W: usize> {
    xd: F64Batch<W>,
    r: F64Batch<W>,
    idx: I64Batch<W>,
    nd: F64Batch<W>,
    t: F64Batch<W>,
    poly: F64Batch<W>,
    sticky: I64Batch<W>,
    result64: F64Batch<W>,
    out: F32Batch<W>,
}

#[inline(always)]
fn splat<const W: usize>(v: f64) -> F64Batch<W> {
    LaneBatch([v; W])
}

#[inline(always)]
fn exp2f_stages<B: Backend, const W: usize>(x: F32Batch<W>, mode: RoundingMode, tab: &Exp2fTables) -> Exp2fStages<W> {
    let xd = B::widen(x);
    let xc = B::clamp(xd, -EXP2F_CLAMP, EXP2F_CLAMP);
    let r = B::reduce_frac(xc, 3);
    let idx = B::shifter_index(xc, EXP2F_SHIFTER, 3);
    let nd = B::sub_rn(xc, r);
    let t = B::permute_table(&tab.t, idx);
    let c = &tab.c;
    let mut p = splat(c[6]);
    for k in (0..6).rev() {
        p = B::fma_rn(p, r, splat(c[k]));
    }
    let poly = B::mul_rn(p, t);
    let mut res = B::fma_rz(poly, r, t);
    let sticky = B::shift_right(B::mask_to_int(B::compare_neq_mask(r, splat(0.0))), 63);
    res = B::or_bits(res, sticky);
    res = B::scalef(res, nd);
    // ±Inf and NaN: 2^x is scalef(1, x) exactly
    let special = B::is_nan_mask(B::sub_rn(xd, xd));
    res = B::select(special, B::scalef(splat(1.0), xd), res);
    res = B::select(B::is_nan_mask(res), splat(f64::NAN), res);
    let out = B::convert_to_f32(res, mode);
    Exp2fStages { xd, r, idx, nd, t, poly, sticky, result64: res, out }
}

struct Log2fStages<const W: usize> {
    xd: F64Batch<W>,
    mx: F64Batch<W>,
    ex: F64Batch<W>,
    idx: I64Batch<W>,
    r: F64Batch<W>,
    poly: F64Batch<W>,
    result64: F64Batch<W>,
    out: F32Batch<W>,
}

#[inline(always)]
fn log2f_stages<B: Backend, const W: usize>(x: F32Batch<W>, mode: RoundingMode, tab: &Log2fTables) -> Log2fStages<W> {
    let xd = B::widen(x);
    let mx = B::getmant_075_15(xd);
    let ex = B::sub_rn(B::getexp(xd), B::getexp(mx));
    let idx = B::and_int(B::shift_right(B::bits_of(xd), 52 - 3), 7);
    let r = B::fma_rn(mx, splat(1.5), splat(-1.5));
    let mut p = B::permute_table(&tab.c[9], idx);
    for d in (0..9).rev() {
        p = B::fma_rn(p, r, B::permute_table(&tab.c[d], idx));
    }
    let ex_rz = B::add_rz(ex, r);
    let mut res = B::fma_rz(p, r, ex_rz);
    // zero, negative, infinite and NaN inputs: getexp gives -Inf/+Inf and
    // getmant gives NaN for negative inputs
    let special = B::is_nan_mask(B::sub_rn(xd, xd)).or(B::compare_le_mask(xd, splat(0.0)));
    let sv = B::add_rn(B::getexp(xd), B::mul_rn(mx, splat(0.0)));
    res = B::select(special, sv, res);
    res = B::select(B::is_nan_mask(res), splat(f64::NAN), res);
    let out = B::convert_to_f32(res, mode);
    Log2fStages { xd, mx, ex, idx, r, poly: p, result64: res, out }
}

#[inline(always)]
pub fn exp2f_kernel<B: Backend, const W: usize>(x: F32Batch<W>, mode: RoundingMode, tab: &Exp2fTables) -> F32Batch<W> {
    exp2f_stages::<B, W>(x, mode, tab).out
}

#[inline(always)]
pub fn log2f_kernel<B: Backend, const W: usize>(x: F32Batch<W>, mode: RoundingMode, tab: &Log2fTables) -> F32Batch<W> {
    log2f_stages::<B, W>(x, mode, tab).out
}

#[inline(always)]
fn run<B: Backend, const W: usize>(f: F32Fn, mode: RoundingMode, xs: &[f32], out: &mut [f32]) {
    assert_eq!(xs.len(), out.len());
    let tabs = tables();
    let k = |b: F32Batch<W>| match f {
        F32Fn::Exp2f => exp2f_kernel::<B, W>(b, mode, &tabs.exp2f),
        F32Fn::Log2f => log2f_kernel::<B, W>(b, mode, &tabs.log2f),
    };
    let mut xi = xs.chunks_exact(W);
    let mut oi = out.chunks_exact_mut(W);
    for (x, o) in (&mut xi).zip(&mut oi) {
        let b = LaneBatch(<[f32; W]>::try_from(x).expect("chunk of W"));
        o.copy_from_slice(&k(b).0);
    }
    let (xr, or) = (xi.remainder(), oi.into_remainder());
    if !xr.is_empty() {
        let mut pad = [1.0f32; W];
        pad[..xr.len()].copy_from_slice(xr);
        or.copy_from_slice(&k(LaneBatch(pad)).0[..xr.len()]);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn run_avx512<const W: usize>(f: F32Fn, mode: RoundingMode, xs: &[f32], out: &mut [f32]) {
    run::<crate::vlanes::avx512::Avx512, W>(f, mode, xs, out)
}

fn run_on<const W: usize>(backend: BackendKind, f: F32Fn, mode: RoundingMode, xs: &[f32], out: &mut [f32]) {
    match backend {
        BackendKind::Reference => run::<Reference, W>(f, mode, xs, out),
        #[cfg(target_arch = "x86_64")]
        BackendKind::Avx512 => {
            assert!(backend.is_available(), "avx512 backend not supported on this host");
            // SAFETY: the required CPU features were just checked
            unsafe { run_avx512::<W>(f, mode, xs, out) }
        }
        #[cfg(not(target_arch = "x86_64"))]
        BackendKind::Avx512 => panic!("avx512 backend not supported on this host"),
    }
}

/// Evaluates `f` over a slice in batches of `width` lanes. `width` must be
/// one of [`crate::vlanes::WIDTHS`].
pub fn eval_slice(f: F32Fn, backend: BackendKind, width: usize, mode: RoundingMode, xs: &[f32], out: &mut [f32]) {
    match width {
        1 => run_on::<1>(backend, f, mode, xs, out),
        4 => run_on::<4>(backend, f, mode, xs, out),
        8 => run_on::<8>(backend, f, mode, xs, out),
        16 => run_on::<16>(backend, f, mode, xs, out),
        w => panic!("unsupported width {w}"),
    }
}

/// Batch `exp2f` on the fastest available backend.
pub fn cr_exp2f<const W: usize>(x: F32Batch<W>, mode: RoundingMode) -> F32Batch<W> {
    cr_exp2f_on(BackendKind::best(), x, mode)
}

pub fn cr_exp2f_on<const W: usize>(backend: BackendKind, x: F32Batch<W>, mode: RoundingMode) -> F32Batch<W> {
    let mut out = [0.0f32; W];
    run_on::<W>(backend, F32Fn::Exp2f, mode, &x.0, &mut out);
    LaneBatch(out)
}

/// Batch `log2f` on the fastest available backend.
pub fn cr_log2f<const W: usize>(x: F32Batch<W>, mode: RoundingMode) -> F32Batch<W> {
    cr_log2f_on(BackendKind::best(), x, mode)
}

pub fn cr_log2f_on<const W: usize>(backend: BackendKind, x: F32Batch<W>, mode: RoundingMode) -> F32Batch<W> {
    let mut out = [0.0f32; W];
    run_on::<W>(backend, F32Fn::Log2f, mode, &x.0, &mut out);
    LaneBatch(out)
}

pub fn cr_exp2f_scalar(x: f32, mode: RoundingMode) -> f32 {
    cr_exp2f::<1>(LaneBatch([x]), mode).0[0]
}

pub fn cr_log2f_scalar(x: f32, mode: RoundingMode) -> f32 {
    cr_log2f::<1>(LaneBatch([x]), mode).0[0]
}

pub fn eval_scalar(f: F32Fn, x: f32, mode: RoundingMode) -> f32 {
    match f {
        F32Fn::Exp2f => cr_exp2f_scalar(x, mode),
        F32Fn::Log2f => cr_log2f_scalar(x, mode),
    }
}

/// Every intermediate of the reference pipeline for one input.
pub fn exp2f_trace(x: f32, mode: RoundingMode) -> Exp2fTrace {
    let s = exp2f_stages::<Reference, 1>(LaneBatch([x]), mode, &tables().exp2f);
    let xc = s.xd.0[0].clamp(-EXP2F_CLAMP, EXP2F_CLAMP);
    Exp2fTrace {
        xd: s.xd.0[0],
        r: s.r.0[0],
        d_index: xc + EXP2F_SHIFTER,
        index: s.idx.0[0],
        nd: s.nd.0[0],
        t: s.t.0[0],
        poly: s.poly.0[0],
        sticky: s.sticky.0[0] != 0,
        result64: s.result64.0[0],
        result: s.out.0[0],
    }
}

pub fn log2f_trace(x: f32, mode: RoundingMode) -> Log2fTrace {
    let s = log2f_stages::<Reference, 1>(LaneBatch([x]), mode, &tables().log2f);
    Log2fTrace {
        xd: s.xd.0[0],
        mx: s.mx.0[0],
        ex: s.ex.0[0],
        index: s.idx.0[0],
        r: s.r.0[0],
        poly: s.poly.0[0],
        result64: s.result64.0[0],
        result: s.out.0[0],
    }
}
