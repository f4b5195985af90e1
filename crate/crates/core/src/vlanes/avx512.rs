//! AVX-512 backend: static rounding, getmant/getexp/scalef/reduce and
//! permutes straight from the instruction set.
//!
//! The methods of [`Avx512`] must only run on hosts where
//! [`is_supported`] is true; the kernel dispatchers guarantee that.

use super::{Backend, F32Batch, F64Batch, I64Batch, LaneBatch, LaneMask};
use crate::fpbits::RoundingMode;
use std::arch::x86_64::*;

pub fn is_supported() -> bool {
    is_x86_feature_detected!("avx512f") && is_x86_feature_detected!("avx512dq") && is_x86_feature_detected!("avx512vl")
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Avx512;

const RZ: i32 = _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC;
const RN: i32 = _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC;
const RU: i32 = _MM_FROUND_TO_POS_INF | _MM_FROUND_NO_EXC;
const RD: i32 = _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC;

#[inline(always)]
const fn chunks(w: usize) -> usize {
    w.div_ceil(8)
}

#[inline(always)]
const fn tail_mask(w: usize) -> u8 {
    if w >= 8 {
        0xff
    } else {
        ((1u16 << w) - 1) as u8
    }
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn ld<const W: usize>(a: &[f64; W], c: usize) -> __m512d {
    if W >= 8 {
        _mm512_loadu_pd(a.as_ptr().add(c * 8))
    } else {
        _mm512_maskz_loadu_pd(tail_mask(W), a.as_ptr())
    }
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn st<const W: usize>(out: &mut [f64; W], c: usize, v: __m512d) {
    if W >= 8 {
        _mm512_storeu_pd(out.as_mut_ptr().add(c * 8), v)
    } else {
        _mm512_mask_storeu_pd(out.as_mut_ptr(), tail_mask(W), v)
    }
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn ldi<const W: usize>(a: &[i64; W], c: usize) -> __m512i {
    if W >= 8 {
        _mm512_loadu_si512(a.as_ptr().add(c * 8) as *const _)
    } else {
        _mm512_maskz_loadu_epi64(tail_mask(W), a.as_ptr())
    }
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn sti<const W: usize>(out: &mut [i64; W], c: usize, v: __m512i) {
    if W >= 8 {
        _mm512_storeu_si512(out.as_mut_ptr().add(c * 8) as *mut _, v)
    } else {
        _mm512_mask_storeu_epi64(out.as_mut_ptr(), tail_mask(W), v)
    }
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn mask_of<const W: usize>(m: &LaneMask<W>, c: usize) -> __mmask8 {
    let mut k = 0u8;
    for j in 0..8.min(W) {
        k |= (m.0[c * 8 + j] as u8) << j;
    }
    k
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn put_mask<const W: usize>(m: &mut LaneMask<W>, c: usize, k: __mmask8) {
    for j in 0..8.min(W) {
        m.0[c * 8 + j] = (k >> j) & 1 == 1;
    }
}

macro_rules! f64_op {
    ($name:ident, ($($arg:ident),*), |$($v:ident),*| $body:expr) => {
        #[inline]
        #[target_feature(enable = "avx512f,avx512dq,avx512vl")]
        unsafe fn $name<const W: usize>($($arg: F64Batch<W>),*) -> F64Batch<W> {
            let mut out = [0.0f64; W];
            for c in 0..chunks(W) {
                $(let $v = ld(&$arg.0, c);)*
                st(&mut out, c, $body);
            }
            LaneBatch(out)
        }
    };
}

f64_op!(fma_rn, (a, b, cc), |va, vb, vc| _mm512_fmadd_pd(va, vb, vc));
f64_op!(fma_rz, (a, b, cc), |va, vb, vc| _mm512_fmadd_round_pd::<RZ>(va, vb, vc));
f64_op!(add_rz, (a, b), |va, vb| _mm512_add_round_pd::<RZ>(va, vb));
f64_op!(mul_rz, (a, b), |va, vb| _mm512_mul_round_pd::<RZ>(va, vb));
f64_op!(add_rn, (a, b), |va, vb| _mm512_add_pd(va, vb));
f64_op!(sub_rn, (a, b), |va, vb| _mm512_sub_pd(va, vb));
f64_op!(mul_rn, (a, b), |va, vb| _mm512_mul_pd(va, vb));
f64_op!(getexp, (a), |va| _mm512_getexp_pd(va));
f64_op!(scalef, (a, b), |va, vb| {
    let s = _mm512_scalef_round_pd::<RN>(va, vb);
    // some implementations return Inf for scalef(NaN, +Inf)
    let nan = _mm512_cmp_pd_mask::<_CMP_UNORD_Q>(va, va);
    _mm512_mask_blend_pd(nan, s, _mm512_add_pd(va, va))
});
f64_op!(getmant, (a), |va| {
    let m = _mm512_getmant_pd::<_MM_MANT_NORM_P75_1P5, _MM_MANT_SIGN_NAN>(va);
    // -0 maps to +1.0 like +0
    let zero = _mm512_cmp_pd_mask::<_CMP_EQ_OQ>(va, _mm512_setzero_pd());
    _mm512_mask_blend_pd(zero, m, _mm512_set1_pd(1.0))
});
f64_op!(reduce3, (a), |va| {
    let r = _mm512_reduce_pd::<0x38>(va);
    // ±Inf reduce to +0
    let inf = _mm512_cmp_pd_mask::<_CMP_EQ_OQ>(_mm512_abs_pd(va), _mm512_set1_pd(f64::INFINITY));
    _mm512_mask_blend_pd(inf, r, _mm512_setzero_pd())
});

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn clamp<const W: usize>(x: F64Batch<W>, lo: f64, hi: f64) -> F64Batch<W> {
    let mut out = [0.0f64; W];
    let (vlo, vhi) = (_mm512_set1_pd(lo), _mm512_set1_pd(hi));
    for c in 0..chunks(W) {
        // max/min return the second operand when either is NaN
        let v = _mm512_max_pd(vlo, ld(&x.0, c));
        st(&mut out, c, _mm512_min_pd(vhi, v));
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn shifter_index<const W: usize>(x: F64Batch<W>, magic: f64, bits: u32) -> I64Batch<W> {
    let mut out = [0i64; W];
    let vm = _mm512_set1_pd(magic);
    let mask = _mm512_set1_epi64(((1u64 << bits) - 1) as i64);
    for c in 0..chunks(W) {
        let s = _mm512_add_pd(ld(&x.0, c), vm);
        sti(&mut out, c, _mm512_and_si512(_mm512_castpd_si512(s), mask));
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn permute<const W: usize>(table: &[f64], idx: I64Batch<W>) -> F64Batch<W> {
    let mut out = [0.0f64; W];
    let lo = _mm512_loadu_pd(table.as_ptr());
    if table.len() == 8 {
        for c in 0..chunks(W) {
            st(&mut out, c, _mm512_permutexvar_pd(ldi(&idx.0, c), lo));
        }
    } else {
        let hi = _mm512_loadu_pd(table.as_ptr().add(8));
        for c in 0..chunks(W) {
            st(&mut out, c, _mm512_permutex2var_pd(lo, ldi(&idx.0, c), hi));
        }
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn gather<const W: usize>(table: &[i64], idx: I64Batch<W>) -> I64Batch<W> {
    let mut out = [0i64; W];
    for c in 0..chunks(W) {
        let vi = ldi(&idx.0, c);
        let g = if W >= 8 {
            _mm512_i64gather_epi64::<8>(vi, table.as_ptr())
        } else {
            _mm512_mask_i64gather_epi64::<8>(_mm512_setzero_si512(), tail_mask(W), vi, table.as_ptr())
        };
        sti(&mut out, c, g);
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn or_bits<const W: usize>(a: F64Batch<W>, b: I64Batch<W>) -> F64Batch<W> {
    let mut out = [0.0f64; W];
    for c in 0..chunks(W) {
        let v = _mm512_or_si512(_mm512_castpd_si512(ld(&a.0, c)), ldi(&b.0, c));
        st(&mut out, c, _mm512_castsi512_pd(v));
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn int_to_f64<const W: usize>(a: I64Batch<W>) -> F64Batch<W> {
    let mut out = [0.0f64; W];
    for c in 0..chunks(W) {
        st(&mut out, c, _mm512_cvtepi64_pd(ldi(&a.0, c)));
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn cmp_neq<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> LaneMask<W> {
    let mut m = LaneMask([false; W]);
    for c in 0..chunks(W) {
        put_mask(&mut m, c, _mm512_cmp_pd_mask::<_CMP_NEQ_UQ>(ld(&a.0, c), ld(&b.0, c)));
    }
    m
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn cmp_le<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> LaneMask<W> {
    let mut m = LaneMask([false; W]);
    for c in 0..chunks(W) {
        put_mask(&mut m, c, _mm512_cmp_pd_mask::<_CMP_LE_OQ>(ld(&a.0, c), ld(&b.0, c)));
    }
    m
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn is_nan<const W: usize>(a: F64Batch<W>) -> LaneMask<W> {
    let mut m = LaneMask([false; W]);
    for c in 0..chunks(W) {
        let v = ld(&a.0, c);
        put_mask(&mut m, c, _mm512_cmp_pd_mask::<_CMP_UNORD_Q>(v, v));
    }
    m
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn select<const W: usize>(m: LaneMask<W>, a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
    let mut out = [0.0f64; W];
    for c in 0..chunks(W) {
        st(&mut out, c, _mm512_mask_blend_pd(mask_of(&m, c), ld(&b.0, c), ld(&a.0, c)));
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn widen<const W: usize>(x: F32Batch<W>) -> F64Batch<W> {
    let mut out = [0.0f64; W];
    for c in 0..chunks(W) {
        let v = if W >= 8 {
            _mm256_loadu_ps(x.0.as_ptr().add(c * 8))
        } else {
            _mm256_maskz_loadu_ps(tail_mask(W), x.0.as_ptr())
        };
        st(&mut out, c, _mm512_cvtps_pd(v));
    }
    LaneBatch(out)
}

#[inline]
#[target_feature(enable = "avx512f,avx512dq,avx512vl")]
unsafe fn narrow<const W: usize, const R: i32>(x: F64Batch<W>) -> F32Batch<W> {
    let mut out = [0.0f32; W];
    for c in 0..chunks(W) {
        let v = _mm512_cvt_roundpd_ps::<R>(ld(&x.0, c));
        if W >= 8 {
            _mm256_storeu_ps(out.as_mut_ptr().add(c * 8), v)
        } else {
            _mm256_mask_storeu_ps(out.as_mut_ptr(), tail_mask(W), v)
        }
    }
    LaneBatch(out)
}

impl Backend for Avx512 {
    const NAME: &'static str = "avx512";

    #[inline(always)]
    fn fma_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>, c: F64Batch<W>) -> F64Batch<W> {
        unsafe { fma_rn(a, b, c) }
    }
    #[inline(always)]
    fn fma_rz<const W: usize>(a: F64Batch<W>, b: F64Batch<W>, c: F64Batch<W>) -> F64Batch<W> {
        unsafe { fma_rz(a, b, c) }
    }
    #[inline(always)]
    fn add_rz<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        unsafe { add_rz(a, b) }
    }
    #[inline(always)]
    fn mul_rz<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        unsafe { mul_rz(a, b) }
    }
    #[inline(always)]
    fn add_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        unsafe { add_rn(a, b) }
    }
    #[inline(always)]
    fn sub_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        unsafe { sub_rn(a, b) }
    }
    #[inline(always)]
    fn mul_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        unsafe { mul_rn(a, b) }
    }
    #[inline(always)]
    fn clamp<const W: usize>(x: F64Batch<W>, lo: f64, hi: f64) -> F64Batch<W> {
        unsafe { clamp(x, lo, hi) }
    }
    #[inline(always)]
    fn reduce_frac<const W: usize>(x: F64Batch<W>, k: i32) -> F64Batch<W> {
        if k == 3 {
            unsafe { reduce3(x) }
        } else {
            x.map(|v| super::scalar::reduce_frac(v, k))
        }
    }
    #[inline(always)]
    fn shifter_index<const W: usize>(x: F64Batch<W>, magic: f64, bit_count: u32) -> I64Batch<W> {
        unsafe { shifter_index(x, magic, bit_count) }
    }
    #[inline(always)]
    fn getmant_075_15<const W: usize>(x: F64Batch<W>) -> F64Batch<W> {
        unsafe { getmant(x) }
    }
    #[inline(always)]
    fn getexp<const W: usize>(x: F64Batch<W>) -> F64Batch<W> {
        unsafe { getexp(x) }
    }
    #[inline(always)]
    fn scalef<const W: usize>(x: F64Batch<W>, y: F64Batch<W>) -> F64Batch<W> {
        unsafe { scalef(x, y) }
    }
    #[inline(always)]
    fn permute_table<const W: usize>(table: &[f64], idx: I64Batch<W>) -> F64Batch<W> {
        assert!(table.len() == 8 || table.len() == 16);
        unsafe { permute(table, idx) }
    }
    #[inline(always)]
    fn gather64<const W: usize>(table: &[i64], idx: I64Batch<W>) -> I64Batch<W> {
        debug_assert!(idx.0.iter().all(|&i| i >= 0 && (i as usize) < table.len()));
        unsafe { gather(table, idx) }
    }
    #[inline(always)]
    fn or_bits<const W: usize>(a: F64Batch<W>, b: I64Batch<W>) -> F64Batch<W> {
        unsafe { or_bits(a, b) }
    }
    #[inline(always)]
    fn int_to_f64<const W: usize>(a: I64Batch<W>) -> F64Batch<W> {
        unsafe { int_to_f64(a) }
    }
    #[inline(always)]
    fn compare_neq_mask<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> LaneMask<W> {
        unsafe { cmp_neq(a, b) }
    }
    #[inline(always)]
    fn compare_le_mask<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> LaneMask<W> {
        unsafe { cmp_le(a, b) }
    }
    #[inline(always)]
    fn is_nan_mask<const W: usize>(a: F64Batch<W>) -> LaneMask<W> {
        unsafe { is_nan(a) }
    }
    #[inline(always)]
    fn select<const W: usize>(m: LaneMask<W>, a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        unsafe { select(m, a, b) }
    }
    #[inline(always)]
    fn widen<const W: usize>(x: F32Batch<W>) -> F64Batch<W> {
        unsafe { widen(x) }
    }
    #[inline(always)]
    fn convert_to_f32<const W: usize>(x: F64Batch<W>, mode: RoundingMode) -> F32Batch<W> {
        unsafe {
            match mode {
                RoundingMode::NearestEven => narrow::<W, RN>(x),
                RoundingMode::TowardZero => narrow::<W, RZ>(x),
                RoundingMode::TowardPositive => narrow::<W, RU>(x),
                RoundingMode::TowardNegative => narrow::<W, RD>(x),
            }
        }
    }
}
