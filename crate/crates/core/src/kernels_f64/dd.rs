//! Double-double arithmetic, scalar and lane-parallel.
//!
//! Scalar and batch forms run the same operation sequence, so they agree
//! bit for bit.

use crate::vlanes::scalar::{two_prod, two_sum};
use crate::vlanes::{Backend, F64Batch, LaneBatch};

/// Unevaluated sum `hi + lo`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DD {
    pub hi: f64,
    pub lo: f64,
}

impl DD {
    pub const ZERO: DD = DD { hi: 0.0, lo: 0.0 };
    pub const ONE: DD = DD { hi: 1.0, lo: 0.0 };

    pub const fn new(hi: f64, lo: f64) -> DD {
        DD { hi, lo }
    }

    pub const fn from_pair(p: [f64; 2]) -> DD {
        DD { hi: p[0], lo: p[1] }
    }

    /// `hi == RN(hi + lo)`
    pub fn is_normalized(self) -> bool {
        self.hi + self.lo == self.hi
    }
}

#[inline(always)]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

pub fn dd_add(a: DD, b: DD) -> DD {
    let (s, e) = two_sum(a.hi, b.hi);
    let (t, f) = two_sum(a.lo, b.lo);
    let (s, e) = fast_two_sum(s, e + t);
    let (hi, lo) = fast_two_sum(s, e + f);
    DD { hi, lo }
}

pub fn dd_add_f64(a: DD, b: f64) -> DD {
    let (s, e) = two_sum(a.hi, b);
    let (hi, lo) = fast_two_sum(s, e + a.lo);
    DD { hi, lo }
}

pub fn dd_mul(a: DD, b: DD) -> DD {
    let (p, e) = two_prod(a.hi, b.hi);
    let e = a.lo.mul_add(b.hi, a.hi.mul_add(b.lo, e));
    let (hi, lo) = fast_two_sum(p, e);
    DD { hi, lo }
}

pub fn dd_mul_f64(a: DD, b: f64) -> DD {
    let (p, e) = two_prod(a.hi, b);
    let (hi, lo) = fast_two_sum(p, a.lo.mul_add(b, e));
    DD { hi, lo }
}

/// `a * n` for an integer `|n| < 2^53`.
pub fn dd_mul_scalar(a: DD, n: i64) -> DD {
    assert!(n.unsigned_abs() < 1 << 53);
    dd_mul_f64(a, n as f64)
}

/// Lanes of double-double values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DDBatch<const W: usize> {
    pub hi: F64Batch<W>,
    pub lo: F64Batch<W>,
}

impl<const W: usize> DDBatch<W> {
    pub fn splat(v: DD) -> Self {
        DDBatch { hi: LaneBatch([v.hi; W]), lo: LaneBatch([v.lo; W]) }
    }
    pub fn lane(&self, i: usize) -> DD {
        DD { hi: self.hi.0[i], lo: self.lo.0[i] }
    }
}

#[inline(always)]
fn two_sum_b<B: Backend, const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> (F64Batch<W>, F64Batch<W>) {
    let s = B::add_rn(a, b);
    let bb = B::sub_rn(s, a);
    let t = B::add_rn(B::sub_rn(a, B::sub_rn(s, bb)), B::sub_rn(b, bb));
    (s, t)
}

#[inline(always)]
fn fast_two_sum_b<B: Backend, const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> (F64Batch<W>, F64Batch<W>) {
    let s = B::add_rn(a, b);
    (s, B::sub_rn(b, B::sub_rn(s, a)))
}

#[inline(always)]
pub fn two_prod_b<B: Backend, const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> DDBatch<W> {
    let p = B::mul_rn(a, b);
    let e = B::fma_rn(a, b, B::mul_rn(p, LaneBatch([-1.0; W])));
    DDBatch { hi: p, lo: e }
}

#[inline(always)]
pub fn dd_add_b<B: Backend, const W: usize>(a: DDBatch<W>, b: DDBatch<W>) -> DDBatch<W> {
    let (s, e) = two_sum_b::<B, W>(a.hi, b.hi);
    let (t, f) = two_sum_b::<B, W>(a.lo, b.lo);
    let (s, e) = fast_two_sum_b::<B, W>(s, B::add_rn(e, t));
    let (hi, lo) = fast_two_sum_b::<B, W>(s, B::add_rn(e, f));
    DDBatch { hi, lo }
}

#[inline(always)]
pub fn dd_add_f64_b<B: Backend, const W: usize>(a: DDBatch<W>, b: F64Batch<W>) -> DDBatch<W> {
    let (s, e) = two_sum_b::<B, W>(a.hi, b);
    let (hi, lo) = fast_two_sum_b::<B, W>(s, B::add_rn(e, a.lo));
    DDBatch { hi, lo }
}

#[inline(always)]
pub fn dd_mul_b<B: Backend, const W: usize>(a: DDBatch<W>, b: DDBatch<W>) -> DDBatch<W> {
    let p = two_prod_b::<B, W>(a.hi, b.hi);
    let e = B::fma_rn(a.lo, b.hi, B::fma_rn(a.hi, b.lo, p.lo));
    let (hi, lo) = fast_two_sum_b::<B, W>(p.hi, e);
    DDBatch { hi, lo }
}

#[inline(always)]
pub fn dd_mul_f64_b<B: Backend, const W: usize>(a: DDBatch<W>, b: F64Batch<W>) -> DDBatch<W> {
    let p = two_prod_b::<B, W>(a.hi, b);
    let (hi, lo) = fast_two_sum_b::<B, W>(p.hi, B::fma_rn(a.lo, b, p.lo));
    DDBatch { hi, lo }
}
