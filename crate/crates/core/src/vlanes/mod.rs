//! Lane-parallel helper operations with portable bit-exact contracts.
//!
//! [`Backend`] carries one method per helper operation. Its default methods
//! are the normative reference: a plain loop over lanes calling the scalar
//! definitions in [`scalar`]. Accelerated backends override them and must
//! agree with the reference bit for bit, except that NaN results are only
//! required to be NaN (payload and sign are unspecified for intermediate
//! operations; kernels canonicalize NaN outputs explicitly).

pub mod scalar;
pub mod softfma;

#[cfg(target_arch = "x86_64")]
pub mod avx512;

use crate::fpbits::{convert_f64_to_f32, RoundingMode};
use std::fmt;

/// Supported batch widths.
pub const WIDTHS: [usize; 4] = [1, 4, 8, 16];

/// Fixed-width ordered collection of lanes.
#[derive(Clone, Copy, PartialEq)]
pub struct LaneBatch<T, const W: usize>(pub [T; W]);

pub type F64Batch<const W: usize> = LaneBatch<f64, W>;
pub type F32Batch<const W: usize> = LaneBatch<f32, W>;
pub type I64Batch<const W: usize> = LaneBatch<i64, W>;

impl<T: Copy, const W: usize> LaneBatch<T, W> {
    #[inline(always)]
    pub fn splat(v: T) -> Self {
        LaneBatch([v; W])
    }

    #[inline(always)]
    pub fn map<U: Copy + Default>(self, f: impl Fn(T) -> U) -> LaneBatch<U, W> {
        let mut out = [U::default(); W];
        for i in 0..W {
            out[i] = f(self.0[i]);
        }
        LaneBatch(out)
    }

    #[inline(always)]
    pub fn zip<U: Copy, V: Copy + Default>(self, o: LaneBatch<U, W>, f: impl Fn(T, U) -> V) -> LaneBatch<V, W> {
        let mut out = [V::default(); W];
        for i in 0..W {
            out[i] = f(self.0[i], o.0[i]);
        }
        LaneBatch(out)
    }

    pub fn lanes(&self) -> &[T; W] {
        &self.0
    }
}

impl<T: fmt::Debug, const W: usize> fmt::Debug for LaneBatch<T, W> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl<T, const W: usize> From<[T; W]> for LaneBatch<T, W> {
    fn from(a: [T; W]) -> Self {
        LaneBatch(a)
    }
}

/// One boolean per lane.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LaneMask<const W: usize>(pub [bool; W]);

impl<const W: usize> LaneMask<W> {
    pub fn none() -> Self {
        LaneMask([false; W])
    }
    pub fn all(&self) -> bool {
        self.0.iter().all(|&b| b)
    }
    pub fn any(&self) -> bool {
        self.0.iter().any(|&b| b)
    }
    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
    #[inline(always)]
    pub fn or(self, o: Self) -> Self {
        let mut m = self.0;
        for i in 0..W {
            m[i] |= o.0[i];
        }
        LaneMask(m)
    }
    #[inline(always)]
    pub fn and(self, o: Self) -> Self {
        let mut m = self.0;
        for i in 0..W {
            m[i] &= o.0[i];
        }
        LaneMask(m)
    }
    #[inline(always)]
    pub fn not(self) -> Self {
        LaneMask(self.0.map(|b| !b))
    }
}

/// Bit equality with NaNs compared as a class.
#[inline]
pub fn same_bits(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

macro_rules! lanewise3 {
    ($a:ident, $b:ident, $c:ident, $f:expr) => {{
        let mut out = [0.0f64; W];
        for i in 0..W {
            out[i] = $f($a.0[i], $b.0[i], $c.0[i]);
        }
        LaneBatch(out)
    }};
}

/// The helper operations. Default bodies are the reference semantics.
pub trait Backend: Copy + Default + Send + Sync + fmt::Debug + 'static {
    const NAME: &'static str;

    #[inline(always)]
    fn fma_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>, c: F64Batch<W>) -> F64Batch<W> {
        lanewise3!(a, b, c, scalar::fma_rn)
    }
    #[inline(always)]
    fn fma_rz<const W: usize>(a: F64Batch<W>, b: F64Batch<W>, c: F64Batch<W>) -> F64Batch<W> {
        lanewise3!(a, b, c, scalar::fma_rz)
    }
    #[inline(always)]
    fn add_rz<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        a.zip(b, scalar::add_rz)
    }
    #[inline(always)]
    fn mul_rz<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        a.zip(b, scalar::mul_rz)
    }
    #[inline(always)]
    fn add_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        a.zip(b, |x, y| x + y)
    }
    #[inline(always)]
    fn sub_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        a.zip(b, |x, y| x - y)
    }
    #[inline(always)]
    fn mul_rn<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        a.zip(b, |x, y| x * y)
    }
    /// Clamp to [lo, hi]; NaN lanes pass through.
    #[inline(always)]
    fn clamp<const W: usize>(x: F64Batch<W>, lo: f64, hi: f64) -> F64Batch<W> {
        x.map(|v| {
            if v < lo {
                lo
            } else if v > hi {
                hi
            } else {
                v
            }
        })
    }
    #[inline(always)]
    fn reduce_frac<const W: usize>(x: F64Batch<W>, k: i32) -> F64Batch<W> {
        x.map(|v| scalar::reduce_frac(v, k))
    }
    #[inline(always)]
    fn shifter_index<const W: usize>(x: F64Batch<W>, magic: f64, bit_count: u32) -> I64Batch<W> {
        x.map(|v| scalar::shifter_index(v, magic, bit_count))
    }
    #[inline(always)]
    fn getmant_075_15<const W: usize>(x: F64Batch<W>) -> F64Batch<W> {
        x.map(scalar::getmant_075_15)
    }
    #[inline(always)]
    fn getexp<const W: usize>(x: F64Batch<W>) -> F64Batch<W> {
        x.map(scalar::getexp)
    }
    #[inline(always)]
    fn scalef<const W: usize>(x: F64Batch<W>, y: F64Batch<W>) -> F64Batch<W> {
        x.zip(y, scalar::scalef)
    }
    /// Lane i receives `table[idx_i mod table.len()]`; table size 8 or 16.
    #[inline(always)]
    fn permute_table<const W: usize>(table: &[f64], idx: I64Batch<W>) -> F64Batch<W> {
        debug_assert!(table.len() == 8 || table.len() == 16);
        let n = table.len() as i64;
        idx.map(|i| table[i.rem_euclid(n) as usize])
    }
    #[inline(always)]
    fn gather64<const W: usize>(table: &[i64], idx: I64Batch<W>) -> I64Batch<W> {
        idx.map(|i| {
            debug_assert!(i >= 0 && (i as usize) < table.len(), "gather index {i} out of range");
            table[i as usize]
        })
    }
    #[inline(always)]
    fn or_bits<const W: usize>(a: F64Batch<W>, b: I64Batch<W>) -> F64Batch<W> {
        a.zip(b, |x, y| f64::from_bits(x.to_bits() | y as u64))
    }
    #[inline(always)]
    fn and_int<const W: usize>(a: I64Batch<W>, b: i64) -> I64Batch<W> {
        a.map(|x| x & b)
    }
    /// Logical right shift of the 64-bit lane pattern.
    #[inline(always)]
    fn shift_right<const W: usize>(a: I64Batch<W>, n: u32) -> I64Batch<W> {
        a.map(|x| ((x as u64) >> n) as i64)
    }
    #[inline(always)]
    fn bits_of<const W: usize>(a: F64Batch<W>) -> I64Batch<W> {
        a.map(|x| x.to_bits() as i64)
    }
    #[inline(always)]
    fn int_to_f64<const W: usize>(a: I64Batch<W>) -> F64Batch<W> {
        a.map(|x| x as f64)
    }
    #[inline(always)]
    fn compare_neq_mask<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> LaneMask<W> {
        let mut m = [false; W];
        for i in 0..W {
            m[i] = a.0[i] != b.0[i];
        }
        LaneMask(m)
    }
    /// `a <= b`; false when either is NaN.
    #[inline(always)]
    fn compare_le_mask<const W: usize>(a: F64Batch<W>, b: F64Batch<W>) -> LaneMask<W> {
        let mut m = [false; W];
        for i in 0..W {
            m[i] = a.0[i] <= b.0[i];
        }
        LaneMask(m)
    }
    /// All-ones lane pattern for true, zero for false.
    #[inline(always)]
    fn mask_to_int<const W: usize>(m: LaneMask<W>) -> I64Batch<W> {
        let mut out = [0i64; W];
        for i in 0..W {
            out[i] = -(m.0[i] as i64);
        }
        LaneBatch(out)
    }
    #[inline(always)]
    fn select<const W: usize>(m: LaneMask<W>, a: F64Batch<W>, b: F64Batch<W>) -> F64Batch<W> {
        let mut out = b.0;
        for i in 0..W {
            if m.0[i] {
                out[i] = a.0[i];
            }
        }
        LaneBatch(out)
    }
    #[inline(always)]
    fn is_nan_mask<const W: usize>(a: F64Batch<W>) -> LaneMask<W> {
        let mut m = [false; W];
        for i in 0..W {
            m[i] = a.0[i].is_nan();
        }
        LaneMask(m)
    }
    #[inline(always)]
    fn widen<const W: usize>(x: F32Batch<W>) -> F64Batch<W> {
        x.map(|v| v as f64)
    }
    #[inline(always)]
    fn convert_to_f32<const W: usize>(x: F64Batch<W>, mode: RoundingMode) -> F32Batch<W> {
        x.map(|v| convert_f64_to_f32(v.into(), mode).to_f32())
    }
}

/// Lane-by-lane scalar loop; the normative backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct Reference;

impl Backend for Reference {
    const NAME: &'static str = "reference";
}

/// Runtime-selectable backend identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Reference,
    Avx512,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Reference => "reference",
            BackendKind::Avx512 => "avx512",
        }
    }

    pub fn is_available(self) -> bool {
        match self {
            BackendKind::Reference => true,
            #[cfg(target_arch = "x86_64")]
            BackendKind::Avx512 => avx512::is_supported(),
            #[cfg(not(target_arch = "x86_64"))]
            BackendKind::Avx512 => false,
        }
    }

    /// Every backend usable on this host, reference first.
    pub fn available() -> Vec<BackendKind> {
        [BackendKind::Reference, BackendKind::Avx512].into_iter().filter(|b| b.is_available()).collect()
    }

    /// Fastest available backend.
    pub fn best() -> BackendKind {
        if BackendKind::Avx512.is_available() {
            BackendKind::Avx512
        } else {
            BackendKind::Reference
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [BackendKind::Reference, BackendKind::Avx512].into_iter().find(|b| b.name() == s)
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests;
