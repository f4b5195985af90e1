//! Sign-magnitude fixed-point numbers with a 64-bit integer part.
//!
//! A value with `n` limbs is `mag / 2^(64 (n - 1))`: the top limb is the
//! integer part, the rest are fraction limbs. Multiplication drops partial
//! products below the second-lowest kept limb, so it costs at most `n + 1`
//! units of the last limb; division truncates (one unit).

use smallvec::SmallVec;
use std::cmp::Ordering;

pub(crate) type Limbs = SmallVec<[u64; 6]>;

/// Limb storage: growable for arbitrary precision, or a fixed array for the
/// low rungs.
pub(crate) trait Store: Clone + AsRef<[u64]> + AsMut<[u64]> {
    fn zeroed(n: usize) -> Self;
}

impl Store for Limbs {
    fn zeroed(n: usize) -> Self {
        SmallVec::from_elem(0, n)
    }
}

impl<const N: usize> Store for [u64; N] {
    #[inline]
    fn zeroed(n: usize) -> Self {
        debug_assert_eq!(n, N);
        [0; N]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Fx<S = Limbs> {
    pub neg: bool,
    pub mag: S,
}

impl<S: Store> Fx<S> {
    #[inline]
    pub fn limbs(&self) -> &[u64] {
        self.mag.as_ref()
    }

    #[inline]
    fn limbs_mut(&mut self) -> &mut [u64] {
        self.mag.as_mut()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.limbs().len()
    }

    /// Fraction limbs.
    #[inline]
    pub fn frac_limbs(&self) -> usize {
        self.len() - 1
    }

    #[inline]
    pub fn zero(n: usize) -> Self {
        Fx { neg: false, mag: S::zeroed(n) }
    }

    pub fn from_int(n: usize, v: i64) -> Self {
        let mut z = Self::zero(n);
        z.limbs_mut()[n - 1] = v.unsigned_abs();
        z.neg = v < 0;
        z
    }

    pub fn is_zero(&self) -> bool {
        self.limbs().iter().all(|&l| l == 0)
    }

    /// `sig * 2^exp`, truncated toward zero to the fixed-point grid.
    pub fn from_dyadic(n: usize, neg: bool, sig: u128, exp: i64) -> Self {
        let mut z = Self::zero(n);
        z.neg = neg;
        // bit position of the lsb of sig within mag
        let mut pos = exp + 64 * (n as i64 - 1);
        let mut sig = sig;
        if pos < 0 {
            sig = if -pos >= 128 { 0 } else { sig >> (-pos) };
            pos = 0;
        }
        if sig == 0 {
            return z;
        }
        let limb = (pos / 64) as usize;
        let bit = (pos % 64) as u32;
        let parts =
            [(sig << bit) as u64, ((sig << bit) >> 64) as u64, if bit == 0 { 0 } else { (sig >> (128 - bit)) as u64 }];
        let m = z.limbs_mut();
        for (k, &p) in parts.iter().enumerate() {
            if p == 0 {
                continue;
            }
            assert!(limb + k < n, "fixed-point overflow");
            m[limb + k] = p;
        }
        z
    }

    pub fn from_f64(n: usize, x: f64) -> Self {
        if x == 0.0 {
            return Self::zero(n);
        }
        let (neg, sig, exp) = crate::fpbits::unpack_f64(x.to_bits());
        Self::from_dyadic(n, neg, sig as u128, exp)
    }

    /// Approximate value, for starting guesses.
    pub fn to_f64(&self) -> f64 {
        let mut v = 0.0;
        let fl = self.frac_limbs() as i32;
        for (i, &l) in self.limbs().iter().enumerate().rev().take(3) {
            v += l as f64 * 2f64.powi(64 * (i as i32 - fl));
        }
        if self.neg {
            -v
        } else {
            v
        }
    }

    /// Reinterprets at a different limb count and storage, truncating or
    /// zero-extending fraction limbs.
    pub fn resize<T: Store>(&self, n: usize) -> Fx<T> {
        let src = self.limbs();
        let m = src.len();
        let mut z = Fx::<T>::zero(n);
        z.neg = self.neg;
        let dst = z.limbs_mut();
        for i in 0..n.min(m) {
            dst[n - 1 - i] = src[m - 1 - i];
        }
        z
    }

    pub fn neg(mut self) -> Self {
        self.neg = !self.neg;
        self
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.len(), o.len());
        if self.neg == o.neg {
            let mut r = self.clone();
            add_in_place(r.limbs_mut(), o.limbs());
            r
        } else if cmp_mag(self.limbs(), o.limbs()) == Ordering::Less {
            let mut r = o.clone();
            sub_in_place(r.limbs_mut(), self.limbs());
            r
        } else {
            let mut r = self.clone();
            sub_in_place(r.limbs_mut(), o.limbs());
            r
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut t = o.clone();
        t.neg = !t.neg;
        self.add(&t)
    }

    /// Truncated product.
    pub fn mul(&self, o: &Self) -> Self {
        let n = self.len();
        debug_assert_eq!(n, o.len());
        let (a, b) = (self.limbs(), o.limbs());
        let fl = n - 1;
        let mut prod: SmallVec<[u64; 16]> = SmallVec::from_elem(0, 2 * n);
        for i in 0..n {
            let ai = a[i] as u128;
            if ai == 0 {
                continue;
            }
            let jstart = (fl.saturating_sub(1)).saturating_sub(i);
            let mut carry: u128 = 0;
            for j in jstart..n {
                let k = i + j;
                let t = ai * b[j] as u128 + prod[k] as u128 + carry;
                prod[k] = t as u64;
                carry = t >> 64;
            }
            let mut k = i + n;
            while carry != 0 && k < 2 * n {
                let t = prod[k] as u128 + carry;
                prod[k] = t as u64;
                carry = t >> 64;
                k += 1;
            }
        }
        debug_assert!(prod[fl + n..].iter().all(|&l| l == 0), "fixed-point overflow in mul");
        let mut r = Self::zero(n);
        r.limbs_mut().copy_from_slice(&prod[fl..fl + n]);
        r.neg = self.neg != o.neg && !r.is_zero();
        r
    }

    pub fn square(&self) -> Self {
        self.mul(self)
    }

    pub fn mul_small(&self, m: u64) -> Self {
        let mut r = self.clone();
        let mut carry: u128 = 0;
        for l in r.limbs_mut().iter_mut() {
            let t = *l as u128 * m as u128 + carry;
            *l = t as u64;
            carry = t >> 64;
        }
        debug_assert_eq!(carry, 0, "fixed-point overflow in mul_small");
        r
    }

    /// Truncated quotient by a small positive integer.
    pub fn div_small(&self, d: u64) -> Self {
        let mut r = self.clone();
        if d >> 32 == 0 {
            // two 64-by-32 steps per limb avoid the slow 128-bit division
            let mut rem = 0u64;
            for l in r.limbs_mut().iter_mut().rev() {
                let hi = (rem << 32) | (*l >> 32);
                let qh = hi / d;
                rem = hi % d;
                let lo = (rem << 32) | (*l & 0xffff_ffff);
                let ql = lo / d;
                rem = lo % d;
                *l = (qh << 32) | ql;
            }
        } else {
            let mut rem: u128 = 0;
            for l in r.limbs_mut().iter_mut().rev() {
                let cur = (rem << 64) | *l as u128;
                *l = (cur / d as u128) as u64;
                rem = cur % d as u128;
            }
        }
        r
    }

    #[cfg(test)]
    pub fn shr(&self, bits: u32) -> Self {
        let mut r = self.clone();
        shr_in_place(r.limbs_mut(), bits);
        r
    }

    #[cfg(test)]
    pub fn shl(&self, bits: u32) -> Self {
        let mut r = self.clone();
        let mag = r.limbs_mut();
        let n = mag.len();
        let limb = (bits / 64) as usize;
        let b = bits % 64;
        for i in (0..n).rev() {
            let src = i as isize - limb as isize;
            let lo = if src >= 0 { mag[src as usize] } else { 0 };
            let lo2 = if src >= 1 && b != 0 { mag[src as usize - 1] >> (64 - b) } else { 0 };
            mag[i] = if b == 0 { lo } else { (lo << b) | lo2 };
        }
        r
    }

    /// Integer part of a nonnegative value.
    pub fn int_part(&self) -> u64 {
        self.limbs()[self.len() - 1]
    }

    /// Top `k` fraction bits (k <= 64) of a nonnegative value.
    pub fn top_frac_bits(&self, k: u32) -> u64 {
        let fl = self.frac_limbs();
        if k == 0 || fl == 0 {
            return 0;
        }
        self.limbs()[fl - 1] >> (64 - k)
    }

    pub fn clear_int_and_top_frac(&mut self, k: u32) {
        let n = self.len();
        let m = self.limbs_mut();
        m[n - 1] = 0;
        if k > 0 {
            m[n - 2] &= u64::MAX >> k;
        }
    }

    /// Reciprocal by Newton iteration; `self` must be positive and at
    /// least 2^-60.
    pub fn recip(&self) -> Self {
        let n = self.len();
        let approx = 1.0 / self.to_f64();
        let mut r = Self::from_f64(n, approx);
        let two = Self::from_int(n, 2);
        // each step roughly doubles the number of correct bits
        let steps = ((64 * n) as f64 / 40.0).log2().ceil() as usize + 2;
        for _ in 0..steps {
            let e = two.sub(&self.mul(&r));
            r = r.mul(&e);
        }
        r
    }

    /// Position of the most significant set bit counted from the lsb of
    /// the magnitude, or None for zero.
    #[cfg(test)]
    pub fn msb(&self) -> Option<u32> {
        for (i, &l) in self.limbs().iter().enumerate().rev() {
            if l != 0 {
                return Some(64 * i as u32 + 63 - l.leading_zeros());
            }
        }
        None
    }
}

pub(crate) fn cmp_mag(a: &[u64], b: &[u64]) -> Ordering {
    for i in (0..a.len()).rev() {
        match a[i].cmp(&b[i]) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

pub(crate) fn add_in_place(a: &mut [u64], b: &[u64]) -> bool {
    let mut carry = false;
    for i in 0..a.len() {
        let (s1, c1) = a[i].overflowing_add(b[i]);
        let (s2, c2) = s1.overflowing_add(carry as u64);
        a[i] = s2;
        carry = c1 || c2;
    }
    carry
}

pub(crate) fn sub_in_place(a: &mut [u64], b: &[u64]) -> bool {
    let mut borrow = false;
    for i in 0..a.len() {
        let (s1, c1) = a[i].overflowing_sub(b[i]);
        let (s2, c2) = s1.overflowing_sub(borrow as u64);
        a[i] = s2;
        borrow = c1 || c2;
    }
    borrow
}

pub(crate) fn shr_in_place(a: &mut [u64], bits: u32) {
    let n = a.len();
    let limb = (bits / 64) as usize;
    let b = bits % 64;
    for i in 0..n {
        let src = i + limb;
        let lo = if src < n { a[src] } else { 0 };
        let hi = if src + 1 < n && b != 0 { a[src + 1] << (64 - b) } else { 0 };
        a[i] = if b == 0 { lo } else { (lo >> b) | hi };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type F = Fx<Limbs>;

    #[test]
    fn basic_arith() {
        let a = F::from_f64(3, 1.5);
        let b = F::from_f64(3, -0.25);
        assert_eq!(a.add(&b).to_f64(), 1.25);
        assert_eq!(b.sub(&a).to_f64(), -1.75);
        assert_eq!(a.mul(&b).to_f64(), -0.375);
        assert_eq!(a.div_small(3).mul_small(3).to_f64(), 1.5);
        assert_eq!(a.shr(3).to_f64(), 0.1875);
        assert_eq!(a.shr(3).shl(3), a);
        let r = F::from_f64(3, 3.0).recip();
        assert!((r.to_f64() - 1.0 / 3.0).abs() < 1e-17);
        let one = F::from_int(3, 1);
        let err = one.sub(&r.mul_small(3));
        assert!(err.msb().unwrap_or(0) < 5);
        let big = F::from_f64(3, 12345.678);
        let d = (1u64 << 40) + 17;
        assert!(big.div_small(d).mul_small(d).sub(&big).msb().unwrap_or(0) < 42);
        assert_eq!(big.div_small(1 << 20).to_f64(), 12345.678 / (1u64 << 20) as f64);
    }

    #[test]
    fn array_storage_matches_vec() {
        let a = F::from_f64(3, 1.0 / 3.0).mul(&F::from_f64(3, 0.7));
        let b = Fx::<[u64; 3]>::from_f64(3, 1.0 / 3.0).mul(&Fx::<[u64; 3]>::from_f64(3, 0.7));
        assert_eq!(a.limbs(), b.limbs());
        assert_eq!(a.resize::<[u64; 3]>(3).mag, b.mag);
    }

    #[test]
    fn from_dyadic_truncates() {
        let x = F::from_dyadic(2, false, 3, -65);
        // 3 * 2^-65 = 1 * 2^-64 + 2^-65; low bit falls off
        assert_eq!(x.limbs()[0], 1);
    }
}
