//! Per-lane reference semantics of the vector helper operations.
//!
//! These define the contract; the accelerated backends must reproduce
//! them bit for bit (NaN payloads excepted, see [`super::same_bits`]).

use super::softfma;
use crate::fpbits::{round_to_format, unpack_f64, Format, RoundingMode};

#[inline]
pub fn fma_rn(a: f64, b: f64, c: f64) -> f64 {
    a.mul_add(b, c)
}

/// Unbiased exponent of a finite nonzero value, subnormals normalized.
#[inline]
fn exponent_of(x: f64) -> i64 {
    let (_, m, e) = unpack_f64(x.to_bits());
    e + 63 - m.leading_zeros() as i64
}

#[inline]
fn step_toward_zero(r: f64) -> f64 {
    f64::from_bits(r.to_bits() - 1)
}

#[inline]
fn safe_operand(x: f64) -> bool {
    x == 0.0 || (x.is_finite() && exponent_of(x).abs() <= 480)
}

/// Round-toward-zero fused multiply-add.
///
/// Computes the nearest-even result, recovers the exact residual with
/// error-free transformations and steps one ulp toward zero when the
/// nearest result overshot. Operands outside the window where the
/// transformations are exact go through the software FMA.
pub fn fma_rz(a: f64, b: f64, c: f64) -> f64 {
    let r1 = a.mul_add(b, c);
    if !(safe_operand(a) && safe_operand(b) && safe_operand(c))
        || a == 0.0
        || b == 0.0
        || r1 == 0.0
        || !r1.is_finite()
        || exponent_of(r1) < -900
    {
        return softfma::fma(a, b, c, RoundingMode::TowardZero);
    }
    let (u1, u2) = two_prod(a, b);
    let (alpha1, alpha2) = two_sum(c, u2);
    let (beta1, beta2) = two_sum(u1, alpha1);
    let gamma = (beta1 - r1) + beta2;
    let r2 = gamma + alpha2;
    let r3 = (gamma - r2) + alpha2;
    let residual_neg = if r2 != 0.0 { r2 < 0.0 } else { r3 < 0.0 };
    let residual_zero = r2 == 0.0 && r3 == 0.0;
    if !residual_zero && residual_neg != (r1 < 0.0) {
        step_toward_zero(r1)
    } else {
        r1
    }
}

pub fn add_rz(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        if a.is_finite() && b.is_finite() {
            return f64::MAX.copysign(s);
        }
        return s;
    }
    if s == 0.0 {
        // exact; zero sign for RZ matches RN
        return s;
    }
    let (_, t) = two_sum(a, b);
    if t != 0.0 && (t < 0.0) != (s < 0.0) {
        step_toward_zero(s)
    } else {
        s
    }
}

pub fn mul_rz(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p == 0.0 || !p.is_finite() || !(safe_operand(a) && safe_operand(b)) || exponent_of(p) < -900 {
        return softfma::fma(a, b, -0.0, RoundingMode::TowardZero);
    }
    let e = a.mul_add(b, -p);
    if e != 0.0 && (e < 0.0) != (p < 0.0) {
        step_toward_zero(p)
    } else {
        p
    }
}

#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let t = (a - (s - bb)) + (b - bb);
    (s, t)
}

#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// x - RN(x * 2^k) * 2^-k, exact. ±Inf gives +0.
pub fn reduce_frac(x: f64, k: i32) -> f64 {
    if x.is_nan() {
        return x + x;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let scale = pow2(k);
    let r = if x.abs() >= 2f64.powi(52) { 0.0 } else { x - (x * scale).round_ties_even() / scale };
    // exact cancellation gives +0 in every case
    r + 0.0
}

/// Low `bit_count` bits of the significand of RN(x + magic).
pub fn shifter_index(x: f64, magic: f64, bit_count: u32) -> i64 {
    let s = x + magic;
    (s.to_bits() & ((1u64 << bit_count) - 1)) as i64
}

/// Normalized mantissa in [0.75, 1.5); negative inputs give NaN.
pub fn getmant_075_15(x: f64) -> f64 {
    if x.is_nan() {
        return x + x;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < 0.0 {
        return f64::NAN;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let (_, m, _) = unpack_f64(x.to_bits());
    let frac = (m << (m.leading_zeros() - 11)) & ((1 << 52) - 1);
    if frac >> 51 == 1 {
        // mantissa >= 1.5: halve it
        f64::from_bits(frac | (1022u64 << 52))
    } else {
        f64::from_bits(frac | (1023u64 << 52))
    }
}

/// floor(log2|x|) as f64; ±0 → -Inf, ±Inf → +Inf.
pub fn getexp(x: f64) -> f64 {
    if x.is_nan() {
        return x + x;
    }
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    exponent_of(x) as f64
}

/// x * 2^floor(y), rounded to nearest even.
pub fn scalef(x: f64, y: f64) -> f64 {
    if x.is_nan() {
        return x + x;
    }
    if y.is_nan() {
        return y + y;
    }
    if x == 0.0 {
        return if y == f64::INFINITY { f64::NAN } else { x };
    }
    if x.is_infinite() {
        return if y == f64::NEG_INFINITY { f64::NAN } else { x };
    }
    if y == f64::INFINITY {
        return f64::INFINITY.copysign(x);
    }
    if y == f64::NEG_INFINITY {
        return 0.0f64.copysign(x);
    }
    let n = y.floor().clamp(-4000.0, 4000.0) as i64;
    let (neg, m, e) = unpack_f64(x.to_bits());
    f64::from_bits(round_to_format(neg, m as u128, e + n, false, Format::BINARY64, RoundingMode::NearestEven))
}

#[inline]
pub const fn pow2(k: i32) -> f64 {
    assert!(k >= -1022 && k <= 1023);
    f64::from_bits(((k + 1023) as u64) << 52)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fma_rn_is_fused() {
        assert_eq!(fma_rn(1.0, 1.0, 1.0), 2.0);
        let t = 2f64.powi(-30);
        assert_eq!(fma_rn(t, t, -(t * t)), 0.0);
        let a = 1.0 + 2f64.powi(-28);
        // a^2 = 1 + 2^-27 + 2^-56; the last term rounds away
        assert_eq!(fma_rn(a, a, 0.0), 1.0 + 2f64.powi(-27));
    }

    #[test]
    fn rz_examples() {
        assert_eq!(add_rz(1.0, 2f64.powi(-60)), 1.0);
        assert_eq!(add_rz(1.0, -2f64.powi(-60)), 1.0 - f64::EPSILON / 2.0);
        assert_eq!(fma_rz(-1.0, 2f64.powi(-60), -1.0), -1.0);
        assert_eq!(mul_rz(1.0 + f64::EPSILON, 1.0 + f64::EPSILON), 1.0 + 2.0 * f64::EPSILON);
        assert_eq!(add_rz(f64::MAX, f64::MAX), f64::MAX);
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce_frac(0.3, 3), 0.3 - 0.25);
        assert_eq!(reduce_frac(2.0, 3), 0.0);
        assert_eq!(reduce_frac(f64::INFINITY, 3).to_bits(), 0);
        assert_eq!(reduce_frac(f64::NEG_INFINITY, 3).to_bits(), 0);
        assert!(reduce_frac(f64::NAN, 3).is_nan());
        // tie -0.0625*8 = -0.5 rounds to even (0)
        assert_eq!(reduce_frac(-0.0625, 3), -0.0625);
    }

    #[test]
    fn shifter_examples() {
        let magic = 1.5 * 2f64.powi(49);
        assert_eq!(shifter_index(2.6, magic, 3), 5);
        assert_eq!(shifter_index(0.0, magic, 3), 0);
        assert_eq!(shifter_index(-0.0625, magic, 3), 0);
        assert_eq!(shifter_index(-0.1875, magic, 3), 6);
    }

    #[test]
    fn getmant_getexp_examples() {
        assert_eq!(getmant_075_15(6.0), 0.75);
        assert_eq!(getmant_075_15(1.25), 1.25);
        assert!(getmant_075_15(-3.0).is_nan());
        assert_eq!(getmant_075_15(-0.0), 1.0);
        assert_eq!(getmant_075_15(f64::INFINITY), 1.0);
        assert_eq!(getmant_075_15(f64::from_bits(3)), 0.75);
        assert_eq!(getexp(6.0), 2.0);
        assert_eq!(getexp(2f64.powi(-149)), -149.0);
        assert_eq!(getexp(f64::from_bits(1)), -1074.0);
        assert_eq!(getexp(-0.0), f64::NEG_INFINITY);
        assert_eq!(getexp(f64::NEG_INFINITY), f64::INFINITY);
    }

    #[test]
    fn scalef_examples() {
        assert_eq!(scalef(1.5, 3.7), 12.0);
        assert_eq!(scalef(1.0, f64::NEG_INFINITY).to_bits(), 0);
        assert_eq!(scalef(1.0, 1.0e9), f64::INFINITY);
        assert_eq!(scalef(1.0, -1.0e9), 0.0);
        assert_eq!(scalef(1.5, -1074.0), 2f64.powi(-1073));
        assert_eq!(scalef(-3.0, -2.5), -0.375);
    }
}
