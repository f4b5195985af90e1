//! Exact software fused multiply-add under any rounding mode.
//!
//! Slow but total: handles subnormals, overflow and signed zeros. Used
//! where the error-free-transformation sequences are not exact.

use crate::fpbits::{round_to_format, unpack_f64, Format, RoundingMode};

pub fn fma(a: f64, b: f64, c: f64, mode: RoundingMode) -> f64 {
    if a.is_nan() || b.is_nan() || c.is_nan() || a.is_infinite() || b.is_infinite() || c.is_infinite() {
        // infinite and NaN results do not depend on the rounding direction
        return a.mul_add(b, c);
    }
    let neg_p = a.is_sign_negative() != b.is_sign_negative();
    if a == 0.0 || b == 0.0 {
        if c != 0.0 {
            return c;
        }
        return signed_zero_sum(neg_p, c.is_sign_negative(), mode);
    }
    let (_, ma, ea) = unpack_f64(a.to_bits());
    let (_, mb, eb) = unpack_f64(b.to_bits());
    let pa = ma as u128 * mb as u128;
    let ep = ea + eb;
    if c == 0.0 {
        return f64::from_bits(round_to_format(neg_p, pa, ep, false, Format::BINARY64, mode));
    }
    let (neg_c, mc, ec) = unpack_f64(c.to_bits());
    let top = |m: u128, e: i64| e + 128 - m.leading_zeros() as i64;
    let (x, xe, xneg, y, ye, yneg) = if top(pa, ep) >= top(mc as u128, ec) {
        (pa, ep, neg_p, mc as u128, ec, neg_c)
    } else {
        (mc as u128, ec, neg_c, pa, ep, neg_p)
    };
    // put the larger operand's leading bit at position 125
    let lsh = 125 - (127 - x.leading_zeros() as i64);
    let xs = x << lsh;
    let e0 = xe - lsh;
    let d = ye - e0;
    let (ys, sticky) = if d >= 0 {
        // cannot overflow: top(y) <= top(x)
        (y << d, false)
    } else if -d >= 128 {
        (0, true)
    } else {
        let s = (-d) as u32;
        (y >> s, y & ((1u128 << s) - 1) != 0)
    };
    if xneg == yneg {
        let sum = xs + ys;
        f64::from_bits(round_to_format(xneg, sum, e0, sticky, Format::BINARY64, mode))
    } else {
        // equal leading positions can still leave y larger than x
        let (mut diff, neg) = if ys > xs { (ys - xs, yneg) } else { (xs - ys, xneg) };
        if sticky {
            // y is far below x here, so diff > 0
            diff -= 1;
        }
        if diff == 0 && !sticky {
            return signed_zero_sum(false, true, mode);
        }
        f64::from_bits(round_to_format(neg, diff, e0, sticky, Format::BINARY64, mode))
    }
}

/// Sign of an exact zero sum per IEEE-754 6.3.
fn signed_zero_sum(neg_a: bool, neg_b: bool, mode: RoundingMode) -> f64 {
    if neg_a == neg_b {
        if neg_a {
            -0.0
        } else {
            0.0
        }
    } else if mode == RoundingMode::TowardNegative {
        -0.0
    } else {
        0.0
    }
}
