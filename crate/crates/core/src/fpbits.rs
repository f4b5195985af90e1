//! Bit-level IEEE-754 binary32/binary64 helpers and software rounding.
//!
//! Every conversion here is done with integer arithmetic on the bit
//! patterns, so results never depend on the host floating-point
//! environment.

use std::fmt;

/// IEEE-754 rounding-direction attribute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoundingMode {
    #[default]
    NearestEven,
    TowardZero,
    TowardPositive,
    TowardNegative,
}

impl RoundingMode {
    pub const ALL: [RoundingMode; 4] = [
        RoundingMode::NearestEven,
        RoundingMode::TowardZero,
        RoundingMode::TowardPositive,
        RoundingMode::TowardNegative,
    ];

    /// Short name used on the command line and in reports.
    pub fn short_name(self) -> &'static str {
        match self {
            RoundingMode::NearestEven => "rne",
            RoundingMode::TowardZero => "rz",
            RoundingMode::TowardPositive => "ru",
            RoundingMode::TowardNegative => "rd",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.short_name() == s)
    }

    /// Whether a magnitude with the given sign is rounded away from zero
    /// when inexact (ignoring the nearest-even tie logic).
    #[inline]
    pub(crate) fn rounds_up_magnitude(self, negative: bool) -> bool {
        match self {
            RoundingMode::NearestEven | RoundingMode::TowardZero => false,
            RoundingMode::TowardPositive => !negative,
            RoundingMode::TowardNegative => negative,
        }
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Parameters of a binary interchange format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Format {
    pub mant_bits: u32,
    pub exp_bits: u32,
}

impl Format {
    pub const BINARY32: Format = Format { mant_bits: 23, exp_bits: 8 };
    pub const BINARY64: Format = Format { mant_bits: 52, exp_bits: 11 };

    #[inline]
    pub const fn bias(self) -> i32 {
        (1 << (self.exp_bits - 1)) - 1
    }
    #[inline]
    pub const fn emin(self) -> i32 {
        1 - self.bias()
    }
    #[inline]
    pub const fn emax(self) -> i32 {
        self.bias()
    }
    #[inline]
    pub const fn precision(self) -> u32 {
        self.mant_bits + 1
    }
    #[inline]
    pub const fn sign_bit(self) -> u64 {
        1 << (self.mant_bits + self.exp_bits)
    }
    #[inline]
    pub const fn inf_bits(self) -> u64 {
        ((1u64 << self.exp_bits) - 1) << self.mant_bits
    }
    #[inline]
    pub const fn max_finite_bits(self) -> u64 {
        self.inf_bits() - 1
    }
    #[inline]
    pub const fn quiet_bit(self) -> u64 {
        1 << (self.mant_bits - 1)
    }
}

/// Rounds `(-1)^negative * (sig * 2^exp + sticky*tiny)` to `fmt` under `mode`.
///
/// `sticky` marks a nonzero amount strictly below the last bit of `sig`.
/// Returns the raw bit pattern of the destination (sign included), with
/// overflow, gradual underflow and signed zeros handled per IEEE-754.
pub fn round_to_format(negative: bool, sig: u128, exp: i64, sticky: bool, fmt: Format, mode: RoundingMode) -> u64 {
    let sign = if negative { fmt.sign_bit() } else { 0 };
    if sig == 0 {
        if !sticky {
            return sign;
        }
        // value is a positive amount below any representable quantum
        return if mode.rounds_up_magnitude(negative) { sign | 1 } else { sign };
    }
    let nbits = 128 - sig.leading_zeros() as i64;
    let lead = exp + nbits - 1;
    if lead > fmt.emax() as i64 {
        return overflow_bits(negative, fmt, mode);
    }
    let mant = fmt.mant_bits as i64;
    let quantum = if lead < fmt.emin() as i64 { fmt.emin() as i64 - mant } else { lead - mant };
    let shift = quantum - exp;
    let (mut m, round_bit, rest) = if shift <= 0 {
        (sig << (-shift) as u32, false, sticky)
    } else if shift > 128 {
        (0u128, false, true)
    } else {
        let s = shift as u32;
        let m = if s == 128 { 0 } else { sig >> s };
        let round_bit = (sig >> (s - 1)) & 1 == 1;
        let below = if s == 1 { 0 } else { sig & ((1u128 << (s - 1)) - 1) };
        (m, round_bit, below != 0 || sticky)
    };
    let inexact = round_bit || rest;
    let inc = match mode {
        RoundingMode::NearestEven => round_bit && (rest || m & 1 == 1),
        _ => inexact && mode.rounds_up_magnitude(negative),
    };
    m += inc as u128;
    // quantum relative to the subnormal quantum gives the biased exponent - 1
    let biased_minus_one = (quantum - (fmt.emin() as i64 - mant)) as u64;
    let bits = (biased_minus_one << fmt.mant_bits) + m as u64;
    if bits >= fmt.inf_bits() {
        return overflow_bits(negative, fmt, mode);
    }
    sign | bits
}

fn overflow_bits(negative: bool, fmt: Format, mode: RoundingMode) -> u64 {
    let sign = if negative { fmt.sign_bit() } else { 0 };
    let to_inf = match mode {
        RoundingMode::NearestEven => true,
        RoundingMode::TowardZero => false,
        _ => mode.rounds_up_magnitude(negative),
    };
    sign | if to_inf { fmt.inf_bits() } else { fmt.max_finite_bits() }
}

/// A binary32 bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Binary32(pub u32);

/// A binary64 bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Binary64(pub u64);

impl Binary32 {
    pub const fn from_bits(bits: u32) -> Self {
        Binary32(bits)
    }
    pub const fn to_bits(self) -> u32 {
        self.0
    }
    pub fn from_f32(v: f32) -> Self {
        Binary32(v.to_bits())
    }
    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }
    pub fn is_nan(self) -> bool {
        self.0 & 0x7fff_ffff > 0x7f80_0000
    }
    pub fn is_sign_negative(self) -> bool {
        self.0 >> 31 == 1
    }
    /// Exact widening; NaNs stay NaN with their payload shifted into place.
    pub fn widen(self) -> Binary64 {
        Binary64((self.to_f32() as f64).to_bits())
    }
}

impl Binary64 {
    pub const fn from_bits(bits: u64) -> Self {
        Binary64(bits)
    }
    pub const fn to_bits(self) -> u64 {
        self.0
    }
    pub fn from_f64(v: f64) -> Self {
        Binary64(v.to_bits())
    }
    pub fn to_f64(self) -> f64 {
        f64::from_bits(self.0)
    }
    pub fn is_nan(self) -> bool {
        self.0 & !(1 << 63) > 0x7ff0_0000_0000_0000
    }

    /// Splits into (sign, biased exponent, mantissa field).
    pub fn decompose(self) -> (u8, u16, u64) {
        decompose(self)
    }

    pub fn compose(sign: u8, biased_exponent: u16, mantissa_field: u64) -> Self {
        compose(sign, biased_exponent, mantissa_field)
    }
}

impl fmt::Debug for Binary32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Binary32({:#010x} = {})", self.0, crate::hexfloat::format_f32(self.to_f32()))
    }
}

impl fmt::Debug for Binary64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Binary64({:#018x} = {})", self.0, crate::hexfloat::format_f64(self.to_f64()))
    }
}

impl From<f32> for Binary32 {
    fn from(v: f32) -> Self {
        Binary32::from_f32(v)
    }
}

impl From<f64> for Binary64 {
    fn from(v: f64) -> Self {
        Binary64::from_f64(v)
    }
}

pub fn decompose(x: Binary64) -> (u8, u16, u64) {
    let b = x.0;
    ((b >> 63) as u8, ((b >> 52) & 0x7ff) as u16, b & ((1 << 52) - 1))
}

pub fn compose(sign: u8, biased_exponent: u16, mantissa_field: u64) -> Binary64 {
    Binary64(((sign as u64 & 1) << 63) | ((biased_exponent as u64 & 0x7ff) << 52) | (mantissa_field & ((1 << 52) - 1)))
}

/// Splits a finite nonzero binary64 into (negative, integer significand, exponent)
/// such that |v| = sig * 2^exp.
#[inline]
pub fn unpack_f64(bits: u64) -> (bool, u64, i64) {
    let neg = bits >> 63 == 1;
    let be = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1 << 52) - 1);
    if be == 0 {
        (neg, frac, -1074)
    } else {
        (neg, frac | (1 << 52), be - 1075)
    }
}

/// IEEE convertFormat from binary64 to binary32 under `mode`.
pub fn convert_f64_to_f32(v: Binary64, mode: RoundingMode) -> Binary32 {
    let bits = v.0;
    let neg = bits >> 63 == 1;
    let sign32 = (neg as u32) << 31;
    let be = (bits >> 52) & 0x7ff;
    let frac = bits & ((1 << 52) - 1);
    if be == 0x7ff {
        if frac == 0 {
            return Binary32(sign32 | 0x7f80_0000);
        }
        // quiet NaN, payload truncated to the top 22 bits
        let payload = (frac >> 29) as u32 & 0x003f_ffff;
        return Binary32(sign32 | 0x7fc0_0000 | payload);
    }
    if be == 0 && frac == 0 {
        return Binary32(sign32);
    }
    let (_, sig, exp) = unpack_f64(bits);
    Binary32(round_to_format(neg, sig as u128, exp, false, Format::BINARY32, mode) as u32)
}

/// Distance in binary32 units in the last place.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UlpDistance {
    Finite(u64),
    Incomparable,
}

/// Maps a non-NaN pattern to a monotone integer line where -0 and +0 are
/// adjacent (distance 1).
#[inline]
fn ordinal32(bits: u32) -> i64 {
    if bits >> 31 == 1 {
        -((bits & 0x7fff_ffff) as i64) - 1
    } else {
        bits as i64
    }
}

#[inline]
fn ordinal64(bits: u64) -> i128 {
    if bits >> 63 == 1 {
        -((bits & !(1 << 63)) as i128) - 1
    } else {
        bits as i128
    }
}

pub fn ulp32_distance(a: Binary32, b: Binary32) -> UlpDistance {
    if a.is_nan() || b.is_nan() {
        return UlpDistance::Incomparable;
    }
    UlpDistance::Finite(ordinal32(a.0).abs_diff(ordinal32(b.0)))
}

pub fn ulp64_distance(a: Binary64, b: Binary64) -> UlpDistance {
    if a.is_nan() || b.is_nan() {
        return UlpDistance::Incomparable;
    }
    UlpDistance::Finite(ordinal64(a.0).abs_diff(ordinal64(b.0)) as u64)
}

/// Next representable binary64 toward +Inf (NaN and +Inf unchanged).
pub fn next_up_f64(x: f64) -> f64 {
    let b = x.to_bits();
    if x.is_nan() || b == 0x7ff0_0000_0000_0000 {
        return x;
    }
    if b == 1 << 63 {
        return f64::from_bits(1);
    }
    if b >> 63 == 0 {
        f64::from_bits(b + 1)
    } else {
        f64::from_bits(b - 1)
    }
}

pub fn next_down_f64(x: f64) -> f64 {
    -next_up_f64(-x)
}

/// Unit in the last place of a finite binary64 (the spacing above |x|).
pub fn ulp_f64(x: f64) -> f64 {
    let a = x.abs();
    next_up_f64(a) - a
}

#[cfg(test)]
mod tests {
    use super::*;
    use RoundingMode::*;

    #[test]
    fn decompose_examples() {
        assert_eq!(decompose(1.0.into()), (0, 1023, 0));
        assert_eq!(decompose((-0.0).into()), (1, 0, 0));
        assert_eq!(decompose(f64::INFINITY.into()), (0, 2047, 0));
    }

    #[test]
    fn convert_exact_values() {
        for m in RoundingMode::ALL {
            assert_eq!(convert_f64_to_f32(1.5.into(), m).to_f32(), 1.5);
            assert_eq!(convert_f64_to_f32((-0.0).into(), m).0, 0x8000_0000);
        }
    }

    #[test]
    fn convert_tie_to_even_at_zero() {
        let v = 2f64.powi(-150);
        assert_eq!(convert_f64_to_f32(v.into(), NearestEven).0, 0);
        assert_eq!(convert_f64_to_f32(v.into(), TowardPositive).0, 1);
        assert_eq!(convert_f64_to_f32((-v).into(), TowardNegative).0, 0x8000_0001);
        // slightly above the tie goes up
        let above = next_up_f64(v);
        assert_eq!(convert_f64_to_f32(above.into(), NearestEven).0, 1);
    }

    #[test]
    fn convert_directed_overflow() {
        let v = 2f64.powi(128) * (1.0 - 2f64.powi(-30));
        assert_eq!(convert_f64_to_f32(v.into(), TowardZero).to_f32(), f32::MAX);
        assert_eq!(convert_f64_to_f32(v.into(), TowardNegative).to_f32(), f32::MAX);
        assert_eq!(convert_f64_to_f32(v.into(), TowardPositive).to_f32(), f32::INFINITY);
        assert_eq!(convert_f64_to_f32(v.into(), NearestEven).to_f32(), f32::INFINITY);
        assert_eq!(convert_f64_to_f32((-v).into(), TowardPositive).to_f32(), -f32::MAX);
        assert_eq!(convert_f64_to_f32(f64::MAX.into(), TowardZero).to_f32(), f32::MAX);
    }

    #[test]
    fn convert_nan_policy() {
        let nan = Binary64(0xfff0_0000_2000_0001);
        let r = convert_f64_to_f32(nan, NearestEven);
        assert!(r.is_nan());
        assert_eq!(r.0, 0xffc0_0001);
    }

    #[test]
    fn convert_matches_host_for_rne() {
        let mut x = 0x9e37_79b9_7f4a_7c15u64;
        for _ in 0..200_000 {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            let v = f64::from_bits(x);
            let got = convert_f64_to_f32(v.into(), NearestEven);
            let host = v as f32;
            if v.is_nan() {
                assert!(got.is_nan());
            } else {
                assert_eq!(got.0, host.to_bits(), "{v:e}");
            }
        }
    }

    #[test]
    fn ulp_distance_examples() {
        assert_eq!(ulp32_distance(1.0.into(), 1.0.into()), UlpDistance::Finite(0));
        let up = f32::from_bits(1.0f32.to_bits() + 1);
        assert_eq!(ulp32_distance(1.0.into(), up.into()), UlpDistance::Finite(1));
        assert_eq!(ulp32_distance((-0.0).into(), 0.0.into()), UlpDistance::Finite(1));
        assert_eq!(ulp32_distance(f32::NAN.into(), 0.0.into()), UlpDistance::Incomparable);
        let tiny = f32::from_bits(1);
        assert_eq!(ulp32_distance((-tiny).into(), tiny.into()), UlpDistance::Finite(3));
    }

    #[test]
    fn round_to_format_subnormal_carry_into_normal() {
        // (2^-126 - 2^-150) rounds up to the minimum normal under RNE
        let sig = (1u128 << 24) - 1; // times 2^-150
        let b = round_to_format(false, sig, -150, false, Format::BINARY32, NearestEven);
        assert_eq!(b, 0x0080_0000);
        let b = round_to_format(false, sig, -150, false, Format::BINARY32, TowardZero);
        assert_eq!(b, 0x007f_ffff);
    }
}
