//! Rounding helpers and tables checked against exact integer arithmetic.

use crvec_core::coeffgen::{tables, LOG_CORR_SCALE, LOG_SCALE};
use crvec_core::fpbits::{convert_f64_to_f32, Binary64};
use crvec_core::vlanes::{scalar, softfma};
use crvec_core::RoundingMode;
use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

/// `x = m 2^e` exactly.
fn exact(x: f64) -> (BigInt, i64) {
    if x == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = x.to_bits();
    let be = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1 << 52) - 1);
    let (m, e) = if be == 0 { (frac, -1074) } else { (frac | 1 << 52, be - 1075) };
    let m = BigInt::from(m);
    (if x < 0.0 { -m } else { m }, e)
}

fn align(a: (BigInt, i64), b: (BigInt, i64)) -> (BigInt, BigInt, i64) {
    let e = a.1.min(b.1);
    (a.0 << (a.1 - e) as usize, b.0 << (b.1 - e) as usize, e)
}

fn ldexp(m: u64, e: i64) -> f64 {
    let half = e / 2;
    m as f64 * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
}

/// Rounds `m 2^e` to `p` bits with least exponent `emin`; no overflow handling.
fn round(m: &BigInt, e: i64, p: u64, emin: i64, mode: RoundingMode) -> f64 {
    if m.is_zero() {
        return 0.0;
    }
    let neg = m.sign() == Sign::Minus;
    let a = m.abs();
    let cut = (a.bits() as i64 - p as i64).max(emin - e).max(0) as usize;
    let q = &a >> cut;
    let rem = &a - (&q << cut);
    let half = if cut > 0 { BigInt::one() << (cut - 1) } else { BigInt::zero() };
    let up = match mode {
        RoundingMode::TowardZero => false,
        RoundingMode::NearestEven => rem > half || (rem == half && cut > 0 && q.bit(0)),
        RoundingMode::TowardPositive => !rem.is_zero() && !neg,
        RoundingMode::TowardNegative => !rem.is_zero() && neg,
    };
    let q: u64 = (q + u32::from(up)).try_into().expect("fits in 64 bits");
    let v = ldexp(q, e + cut as i64);
    if neg {
        -v
    } else {
        v
    }
}

fn moderate() -> impl Strategy<Value = f64> {
    (any::<bool>(), 0u64..(1 << 52), -300i32..300).prop_map(|(s, m, e)| {
        let v = (1.0 + m as f64 * 2f64.powi(-52)) * 2f64.powi(e);
        if s {
            -v
        } else {
            v
        }
    })
}

fn exact_fma(a: f64, b: f64, c: f64) -> (BigInt, i64) {
    let (ma, ea) = exact(a);
    let (mb, eb) = exact(b);
    let (p, q, e) = align((ma * mb, ea + eb), exact(c));
    (p + q, e)
}

fn same(x: f64, y: f64) -> bool {
    x == y && (x != 0.0 || x.is_sign_negative() == y.is_sign_negative()) || (x == 0.0 && y == 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4000))]

    #[test]
    fn fma_rz_is_exactly_truncated(a in moderate(), b in moderate(), c in moderate()) {
        let (m, e) = exact_fma(a, b, c);
        prop_assert!(same(scalar::fma_rz(a, b, c), round(&m, e, 53, -1074, RoundingMode::TowardZero)));
    }

    #[test]
    fn fma_rz_near_cancellation(a in moderate(), b in moderate(), k in -3i32..3) {
        let c = -(a * b) * (1.0 + k as f64 * f64::EPSILON);
        let (m, e) = exact_fma(a, b, c);
        prop_assert!(same(scalar::fma_rz(a, b, c), round(&m, e, 53, -1074, RoundingMode::TowardZero)));
    }

    #[test]
    fn soft_fma_in_every_mode(a in moderate(), b in moderate(), c in moderate(), small in any::<bool>()) {
        // `small` pushes the product into the subnormal range
        let a = if small { a * 2f64.powi(-750) } else { a };
        let c = if small { c * 2f64.powi(-1000) } else { c };
        let (m, e) = exact_fma(a, b, c);
        for mode in RoundingMode::ALL {
            prop_assert!(same(softfma::fma(a, b, c, mode), round(&m, e, 53, -1074, mode)), "{mode:?}");
        }
    }

    #[test]
    fn add_and_mul_rz(a in moderate(), b in moderate()) {
        let (p, q, e) = align(exact(a), exact(b));
        prop_assert!(same(scalar::add_rz(a, b), round(&(p + q), e, 53, -1074, RoundingMode::TowardZero)));
        let ((ma, ea), (mb, eb)) = (exact(a), exact(b));
        prop_assert!(same(scalar::mul_rz(a, b), round(&(ma * mb), ea + eb, 53, -1074, RoundingMode::TowardZero)));
    }

    #[test]
    fn narrowing_to_binary32(m in 0u64..(1 << 52), e in -160i32..128, neg in any::<bool>()) {
        let v = (1.0 + m as f64 * 2f64.powi(-52)) * 2f64.powi(e);
        let v = if neg { -v } else { v };
        let (bm, be) = exact(v);
        for mode in RoundingMode::ALL {
            let want = round(&bm, be, 24, -149, mode);
            let got = convert_f64_to_f32(Binary64(v.to_bits()), mode).to_f32() as f64;
            if want.abs() < f32::MAX as f64 {
                prop_assert!(same(got, want), "{v:e} {mode:?}: {got:e} vs {want:e}");
            }
        }
    }
}

const FRAC: usize = 240;

fn fixed(x: f64) -> BigInt {
    let (m, e) = exact(x);
    if e + FRAC as i64 >= 0 {
        m << (e + FRAC as i64) as usize
    } else {
        m >> (-(e + FRAC as i64)) as usize
    }
}

/// `ln(x)` in fixed point with `FRAC` fraction bits, from the atanh series.
fn ln_fixed(x: f64) -> BigInt {
    let one = BigInt::one() << FRAC;
    let xf = fixed(x);
    let num = &xf - &one;
    let neg = num.is_negative();
    let t = (num.abs() << FRAC) / (&xf + &one);
    let t2 = (&t * &t) >> FRAC;
    let mut term = t.clone();
    let mut sum = BigInt::zero();
    let mut k = 1u32;
    while !term.is_zero() {
        sum += &term / k;
        term = (&term * &t2) >> FRAC;
        k += 2;
    }
    if neg {
        -sum * 2
    } else {
        sum * 2
    }
}

fn exp_fixed(y: &BigInt) -> BigInt {
    let mut term = BigInt::one() << FRAC;
    let mut sum = BigInt::zero();
    let mut k = 1u32;
    while !term.is_zero() {
        sum += &term;
        term = ((&term * y) >> FRAC) / k;
        k += 1;
    }
    sum
}

fn ulps_of(err: &BigInt, shift: i64) -> f64 {
    // err 2^-FRAC measured in units of 2^shift
    let e: f64 = err.abs().to_string().parse().unwrap();
    e * 2f64.powi(-(FRAC as i32) - shift as i32)
}

#[test]
fn log_table_matches_series() {
    let t = &tables().logd;
    for i in 0..t.rcp.len() {
        let want = -ln_fixed(t.rcp[i]);
        let got = (BigInt::from(t.l[i]) << (FRAC - LOG_SCALE as usize))
            + (BigInt::from(t.corr[i]) << (FRAC - LOG_CORR_SCALE as usize));
        assert!(ulps_of(&(got - want), -LOG_CORR_SCALE as i64) <= 0.5 + 1e-9, "entry {i}");
    }
    let ln2 = ln_fixed(2.0);
    let got = fixed(t.ln2[0]) + fixed(t.ln2[1]);
    assert!(ulps_of(&(got - ln2), -106) < 1.0);
}

#[test]
fn exp2_tables_match_series() {
    let t = &tables().exp2d;
    let ln2 = ln_fixed(2.0);
    for (tab, denom) in [(&t.t1, 16u32), (&t.t2, 256), (&t.t3, 4096)] {
        for (i, hl) in tab.iter().enumerate() {
            let want = exp_fixed(&(&ln2 * i as u32 / denom));
            let got = fixed(hl[0]) + fixed(hl[1]);
            assert!(ulps_of(&(got - want), -106) < 1.0, "2^({i}/{denom})");
        }
    }
    for (k, &v) in tables().exp2f.t.iter().enumerate() {
        let want = exp_fixed(&(&ln2 * k as u32 / 8u32));
        assert!(ulps_of(&(fixed(v) - want), -52) <= 0.5, "2^({k}/8)");
    }
}
