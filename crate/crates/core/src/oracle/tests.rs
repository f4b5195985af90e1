use super::*;
use crate::fpbits::{convert_f64_to_f32, Binary64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use RoundingMode::*;

#[test]
fn exact_examples() {
    let v = eval_hp(FnId::Exp2, 1.0, 128).unwrap();
    assert!(v.exact);
    assert_eq!(v.to_f64(), 2.0);
    let z = eval_hp(FnId::Log, 1.0, 128).unwrap();
    assert!(z.is_zero() && z.exact);
    for mode in RoundingMode::ALL {
        let r = ziv_correctly_round(FnId::Exp2, 127.0, Format::BINARY32, mode).unwrap();
        assert_eq!(r.rounded_bits as u32, 2f32.powi(127).to_bits());
        assert!(r.exact);
        let r = ziv_correctly_round(FnId::Log2, 8.0, Format::BINARY32, mode).unwrap();
        assert_eq!(r.rounded_bits as u32, 3f32.to_bits());
        let r = ziv_correctly_round(FnId::Log2, 0.125, Format::BINARY64, mode).unwrap();
        assert_eq!(r.rounded_bits, (-3f64).to_bits());
        let r = ziv_correctly_round(FnId::Log, 1.0, Format::BINARY64, mode).unwrap();
        assert_eq!(r.rounded_bits, 0);
    }
}

#[test]
fn sqrt2_squares_to_two() {
    let v = eval_hp(FnId::Exp2, 0.5, 256).unwrap();
    let two = BigFixed::from_parts(false, 2, 0, 256);
    let d = v.mul(&v).sub(&two);
    assert!(d.is_zero() || d.leading_exponent() < -250, "{}", d.leading_exponent());
    assert_eq!(v.to_f64(), std::f64::consts::SQRT_2);
}

#[test]
fn log_and_exp2_are_inverse() {
    // exp2(log2(x)) == x to working precision, through the fixed-point core
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..40 {
        let x: f64 = rng.gen_range(0.01..100.0);
        let l2 = eval_hp(FnId::Log2, x, 256).unwrap();
        let ln = eval_hp(FnId::Log, x, 256).unwrap();
        let ratio = ln.to_f64() / l2.to_f64();
        assert!((ratio - std::f64::consts::LN_2).abs() < 1e-15);
    }
}

#[test]
fn interval_honesty() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for f in [FnId::Exp2, FnId::Log, FnId::Log2] {
        for _ in 0..30 {
            let x: f64 = match f {
                FnId::Exp2 => rng.gen_range(-1074.0..1024.0),
                _ => f64::from_bits(rng.gen_range(1u64..0x7ff0_0000_0000_0000)),
            };
            let fine = eval_hp(f, x, 2048).unwrap();
            for prec in [96, 160, 256, 512, 1024] {
                let coarse = eval_hp(f, x, prec).unwrap();
                let d = coarse.sub(&fine);
                let bound = fine.leading_exponent() - (prec as i64 - 2);
                assert!(d.is_zero() || d.leading_exponent() < bound, "{f} {x:e} {prec}");
            }
        }
    }
}

#[test]
fn ziv_start_rung_is_irrelevant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let x: f64 = rng.gen_range(-30.0..30.0);
        let y = x.abs() + 1e-3;
        for mode in RoundingMode::ALL {
            for (f, arg) in [(FnId::Exp2, x), (FnId::Log, y), (FnId::Log2, y)] {
                let a = ziv_correctly_round(f, arg, Format::BINARY64, mode).unwrap();
                let b = ziv_from(f, arg, Format::BINARY64, mode, 256).unwrap();
                assert_eq!(a.rounded_bits, b.rounded_bits);
                assert!(LADDER.contains(&a.decided_at_precision));
                let all = ziv_all_modes(f, arg, Format::BINARY64).unwrap();
                let k = RoundingMode::ALL.iter().position(|&m| m == mode).unwrap();
                assert_eq!(all[k].rounded_bits, a.rounded_bits);
            }
        }
    }
}

fn host_f32(f: FnId, x: f64) -> f64 {
    match f {
        FnId::Exp2 => x.exp2(),
        FnId::Log => x.ln(),
        FnId::Log2 => x.log2(),
    }
}

#[test]
fn agrees_with_host_away_from_boundaries() {
    // the host binary64 result decides the binary32 rounding unless it lies
    // within a few binary64 ulps of a binary32 boundary
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..20_000 {
        let (f, x) = match rng.gen_range(0..3) {
            0 => (FnId::Exp2, rng.gen_range(-150.0f32..128.0) as f64),
            1 => (FnId::Log, f32::from_bits(rng.gen_range(1..0x7f80_0000)) as f64),
            _ => (FnId::Log2, f32::from_bits(rng.gen_range(1..0x7f80_0000)) as f64),
        };
        let h = host_f32(f, x);
        for mode in RoundingMode::ALL {
            let lo = convert_f64_to_f32(
                Binary64::from_f64(crate::fpbits::next_down_f64(crate::fpbits::next_down_f64(h))),
                mode,
            );
            let hi =
                convert_f64_to_f32(Binary64::from_f64(crate::fpbits::next_up_f64(crate::fpbits::next_up_f64(h))), mode);
            if lo != hi {
                continue;
            }
            let r = ziv_correctly_round(f, x, Format::BINARY32, mode).unwrap();
            assert_eq!(r.rounded_bits as u32, lo.to_bits(), "{f} {x:e} {mode:?}");
            checked += 1;
        }
    }
    assert!(checked > 70_000);
}

#[test]
fn directed_modes_bracket() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let x: f64 = rng.gen_range(-60.0..60.0);
        let rd = ziv_correctly_round(FnId::Exp2, x, Format::BINARY64, TowardNegative).unwrap();
        let ru = ziv_correctly_round(FnId::Exp2, x, Format::BINARY64, TowardPositive).unwrap();
        let rz = ziv_correctly_round(FnId::Exp2, x, Format::BINARY64, TowardZero).unwrap();
        let rn = ziv_correctly_round(FnId::Exp2, x, Format::BINARY64, NearestEven).unwrap();
        assert_eq!(rd.rounded_bits, rz.rounded_bits);
        assert_eq!(ru.rounded_bits, rd.rounded_bits + 1);
        assert!(rn.rounded_bits == rd.rounded_bits || rn.rounded_bits == ru.rounded_bits);
        let y = x.abs();
        let rd = ziv_correctly_round(FnId::Log, y, Format::BINARY64, TowardNegative).unwrap();
        let ru = ziv_correctly_round(FnId::Log, y, Format::BINARY64, TowardPositive).unwrap();
        let (a, b) = (f64::from_bits(rd.rounded_bits), f64::from_bits(ru.rounded_bits));
        assert_eq!(crate::fpbits::next_up_f64(a), b, "{y:e}");
    }
}

#[test]
fn specials_and_overflow() {
    let b32 = Format::BINARY32;
    let r = |f, x, m| ziv_correctly_round(f, x, b32, m).unwrap().rounded_bits as u32;
    assert_eq!(r(FnId::Exp2, 128.0, NearestEven), 0x7f80_0000);
    assert_eq!(r(FnId::Exp2, 128.0, TowardZero), 0x7f7f_ffff);
    assert_eq!(r(FnId::Exp2, 127.9, TowardZero), r(FnId::Exp2, 127.9, TowardNegative));
    assert_eq!(r(FnId::Exp2, -149.0, NearestEven), 1);
    assert_eq!(r(FnId::Exp2, -151.0, NearestEven), 0);
    assert_eq!(r(FnId::Exp2, -151.0, TowardPositive), 1);
    assert_eq!(r(FnId::Exp2, -5000.0, TowardPositive), 1);
    assert_eq!(r(FnId::Exp2, f64::NEG_INFINITY, TowardPositive), 0);
    assert!(f32::from_bits(r(FnId::Log2, -1.0, NearestEven)).is_nan());
    assert_eq!(r(FnId::Log2, 0.0, NearestEven), 0xff80_0000);
    assert_eq!(r(FnId::Log2, -0.0, NearestEven), 0xff80_0000);
    assert_eq!(r(FnId::Log, f64::INFINITY, TowardZero), 0x7f80_0000);
}

#[test]
fn hardest_case_ranking() {
    let one = 1f32.to_bits();
    let list = hardest_case_search(FnId::Exp2, one, one + 1024);
    assert_eq!(list.len(), 1025);
    assert!(list.last().unwrap().exact);
    for w in list[..1024].windows(2) {
        assert!(w[0].boundary_distance <= w[1].boundary_distance);
    }
    let top = list[0];
    assert!(top.boundary_distance < 1e-3);
    let x = f32::from_bits(top.input_bits) as f64;
    // the hardest case still rounds to the host value's neighbourhood
    let rn = ziv_correctly_round(FnId::Exp2, x, Format::BINARY32, NearestEven).unwrap();
    assert!((f32::from_bits(rn.rounded_bits as u32) as f64 / x.exp2() - 1.0).abs() < 1e-7);
    let pow = hardest_case_search(FnId::Log2, 4f32.to_bits() - 2, 4f32.to_bits() + 2);
    assert!(pow.iter().any(|h| h.exact && h.input_bits == 4f32.to_bits()));
}
