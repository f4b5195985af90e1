use crvec_core::fpbits::{next_up_f64, ulp32_distance, ulp64_distance, Binary32, Binary64, UlpDistance};
use crvec_core::hexfloat::{format_f32, format_f64, parse_f32, parse_f64};
use crvec_core::kernels_f32::{self, F32Fn};
use crvec_core::kernels_f64::{self, F64Fn};
use crvec_core::oracle::ziv_all_modes;
use crvec_core::{BackendKind, Format, RoundingMode};
use proptest::prelude::*;

use RoundingMode::{NearestEven as RN, TowardNegative as RD, TowardPositive as RU, TowardZero as RZ};

fn f32_fns() -> impl Strategy<Value = F32Fn> {
    prop_oneof![Just(F32Fn::Exp2f), Just(F32Fn::Log2f)]
}

fn f64_fns() -> impl Strategy<Value = F64Fn> {
    prop_oneof![Just(F64Fn::Exp2), Just(F64Fn::Log)]
}

/// Inputs spread over the interesting range of each function.
fn f64_input(f: F64Fn) -> BoxedStrategy<f64> {
    match f {
        F64Fn::Exp2 => prop_oneof![-1100.0..1100.0f64, -30.0..30.0f64, any::<f64>()].boxed(),
        F64Fn::Log => prop_oneof![0.0..16.0f64, (1u64..0x7ff0_0000_0000_0000).prop_map(f64::from_bits)].boxed(),
    }
}

/// Directed results bracket the nearest one, at most one ulp apart, and
/// toward-zero agrees with the direction matching the sign.
fn check_bracket(rd: f64, rn: f64, ru: f64, rz: f64, dist: UlpDistance) -> Result<(), TestCaseError> {
    if rn.is_nan() {
        prop_assert!(rd.is_nan() && ru.is_nan() && rz.is_nan());
        return Ok(());
    }
    prop_assert!(rd <= rn && rn <= ru, "{rd:e} {rn:e} {ru:e}");
    prop_assert!(matches!(dist, UlpDistance::Finite(0 | 1)), "{rd:e} {ru:e}");
    let toward = if rn >= 0.0 && !(rn == 0.0 && ru < 0.0) { rd } else { ru };
    prop_assert!(rz == toward || (rz == 0.0 && toward == 0.0), "rz {rz:e}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn hex_round_trip_f64(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let y = parse_f64(&format_f64(x)).unwrap();
        prop_assert!(y.to_bits() == bits || (x.is_nan() && y.is_nan()));
    }

    #[test]
    fn hex_round_trip_f32(bits in any::<u32>()) {
        let x = f32::from_bits(bits);
        let y = parse_f32(&format_f32(x)).unwrap();
        prop_assert!(y.to_bits() == bits || (x.is_nan() && y.is_nan()));
    }

    #[test]
    fn neighbors_are_one_ulp_apart(x in any::<f64>()) {
        // -0 and +0 are one step apart, so the neighbor of -0 is two away
        prop_assume!(x.is_finite());
        let want = |neg_zero: bool| UlpDistance::Finite(1 + neg_zero as u64);
        let d = ulp64_distance(Binary64::from_f64(x), Binary64::from_f64(next_up_f64(x)));
        prop_assert_eq!(d, want(x == 0.0 && x.is_sign_negative()));
        let y = x as f32;
        prop_assume!(y.is_finite() && y != f32::MAX);
        let d = ulp32_distance(Binary32::from_f32(y), Binary32::from_f32(y.next_up()));
        prop_assert_eq!(d, want(y == 0.0 && y.is_sign_negative()));
    }

    #[test]
    fn f32_modes_bracket(f in f32_fns(), bits in any::<u32>()) {
        let x = f32::from_bits(bits);
        let r = |m| kernels_f32::eval_scalar(f, x, m);
        let (rd, rn, ru, rz) = (r(RD), r(RN), r(RU), r(RZ));
        let dist = ulp32_distance(Binary32::from_f32(rd), Binary32::from_f32(ru));
        check_bracket(rd as f64, rn as f64, ru as f64, rz as f64, dist)?;
    }

    #[test]
    fn f64_modes_bracket((f, x) in f64_fns().prop_flat_map(|f| (Just(f), f64_input(f)))) {
        let r = |m| kernels_f64::eval_scalar(f, x, m);
        let (rd, rn, ru, rz) = (r(RD), r(RN), r(RU), r(RZ));
        check_bracket(rd, rn, ru, rz, ulp64_distance(Binary64::from_f64(rd), Binary64::from_f64(ru)))?;
    }

    #[test]
    fn f32_monotone(f in f32_fns(), a in -200.0f32..200.0, b in -200.0f32..200.0, mode_i in 0usize..4) {
        let (a, b) = if f == F32Fn::Log2f { (a.abs(), b.abs()) } else { (a, b) };
        let (lo, hi) = (a.min(b), a.max(b));
        let m = RoundingMode::ALL[mode_i];
        prop_assert!(kernels_f32::eval_scalar(f, lo, m) <= kernels_f32::eval_scalar(f, hi, m));
    }

    #[test]
    fn f64_monotone((f, a, b) in f64_fns().prop_flat_map(|f| (Just(f), f64_input(f), f64_input(f))), mode_i in 0usize..4) {
        prop_assume!(!a.is_nan() && !b.is_nan());
        let (lo, hi) = (a.min(b), a.max(b));
        let m = RoundingMode::ALL[mode_i];
        let (ylo, yhi) = (kernels_f64::eval_scalar(f, lo, m), kernels_f64::eval_scalar(f, hi, m));
        prop_assert!(ylo <= yhi || (ylo.is_nan() && lo < 0.0), "{lo:e} {hi:e}: {ylo:e} {yhi:e}");
    }

    #[test]
    fn f32_lanes_match_scalar(f in f32_fns(), xs in proptest::array::uniform16(any::<u32>()), mode_i in 0usize..4) {
        let m = RoundingMode::ALL[mode_i];
        let xs = xs.map(f32::from_bits);
        let mut out = [0.0f32; 16];
        kernels_f32::eval_slice(f, BackendKind::best(), 16, m, &xs, &mut out);
        for (x, y) in xs.iter().zip(out) {
            prop_assert_eq!(y.to_bits(), kernels_f32::eval_scalar(f, *x, m).to_bits());
        }
    }

    #[test]
    fn f64_lanes_match_scalar((f, xs) in f64_fns().prop_flat_map(|f| (Just(f), proptest::collection::vec(f64_input(f), 8))), mode_i in 0usize..4) {
        let m = RoundingMode::ALL[mode_i];
        let mut out = vec![0.0; 8];
        kernels_f64::eval_slice(f, BackendKind::best(), 8, m, &xs, &mut out);
        for (x, y) in xs.iter().zip(out) {
            prop_assert_eq!(y.to_bits(), kernels_f64::eval_scalar(f, *x, m).to_bits());
        }
    }

    #[test]
    fn decided_lanes_equal_the_oracle((f, x) in f64_fns().prop_flat_map(|f| (Just(f), f64_input(f)))) {
        let all = ziv_all_modes(f.oracle_fn(), x, Format::BINARY64).unwrap();
        for (m, want) in RoundingMode::ALL.into_iter().zip(all) {
            if kernels_f64::fast_path_decides(f, x, m) {
                prop_assert_eq!(kernels_f64::eval_scalar(f, x, m).to_bits(), want.rounded_bits);
            }
        }
    }
}
