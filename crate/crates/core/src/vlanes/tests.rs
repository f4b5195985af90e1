use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random binary64 drawn from one of several value classes.
pub(crate) fn class_sample(rng: &mut impl Rng) -> f64 {
    let sign = if rng.gen::<bool>() { -1.0 } else { 1.0 };
    match rng.gen_range(0..10) {
        0 => f64::from_bits(rng.gen::<u64>() & ((1 << 52) - 1)) * sign,
        1 => 0.0 * sign,
        2 => f64::INFINITY * sign,
        3 => f64::from_bits(0x7ff8_0000_0000_0000 | rng.gen::<u64>() >> 14),
        4 => rng.gen_range(-300.0..300.0),
        5 => (rng.gen_range(-2000i32..2000) as f64) / 8.0,
        6 => rng.gen_range(0.5..2.0) * sign,
        _ => {
            let b = rng.gen::<u64>();
            let v = f64::from_bits(b);
            if v.is_nan() {
                1.0
            } else {
                v
            }
        }
    }
}

fn check_eq(name: &str, i: usize, inputs: &[f64], got: f64, want: f64) {
    assert!(
        same_bits(got, want),
        "{name} lane {i} inputs {inputs:?}: got {got:e} ({:#x}) want {want:e} ({:#x})",
        got.to_bits(),
        want.to_bits()
    );
}

#[cfg(target_arch = "x86_64")]
fn run_width<const W: usize>(rounds: usize, seed: u64) {
    run_width_with::<W>(rounds, seed, class_sample);
}

/// Value class of [`run_width_with`] samples at scale.
#[cfg(target_arch = "x86_64")]
#[derive(Clone, Copy, Debug)]
enum Class {
    Normal,
    Subnormal,
    Zero,
    Inf,
    Nan,
}

#[cfg(target_arch = "x86_64")]
fn class_only(rng: &mut ChaCha8Rng, class: Class) -> f64 {
    let sign = if rng.gen::<bool>() { -1.0 } else { 1.0 };
    match class {
        Class::Normal => loop {
            let v = f64::from_bits(rng.gen::<u64>());
            if v.is_normal() {
                break if rng.gen_range(0..4) == 0 { rng.gen_range(-300.0..300.0) } else { v };
            }
        },
        Class::Subnormal => f64::from_bits(rng.gen_range(1..1u64 << 52)) * sign,
        Class::Zero => 0.0 * sign,
        Class::Inf => f64::INFINITY * sign,
        Class::Nan => f64::from_bits(0x7ff0_0000_0000_0001 | rng.gen::<u64>() >> 13) * sign,
    }
}

#[cfg(target_arch = "x86_64")]
fn run_width_with<const W: usize>(rounds: usize, seed: u64, mut sample: impl FnMut(&mut ChaCha8Rng) -> f64) {
    use super::avx512::Avx512;
    if !avx512::is_supported() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table: Vec<f64> = (0..16).map(|i| 1.0 + i as f64 / 7.0).collect();
    let itable: Vec<i64> = (0..128).map(|i| i * 0x1234_5678_9abc - 77).collect();
    for _ in 0..rounds {
        let mut gen = || LaneBatch::<f64, W>(std::array::from_fn(|_| sample(&mut rng)));
        let (a, b, c) = (gen(), gen(), gen());
        macro_rules! cmp3 {
            ($op:ident) => {{
                let r = Reference::$op(a, b, c);
                let h = Avx512::$op(a, b, c);
                for i in 0..W {
                    check_eq(stringify!($op), i, &[a.0[i], b.0[i], c.0[i]], h.0[i], r.0[i]);
                }
            }};
        }
        macro_rules! cmp2 {
            ($op:ident) => {{
                let r = Reference::$op(a, b);
                let h = Avx512::$op(a, b);
                for i in 0..W {
                    check_eq(stringify!($op), i, &[a.0[i], b.0[i]], h.0[i], r.0[i]);
                }
            }};
        }
        macro_rules! cmp1 {
            ($op:ident $(, $extra:expr)*) => {{
                let r = Reference::$op(a $(, $extra)*);
                let h = Avx512::$op(a $(, $extra)*);
                for i in 0..W {
                    check_eq(stringify!($op), i, &[a.0[i]], h.0[i], r.0[i]);
                }
            }};
        }
        cmp3!(fma_rn);
        cmp3!(fma_rz);
        cmp2!(add_rz);
        cmp2!(mul_rz);
        cmp2!(add_rn);
        cmp2!(sub_rn);
        cmp2!(mul_rn);
        cmp2!(scalef);
        cmp1!(getmant_075_15);
        cmp1!(getexp);
        cmp1!(reduce_frac, 3);
        cmp1!(clamp, -260.0, 260.0);
        let small = a.map(|v| if v.is_finite() && v.abs() < 1e12 { v } else { 0.5 });
        assert_eq!(
            Reference::shifter_index(small, 1.5 * 2f64.powi(49), 3),
            Avx512::shifter_index(small, 1.5 * 2f64.powi(49), 3)
        );
        let idx = LaneBatch::<i64, W>(std::array::from_fn(|_| rng.gen_range(-40..40)));
        assert_eq!(Reference::permute_table(&table[..8], idx), Avx512::permute_table(&table[..8], idx));
        assert_eq!(Reference::permute_table(&table, idx), Avx512::permute_table(&table, idx));
        let gidx = idx.map(|i| i.rem_euclid(128));
        assert_eq!(Reference::gather64(&itable, gidx), Avx512::gather64(&itable, gidx));
        assert_eq!(Reference::compare_neq_mask(a, b), Avx512::compare_neq_mask(a, b));
        assert_eq!(Reference::compare_le_mask(a, b), Avx512::compare_le_mask(a, b));
        assert_eq!(Reference::is_nan_mask(a), Avx512::is_nan_mask(a));
        let m = Reference::compare_neq_mask(a, b);
        let (rs, hs) = (Reference::select(m, a, b), Avx512::select(m, a, b));
        assert_eq!(rs.map(f64::to_bits), hs.map(f64::to_bits));
        assert_eq!(Reference::or_bits(a, idx).map(f64::to_bits), Avx512::or_bits(a, idx).map(f64::to_bits));
        assert_eq!(Reference::int_to_f64(idx), Avx512::int_to_f64(idx));
        let f: LaneBatch<f32, W> = a.map(|v| v as f32);
        let (rw, hw) = (Reference::widen(f), Avx512::widen(f));
        for i in 0..W {
            check_eq("widen", i, &[a.0[i]], hw.0[i], rw.0[i]);
        }
        for mode in RoundingMode::ALL {
            let (rc, hc) = (Reference::convert_to_f32(a, mode), Avx512::convert_to_f32(a, mode));
            for i in 0..W {
                check_eq("convert", i, &[a.0[i]], hc.0[i] as f64, rc.0[i] as f64);
                if !rc.0[i].is_nan() {
                    assert_eq!(hc.0[i].to_bits(), rc.0[i].to_bits());
                }
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
#[test]
fn avx512_matches_reference_all_widths() {
    run_width::<1>(20_000, 1);
    run_width::<4>(5_000, 2);
    run_width::<8>(5_000, 3);
    run_width::<16>(2_000, 4);
}

/// 10^7 lanes per value class; every operand of a round is drawn from the
/// class, so mixed-class lanes are left to the test above.
#[cfg(target_arch = "x86_64")]
#[test]
fn avx512_matches_reference_per_class_at_scale() {
    for (i, class) in [Class::Normal, Class::Subnormal, Class::Zero, Class::Inf, Class::Nan].into_iter().enumerate() {
        run_width_with::<16>(10_000_000 / 16, 100 + i as u64, |r| class_only(r, class));
    }
}

#[test]
fn lane_independence_under_permutation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let a = LaneBatch::<f64, 8>(std::array::from_fn(|_| class_sample(&mut rng)));
        let b = LaneBatch::<f64, 8>(std::array::from_fn(|_| class_sample(&mut rng)));
        let mut perm: [usize; 8] = std::array::from_fn(|i| i);
        for i in (1..8).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let pa: LaneBatch<f64, 8> = LaneBatch(std::array::from_fn(|i| a.0[perm[i]]));
        let pb: LaneBatch<f64, 8> = LaneBatch(std::array::from_fn(|i| b.0[perm[i]]));
        let (r, pr) = (Reference::fma_rz(a, b, a), Reference::fma_rz(pa, pb, pa));
        for i in 0..8 {
            assert!(same_bits(pr.0[i], r.0[perm[i]]));
        }
    }
}

#[test]
fn mask_and_bit_ops() {
    let z = LaneBatch::<f64, 4>::splat(0.0);
    let nz = LaneBatch::<f64, 4>::splat(-0.0);
    assert!(!Reference::compare_neq_mask(z, nz).any());
    let nan = LaneBatch::<f64, 4>::splat(f64::NAN);
    assert!(Reference::compare_neq_mask(nan, nan).all());
    let two = LaneBatch::<f64, 4>::splat(2.0);
    let ones = Reference::shift_right(Reference::mask_to_int(Reference::compare_neq_mask(two, z)), 63);
    assert_eq!(ones.0, [1; 4]);
    let s = Reference::or_bits(two, ones);
    assert_eq!(s.0[0].to_bits(), 2.0f64.to_bits() | 1);
    let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
    assert_eq!(Reference::permute_table(&t, LaneBatch([0i64; 4])).0, [0.0; 4]);
    assert_eq!(Reference::permute_table(&t, LaneBatch([9i64; 4])).0, [1.0; 4]);
}
