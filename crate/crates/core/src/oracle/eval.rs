//! High-precision evaluation of exp2, log and log2 at a requested precision.
//!
//! exp2 splits off the integer part, looks up 2^(j/256) and finishes with a
//! Taylor series of exp on a remainder below 2^-8 ln 2. log multiplies the
//! mantissa by a 17-bit dyadic reciprocal from a 256-entry table (exactly),
//! then sums the log1p series on a remainder below 2^-8.9. Tables are built
//! once per limb count and cached.

use super::fx::{Fx, Limbs, Store};
use super::{BigFixed, FnId, OracleError};
use std::sync::{Arc, OnceLock};

const MAX_LIMBS: usize = 80;

/// Per-precision constants.
pub(crate) struct Consts<S = Limbs> {
    pub ln2: Fx<S>,
    pub inv_ln2: Fx<S>,
    /// 2^(j/256)
    pub exp2_tab: Vec<Fx<S>>,
    /// log(c_j) where c_j = log_rcp(j) / 2^16
    pub logc_tab: Vec<Fx<S>>,
}

impl<S: Store> Consts<S> {
    fn convert<T: Store>(&self, n: usize) -> Consts<T> {
        Consts {
            ln2: self.ln2.resize(n),
            inv_ln2: self.inv_ln2.resize(n),
            exp2_tab: self.exp2_tab.iter().map(|v| v.resize(n)).collect(),
            logc_tab: self.logc_tab.iter().map(|v| v.resize(n)).collect(),
        }
    }
}

static CACHE: [OnceLock<Arc<Consts>>; MAX_LIMBS] = [const { OnceLock::new() }; MAX_LIMBS];
static CACHE3: OnceLock<Consts<[u64; 3]>> = OnceLock::new();
static CACHE4: OnceLock<Consts<[u64; 4]>> = OnceLock::new();

/// Storage types with cached constants.
pub(crate) trait Work: Store {
    fn with_consts<R>(n: usize, f: impl FnOnce(&Consts<Self>) -> R) -> R;
}

impl Work for Limbs {
    fn with_consts<R>(n: usize, f: impl FnOnce(&Consts<Self>) -> R) -> R {
        f(&consts(n))
    }
}

impl Work for [u64; 3] {
    fn with_consts<R>(n: usize, f: impl FnOnce(&Consts<Self>) -> R) -> R {
        f(CACHE3.get_or_init(|| consts(n).convert(3)))
    }
}

impl Work for [u64; 4] {
    fn with_consts<R>(n: usize, f: impl FnOnce(&Consts<Self>) -> R) -> R {
        f(CACHE4.get_or_init(|| consts(n).convert(4)))
    }
}

/// 17-bit dyadic reciprocals of the midpoints of [1 + j/256, 1 + (j+1)/256).
fn log_rcp(j: usize) -> u64 {
    let num = (1u64 << 16) * 512 * 2;
    let den = 513 + 2 * j as u64;
    (num / den).div_ceil(2).max(1)
}

pub(crate) fn consts(n: usize) -> Arc<Consts> {
    assert!(n + 1 < MAX_LIMBS, "precision beyond the oracle cap");
    CACHE[n].get_or_init(|| Arc::new(build_consts(n))).clone()
}

fn ln2_series(n: usize) -> Fx {
    // ln 2 = 2 atanh(1/3)
    let mut p = Fx::from_int(n, 1).div_small(3);
    let mut sum = Fx::zero(n);
    let mut k = 1u64;
    while !p.is_zero() {
        sum = sum.add(&p.div_small(k));
        p = p.div_small(9);
        k += 2;
    }
    sum.mul_small(2)
}

/// exp(t) for |t| < 1/64, by Taylor series to full working precision.
pub(crate) fn exp_taylor<S: Store>(t: &Fx<S>) -> Fx<S> {
    let n = t.len();
    let mut sum = Fx::from_int(n, 1);
    let mut term = Fx::from_int(n, 1);
    let mut k = 1u64;
    loop {
        term = term.mul(t).div_small(k);
        if term.is_zero() {
            break;
        }
        sum = sum.add(&term);
        k += 1;
    }
    sum
}

/// log(1 + t) for |t| < 2^-8, Horner form with `terms` terms.
fn log1p_series<S: Store>(t: &Fx<S>, terms: u64) -> Fx<S> {
    let n = t.len();
    let one = Fx::from_int(n, 1);
    let mut acc = one.div_small(terms);
    for k in (1..terms).rev() {
        acc = one.div_small(k).sub(&t.mul(&acc));
    }
    t.mul(&acc)
}

fn atanh_series(s: &Fx) -> Fx {
    let s2 = s.square();
    let mut p = s.clone();
    let mut sum = Fx::zero(s.len());
    let mut k = 1u64;
    while !p.is_zero() {
        sum = sum.add(&p.div_small(k));
        p = p.mul(&s2);
        k += 2;
    }
    sum
}

fn build_consts(n: usize) -> Consts {
    // one guard limb absorbs the accumulated truncation error
    let w = n + 1;
    let ln2 = ln2_series(w);
    let inv_ln2 = ln2.recip();
    let step = exp_taylor(&ln2.div_small(256));
    let mut exp2_tab = Vec::with_capacity(256);
    let mut cur = Fx::from_int(w, 1);
    for _ in 0..256 {
        exp2_tab.push(cur.resize::<Limbs>(n));
        cur = cur.mul(&step);
    }
    let logc_tab = (0..256)
        .map(|j| {
            let c = log_rcp(j) as i64;
            let num = Fx::from_int(w, c - (1 << 16));
            let s = num.div_small((c + (1 << 16)) as u64);
            atanh_series(&s).mul_small(2).resize::<Limbs>(n)
        })
        .collect();
    Consts { ln2: ln2.resize(n), inv_ln2: inv_ln2.resize(n), exp2_tab, logc_tab }
}

/// Fraction limbs used for a rung of `prec` bits at input `x`.
///
/// The absolute error of either evaluation stays below 2^16 units of the
/// last limb; log additionally needs bits to cover the cancellation near 1.
pub(crate) fn frac_limbs_for(f: FnId, x: f64, prec: u32) -> usize {
    let guard = match f {
        FnId::Exp2 => 24,
        FnId::Log | FnId::Log2 => {
            let d = x - 1.0;
            if (0.5..=2.0).contains(&x) && d != 0.0 {
                // |log x| >= |x - 1| / 2 here
                let e = d.abs().log2().floor() as i64;
                26 + (-e).max(0) as usize
            } else {
                26
            }
        }
    };
    (prec as usize + guard).div_ceil(64)
}

/// 2^x for finite |x| < 2^20. Returns (fixed value in [1,2), binary exponent).
pub(crate) fn exp2_fixed<S: Work>(x: f64, fl: usize) -> (Fx<S>, i64) {
    let n = fl + 1;
    S::with_consts(n, |c| exp2_fixed_with(x, n, c))
}

fn exp2_fixed_with<S: Store>(x: f64, n: usize, c: &Consts<S>) -> (Fx<S>, i64) {
    let ax = Fx::<S>::from_f64(n, x.abs());
    let ip = ax.int_part() as i64;
    let mut frac = ax.clone();
    frac.clear_int_and_top_frac(0);
    let (int, f) = if x >= 0.0 || frac.is_zero() {
        (if x >= 0.0 { ip } else { -ip }, frac)
    } else {
        (-ip - 1, Fx::from_int(n, 1).sub(&frac))
    };
    let j = f.top_frac_bits(8) as usize;
    let mut r = f;
    r.clear_int_and_top_frac(8);
    let e = exp_taylor(&r.mul(&c.ln2));
    (c.exp2_tab[j].mul(&e), int)
}

/// log(x) for finite x > 0, as a fixed-point value.
pub(crate) fn log_fixed<S: Work>(x: f64, fl: usize, base2: bool) -> Fx<S> {
    let n = fl + 1;
    S::with_consts(n, |c| {
        let v = log_fixed_with(x, n, fl, c);
        if base2 {
            v.mul(&c.inv_ln2)
        } else {
            v
        }
    })
}

fn log_fixed_with<S: Store>(x: f64, n: usize, fl: usize, c: &Consts<S>) -> Fx<S> {
    let (_, sig, exp) = crate::fpbits::unpack_f64(x.to_bits());
    let lz = sig.leading_zeros() - 11;
    let m = sig << lz; // 53 bits, top bit 52
    let e = exp - lz as i64 + 52;
    let j = ((m >> 44) & 0xff) as usize;
    let rcp = log_rcp(j);
    let u = m as u128 * rcp as u128; // exact: u * 2^-68 ≈ 1
    let t = Fx::<S>::from_dyadic(n, false, u, -68).sub(&Fx::from_int(n, 1));
    // |t| < 2^-8.9, so each term gains at least 8.9 bits
    let terms = ((64 * fl + 8) as f64 / 8.9).ceil() as u64 + 1;
    let l1p = log1p_series(&t, terms);
    let eln2 = c.ln2.mul_small(e.unsigned_abs());
    let eln2 = if e < 0 { eln2.neg() } else { eln2 };
    eln2.add(&l1p).sub(&c.logc_tab[j])
}

/// Evaluates `f(x)` with relative error below 2^-(prec-2).
pub fn eval_hp(f: FnId, x: f64, prec: u32) -> Result<BigFixed, OracleError> {
    if !(64..=4096).contains(&prec) {
        return Err(OracleError::PrecisionOutOfRange(prec));
    }
    if !x.is_finite() {
        return Err(OracleError::Domain { f, x });
    }
    let fl = frac_limbs_for(f, x, prec);
    match f {
        FnId::Exp2 => {
            if x.abs() >= (1u64 << 20) as f64 {
                return Err(OracleError::Domain { f, x });
            }
            if x == x.trunc() {
                return Ok(BigFixed::from_parts(false, 1, x as i64, prec));
            }
            Ok(match fl + 1 {
                3 => {
                    let (v, e) = exp2_fixed::<[u64; 3]>(x, fl);
                    BigFixed::from_fx(&v, e, prec)
                }
                4 => {
                    let (v, e) = exp2_fixed::<[u64; 4]>(x, fl);
                    BigFixed::from_fx(&v, e, prec)
                }
                _ => {
                    let (v, e) = exp2_fixed::<Limbs>(x, fl);
                    BigFixed::from_fx(&v, e, prec)
                }
            })
        }
        FnId::Log | FnId::Log2 => {
            if x <= 0.0 {
                return Err(OracleError::Domain { f, x });
            }
            if x == 1.0 {
                return Ok(BigFixed::zero(prec));
            }
            let (_, m, e) = crate::fpbits::unpack_f64(x.to_bits());
            if f == FnId::Log2 && m.is_power_of_two() {
                let k = e + m.trailing_zeros() as i64;
                return Ok(BigFixed::from_parts(k < 0, k.unsigned_abs() as u128, 0, prec));
            }
            let base2 = f == FnId::Log2;
            Ok(match fl + 1 {
                3 => BigFixed::from_fx(&log_fixed::<[u64; 3]>(x, fl, base2), 0, prec),
                4 => BigFixed::from_fx(&log_fixed::<[u64; 4]>(x, fl, base2), 0, prec),
                _ => BigFixed::from_fx(&log_fixed::<Limbs>(x, fl, base2), 0, prec),
            })
        }
    }
}
