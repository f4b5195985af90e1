//! Arbitrary-precision reference for exp2, log and log2, and a Ziv-style
//! correct rounder built on it.

mod eval;
pub(crate) mod fx;

pub use eval::eval_hp;

use crate::fpbits::{round_to_format, Format, RoundingMode};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Functions the oracle can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FnId {
    Exp2,
    Log,
    Log2,
}

impl FnId {
    pub fn name(self) -> &'static str {
        match self {
            FnId::Exp2 => "exp2",
            FnId::Log => "log",
            FnId::Log2 => "log2",
        }
    }
}

impl fmt::Display for FnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("{f} is not defined at {x:e} for high-precision evaluation")]
    Domain { f: FnId, x: f64 },
    #[error("precision {0} outside [64, 4096]")]
    PrecisionOutOfRange(u32),
    #[error("{f}({x:e}) undecidable at the 4096-bit cap")]
    UndecidableAtCap { f: FnId, x: f64 },
}

/// Escalation ladder of working precisions, in bits.
pub const LADDER: [u32; 7] = [96, 160, 256, 512, 1024, 2048, 4096];

/// Normalized binary floating value `(-1)^neg * mag * 2^exp` with an
/// error contract tied to `precision`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigFixed {
    pub neg: bool,
    pub exp: i64,
    /// Little-endian limbs; the top bit of the last limb is set unless zero.
    pub mag: Vec<u64>,
    pub precision: u32,
    /// The value is the exact function value, not an approximation.
    pub exact: bool,
}

impl BigFixed {
    pub fn zero(precision: u32) -> BigFixed {
        BigFixed { neg: false, exp: 0, mag: Vec::new(), precision, exact: true }
    }

    /// Exact `(-1)^neg * sig * 2^exp`.
    pub fn from_parts(neg: bool, sig: u128, exp: i64, precision: u32) -> BigFixed {
        let mag = vec![sig as u64, (sig >> 64) as u64];
        let mut b = BigFixed { neg, exp, mag, precision, exact: true };
        b.normalize();
        b
    }

    /// Exact value of a finite binary64.
    pub fn from_f64(x: f64, precision: u32) -> BigFixed {
        assert!(x.is_finite());
        if x == 0.0 {
            return BigFixed::zero(precision);
        }
        let (neg, m, e) = crate::fpbits::unpack_f64(x.to_bits());
        BigFixed::from_parts(neg, m as u128, e, precision)
    }

    pub(crate) fn from_fx<S: fx::Store>(v: &fx::Fx<S>, e2: i64, precision: u32) -> BigFixed {
        let fl = v.frac_limbs() as i64;
        let mut b = BigFixed { neg: v.neg, exp: e2 - 64 * fl, mag: v.limbs().to_vec(), precision, exact: false };
        b.normalize();
        b
    }

    fn normalize(&mut self) {
        while self.mag.last() == Some(&0) {
            self.mag.pop();
        }
        if let Some(&top) = self.mag.last() {
            let s = top.leading_zeros();
            if s > 0 {
                let mut carry = 0u64;
                for l in self.mag.iter_mut() {
                    let nl = (*l << s) | carry;
                    carry = *l >> (64 - s);
                    *l = nl;
                }
                self.exp -= s as i64;
            }
        } else {
            self.neg = false;
            self.exp = 0;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mag.is_empty()
    }

    /// Exponent of the leading bit: the value lies in [2^e, 2^(e+1)).
    pub fn leading_exponent(&self) -> i64 {
        self.exp + 64 * self.mag.len() as i64 - 1
    }

    pub fn to_f64(&self) -> f64 {
        f64::from_bits(self.round(Format::BINARY64, RoundingMode::NearestEven))
    }

    /// Rounds the stored value (not the function value) to `fmt`.
    pub fn round(&self, fmt: Format, mode: RoundingMode) -> u64 {
        round_limbs(self.neg, &self.mag, self.exp, fmt, mode)
    }

    /// Roundings of both ends of the certified interval around the value.
    pub fn round_interval(&self, fmt: Format, mode: RoundingMode) -> (u64, u64) {
        if self.exact || self.is_zero() {
            let r = self.round(fmt, mode);
            return (r, r);
        }
        let rel = self.precision.saturating_sub(2);
        let mut err = self.mag.clone();
        shr_limbs(&mut err, rel);
        add_one(&mut err);
        let mut lo = self.mag.clone();
        sub_limbs(&mut lo, &err);
        let mut hi = self.mag.clone();
        hi.push(0);
        err.push(0);
        add_limbs(&mut hi, &err);
        let a = round_limbs(self.neg, &lo, self.exp, fmt, mode);
        let b = round_limbs(self.neg, &hi, self.exp, fmt, mode);
        (a, b)
    }

    /// Exact product.
    pub fn mul_exact(&self, o: &BigFixed) -> BigFixed {
        if self.is_zero() || o.is_zero() {
            return BigFixed::zero(self.precision.min(o.precision));
        }
        let mut b = BigFixed {
            neg: self.neg != o.neg,
            exp: self.exp + o.exp,
            mag: mul_limbs(&self.mag, &o.mag),
            precision: self.precision.min(o.precision),
            exact: self.exact && o.exact,
        };
        b.normalize();
        b
    }

    /// Product truncated to the longer operand's limb count.
    pub fn mul(&self, o: &BigFixed) -> BigFixed {
        if self.is_zero() || o.is_zero() {
            return BigFixed::zero(self.precision.min(o.precision));
        }
        let (n, m) = (self.mag.len(), o.mag.len());
        let prod = mul_limbs(&self.mag, &o.mag);
        let keep = n.max(m);
        let drop = n + m - keep;
        let mut b = BigFixed {
            neg: self.neg != o.neg,
            exp: self.exp + o.exp + 64 * drop as i64,
            mag: prod[drop..].to_vec(),
            precision: self.precision.min(o.precision),
            exact: false,
        };
        b.normalize();
        b
    }

    /// Signed difference, exact, with operands aligned on the finer grid.
    pub fn sub(&self, o: &BigFixed) -> BigFixed {
        let mut neg_o = o.clone();
        neg_o.neg = !neg_o.neg;
        self.add(&neg_o)
    }

    pub fn add(&self, o: &BigFixed) -> BigFixed {
        if o.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return o.clone();
        }
        let e = self.exp.min(o.exp);
        let top = self.leading_exponent().max(o.leading_exponent()) + 2;
        let limbs = ((top - e + 1) as usize).div_ceil(64);
        let a = place(&self.mag, (self.exp - e) as u32, limbs);
        let b = place(&o.mag, (o.exp - e) as u32, limbs);
        let (mag, neg) = if self.neg == o.neg {
            let mut s = a;
            add_limbs(&mut s, &b);
            (s, self.neg)
        } else if cmp_limbs(&a, &b) != std::cmp::Ordering::Less {
            let mut s = a;
            sub_limbs(&mut s, &b);
            (s, self.neg)
        } else {
            let mut s = b;
            sub_limbs(&mut s, &a);
            (s, o.neg)
        };
        let mut r =
            BigFixed { neg, exp: e, mag, precision: self.precision.min(o.precision), exact: self.exact && o.exact };
        r.normalize();
        r
    }
}

fn mul_limbs(a: &[u64], b: &[u64]) -> Vec<u64> {
    let (n, m) = (a.len(), b.len());
    let mut prod = vec![0u64; n + m];
    for i in 0..n {
        let mut carry = 0u128;
        for j in 0..m {
            let t = a[i] as u128 * b[j] as u128 + prod[i + j] as u128 + carry;
            prod[i + j] = t as u64;
            carry = t >> 64;
        }
        prod[i + m] = carry as u64;
    }
    prod
}

fn place(mag: &[u64], shift: u32, limbs: usize) -> Vec<u64> {
    let mut out = vec![0u64; limbs];
    let (ls, bs) = ((shift / 64) as usize, shift % 64);
    for (i, &l) in mag.iter().enumerate() {
        out[i + ls] |= l << bs;
        if bs != 0 && i + ls + 1 < limbs {
            out[i + ls + 1] |= l >> (64 - bs);
        }
    }
    out
}

fn cmp_limbs(a: &[u64], b: &[u64]) -> std::cmp::Ordering {
    for i in (0..a.len()).rev() {
        if a[i] != b[i] {
            return a[i].cmp(&b[i]);
        }
    }
    std::cmp::Ordering::Equal
}

fn add_limbs(a: &mut [u64], b: &[u64]) {
    fx::add_in_place(a, b);
}

fn sub_limbs(a: &mut [u64], b: &[u64]) {
    fx::sub_in_place(a, b);
}

fn add_one(a: &mut Vec<u64>) {
    for l in a.iter_mut() {
        let (s, c) = l.overflowing_add(1);
        *l = s;
        if !c {
            return;
        }
    }
    a.push(1);
}

pub(crate) fn shr_limbs(a: &mut [u64], bits: u32) {
    fx::shr_in_place(a, bits);
}

fn round_limbs(neg: bool, mag: &[u64], exp: i64, fmt: Format, mode: RoundingMode) -> u64 {
    let Some(top) = mag.iter().rposition(|&l| l != 0) else {
        return round_to_format(neg, 0, 0, false, fmt, mode);
    };
    // take the top two nonzero-led limbs as the significand, the rest as sticky
    let hi = mag[top] as u128;
    let (sig, lo_idx) = if top == 0 { (hi, 0) } else { ((hi << 64) | mag[top - 1] as u128, top - 1) };
    let sticky = mag[..lo_idx].iter().any(|&l| l != 0);
    round_to_format(neg, sig, exp + 64 * lo_idx as i64, sticky, fmt, mode)
}

/// Outcome of a Ziv correct-rounding query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZivResult {
    pub rounded_bits: u64,
    /// Rung that decided the rounding; 0 for specials and exact cases.
    pub decided_at_precision: u32,
    pub exact: bool,
}

impl ZivResult {
    fn special(bits: u64) -> ZivResult {
        ZivResult { rounded_bits: bits, decided_at_precision: 0, exact: true }
    }
}

fn quiet_nan(fmt: Format) -> u64 {
    fmt.inf_bits() | fmt.quiet_bit()
}

/// Handles the inputs whose result needs no approximation.
fn shortcut(f: FnId, x: f64, fmt: Format, mode: RoundingMode) -> Option<ZivResult> {
    let exact = |neg: bool, sig: u128, e: i64| ZivResult::special(round_to_format(neg, sig, e, false, fmt, mode));
    if x.is_nan() {
        return Some(ZivResult::special(quiet_nan(fmt)));
    }
    match f {
        FnId::Exp2 => {
            if x == f64::INFINITY {
                return Some(ZivResult::special(fmt.inf_bits()));
            }
            if x == f64::NEG_INFINITY {
                return Some(ZivResult::special(0));
            }
            if x == x.trunc() && x.abs() < 1e6 {
                return Some(exact(false, 1, x as i64));
            }
            // far outside the range of every supported format
            if x >= 4096.0 {
                return Some(ZivResult::special(round_to_format(false, 1, 1 << 20, true, fmt, mode)));
            }
            if x <= -4096.0 {
                return Some(ZivResult::special(round_to_format(false, 0, 0, true, fmt, mode)));
            }
            None
        }
        FnId::Log | FnId::Log2 => {
            if x < 0.0 || x == f64::NEG_INFINITY {
                return Some(ZivResult::special(quiet_nan(fmt)));
            }
            if x == 0.0 {
                return Some(ZivResult::special(fmt.sign_bit() | fmt.inf_bits()));
            }
            if x == f64::INFINITY {
                return Some(ZivResult::special(fmt.inf_bits()));
            }
            if x == 1.0 {
                return Some(ZivResult::special(0));
            }
            if f == FnId::Log2 {
                let (_, m, e) = crate::fpbits::unpack_f64(x.to_bits());
                if m.is_power_of_two() {
                    let k = e + m.trailing_zeros() as i64;
                    return Some(exact(k < 0, k.unsigned_abs() as u128, 0));
                }
            }
            None
        }
    }
}

/// Correctly rounded `f(x)` in `fmt` under `mode`. Binary32 inputs are
/// passed widened.
pub fn ziv_correctly_round(f: FnId, x: f64, fmt: Format, mode: RoundingMode) -> Result<ZivResult, OracleError> {
    ziv_from(f, x, fmt, mode, LADDER[0])
}

/// Same as [`ziv_correctly_round`] but starting at a later rung.
pub fn ziv_from(f: FnId, x: f64, fmt: Format, mode: RoundingMode, start: u32) -> Result<ZivResult, OracleError> {
    if let Some(r) = shortcut(f, x, fmt, mode) {
        return Ok(r);
    }
    for &prec in LADDER.iter().filter(|&&p| p >= start) {
        let v = eval_hp(f, x, prec)?;
        let (a, b) = v.round_interval(fmt, mode);
        if a == b {
            return Ok(ZivResult { rounded_bits: a, decided_at_precision: prec, exact: false });
        }
    }
    Err(OracleError::UndecidableAtCap { f, x })
}

/// Correct roundings in all four modes (ordered as [`RoundingMode::ALL`])
/// from a shared evaluation per rung.
pub fn ziv_all_modes(f: FnId, x: f64, fmt: Format) -> Result<[ZivResult; 4], OracleError> {
    let modes = RoundingMode::ALL;
    let mut out: [Option<ZivResult>; 4] = [None; 4];
    for (o, &m) in out.iter_mut().zip(&modes) {
        *o = shortcut(f, x, fmt, m);
    }
    for &prec in LADDER.iter() {
        if out.iter().all(Option::is_some) {
            break;
        }
        let v = eval_hp(f, x, prec)?;
        for (o, &m) in out.iter_mut().zip(&modes) {
            if o.is_none() {
                let (a, b) = v.round_interval(fmt, m);
                if a == b {
                    *o = Some(ZivResult { rounded_bits: a, decided_at_precision: prec, exact: false });
                }
            }
        }
    }
    let mut res = [ZivResult::special(0); 4];
    for (r, o) in res.iter_mut().zip(out) {
        *r = o.ok_or(OracleError::UndecidableAtCap { f, x })?;
    }
    Ok(res)
}

/// A binary32 input ranked by how close its image lies to a rounding
/// boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardCase {
    pub input_bits: u32,
    /// Distance from f(x) to the nearest value or midpoint of the binary32
    /// grid, in binary32 ulps, measured at 160 bits.
    pub boundary_distance: f64,
    pub exact: bool,
}

/// Distance in target ulps from the value to the nearest point of the
/// half-ulp grid of `fmt`.
fn boundary_distance(v: &BigFixed, fmt: Format) -> f64 {
    let lead = v.leading_exponent();
    let q = lead.max(fmt.emin() as i64) - fmt.mant_bits as i64;
    // bits of v below the half-ulp position 2^(q-1)
    let below = (q - 1) - v.exp;
    if below <= 0 {
        return 0.0;
    }
    let below = below as u64;
    let mut frac = 0u128;
    // gather up to 64 bits just below the half-ulp position
    for k in 1..=64u64 {
        if k > below {
            break;
        }
        let pos = below - k;
        let limb = (pos / 64) as usize;
        let bit = (pos % 64) as u32;
        let b = v.mag.get(limb).map_or(0, |l| (l >> bit) & 1);
        frac |= (b as u128) << (64 - k);
    }
    let t = frac as f64 / 2f64.powi(64);
    t.min(1.0 - t) / 2.0
}

/// Ranks every binary32 input in `lo..=hi` (bit patterns, same sign) by
/// boundary distance, ascending, ties in input order.
pub fn hardest_case_search(f: FnId, lo: u32, hi: u32) -> Vec<HardCase> {
    let mut out: Vec<HardCase> = (lo..=hi)
        .filter_map(|bits| {
            let x = f32::from_bits(bits) as f64;
            if !x.is_finite() {
                return None;
            }
            if let Some(r) = shortcut(f, x, Format::BINARY32, RoundingMode::NearestEven) {
                if r.exact {
                    return Some(HardCase { input_bits: bits, boundary_distance: 0.0, exact: true });
                }
            }
            let v = eval_hp(f, x, 160).ok()?;
            Some(HardCase {
                input_bits: bits,
                boundary_distance: boundary_distance(&v, Format::BINARY32),
                exact: false,
            })
        })
        .collect();
    out.sort_by(|a, b| a.exact.cmp(&b.exact).then(a.boundary_distance.total_cmp(&b.boundary_distance)));
    out
}

#[cfg(test)]
mod tests;
