//! Table and coefficient generation.
//!
//! Every table value and polynomial coefficient used by the kernels is
//! produced here from the oracle, certified against its error budget and
//! serialized to the checked-in artifact `data/tables.txt`. The kernels read
//! the artifact, never this code.

pub mod artifact;
pub mod fit;

use crate::fpbits::{Format, RoundingMode};
use crate::oracle::{eval_hp, ziv_correctly_round, BigFixed, FnId};
use crate::vlanes::scalar::pow2;
use fit::{fit_minimax, FitError, FitSpec, Grid, Sample, ORACLE_BITS};
use serde::Serialize;
use std::sync::OnceLock;

/// Relative error budget of the exp2f polynomial reconstruction.
pub const EPS32_EXP2: f64 = pow2(-57);
/// Error budget of the log2f reconstruction.
pub const EPS32_LOG2: f64 = pow2(-50);
/// Relative error budget of the binary64 fast-path polynomials.
pub const EPS64: f64 = pow2(-66);

/// Bound on the rounding errors of the binary64 exp2 fast path, relative.
/// The binary64 evaluation of `q` dominates: `|R^2 q(R)| < 2^-27` with
/// about 3 ulps of error, the double-double steps contribute below 2^-100.
pub const ARITH_EXP2D: f64 = pow2(-76);
/// Same for log, relative to the result. The binary64 tail `r * Q4(r)`
/// carries at most 2^-61 absolute error into `Q3`, scaled by `r^3`, and the
/// double-double steps stay below 2^-100; doubled for the ratio between
/// `log1p(r)` and the final sum.
pub const ARITH_LOGD: f64 = pow2(-72);
/// Target for the binary64 fit errors: kept below the arithmetic bounds
/// so that the rounding test threshold is not dominated by the polynomial.
pub const FIT64_TARGET: f64 = pow2(-72);

pub const LOG_INDEX_BITS: u32 = 7;
pub const LOG_TABLE_SIZE: usize = 1 << LOG_INDEX_BITS;
/// Scale of the log table integers.
pub const LOG_SCALE: i32 = 62;
/// Scale of the residual of each log table integer.
pub const LOG_CORR_SCALE: i32 = 105;
/// Width of the residual field packed under each 7-bit reciprocal.
pub const LOG_CORR_BITS: u32 = 44;

#[derive(Clone, Debug, PartialEq)]
pub struct Exp2fTables {
    /// `T[k] = RN64(2^(k/8))`
    pub t: [f64; 8],
    /// `(2^R - 1)/R ~ c0 + c1 R + ... + c6 R^6` on |R| <= 2^-4
    pub c: [f64; 7],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Log2fTables {
    /// `c[d][j]`: coefficient of degree `d` for mantissa sub-interval `j`,
    /// one 8-entry permute table per degree.
    pub c: [[f64; 8]; 10],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exp2dTables {
    /// `t1[i] = 2^(i/16)`, `t2[i] = 2^(i/256)`, `t3[i] = 2^(i/4096)` as hi/lo.
    pub t1: [[f64; 2]; 16],
    pub t2: [[f64; 2]; 16],
    pub t3: [[f64; 2]; 16],
    /// ln 2 as hi/lo; the linear coefficient of `2^R`.
    pub c1: [f64; 2],
    /// `2^R ~ 1 + R (c1 + R q(R))` on |R| <= 2^-13
    pub q: Vec<f64>,
    /// Relative bound used by the rounding test.
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogdTable {
    pub rcp: [f64; LOG_TABLE_SIZE],
    /// `round(-log(rcp[i]) * 2^62)`
    pub l: [i64; LOG_TABLE_SIZE],
    /// `round((-log(rcp[i]) - l[i] 2^-62) * 2^105)`, below 2^42 in magnitude.
    pub corr: [i64; LOG_TABLE_SIZE],
    pub ln2: [f64; 2],
    /// `log1p(r) ~ r - r^2/2 + r^3 Q3(r)`, coefficients of `Q3`.
    pub q: Vec<f64>,
    /// Largest |r| over all bins.
    pub r_max: f64,
    pub eps_rel: f64,
    /// Absolute bound for lanes with a nonzero table entry.
    pub eps_abs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tables {
    pub exp2f: Exp2fTables,
    pub log2f: Log2fTables,
    pub exp2d: Exp2dTables,
    pub logd: LogdTable,
}

/// One certified error bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub name: String,
    pub degree: usize,
    pub bound: f64,
    pub budget: f64,
    pub grid_points: usize,
}

impl From<(&fit::Fit, &FitSpec<'_>)> for Certificate {
    fn from((f, s): (&fit::Fit, &FitSpec<'_>)) -> Self {
        Certificate {
            name: s.name.clone(),
            degree: s.degree,
            bound: f.bound,
            budget: s.budget,
            grid_points: f.grid_points,
        }
    }
}

/// Smallest power of two not below `x`.
pub fn pow2_ceil(x: f64) -> f64 {
    let (_, m, e) = crate::fpbits::unpack_f64(x.to_bits());
    let lead = e + 63 - m.leading_zeros() as i64;
    let k = if m.is_power_of_two() { lead } else { lead + 1 };
    pow2(k as i32)
}

fn rn64(f: FnId, x: f64) -> f64 {
    let r = ziv_correctly_round(f, x, Format::BINARY64, RoundingMode::NearestEven).expect("oracle");
    f64::from_bits(r.rounded_bits)
}

/// `f(x)` as hi/lo with `hi = RN64(f(x))`, `lo = RN64(f(x) - hi)`.
pub fn dd_value(f: FnId, x: f64) -> [f64; 2] {
    let hi = rn64(f, x);
    for prec in [256, 512, 1024, 2048, 4096] {
        let v = eval_hp(f, x, prec).expect("oracle");
        let mut d = v.sub(&BigFixed::from_f64(hi, prec));
        if d.is_zero() {
            return [hi, 0.0];
        }
        d.exact = v.exact;
        // the absolute error of v carries over to d
        d.precision = (d.leading_exponent() - v.leading_exponent() + prec as i64 - 1).max(2) as u32;
        let (a, b) = d.round_interval(Format::BINARY64, RoundingMode::NearestEven);
        if a == b {
            return [hi, f64::from_bits(a)];
        }
    }
    panic!("residual of {f}({x}) undecided");
}

/// `v * 2^scale` rounded to the nearest integer.
fn scaled_int(v: &BigFixed, scale: i64) -> i64 {
    if v.is_zero() {
        return 0;
    }
    // floor(2 |v| 2^scale), then round half up on the extra bit
    let e = v.exp + scale + 1;
    let mut mag = v.mag.clone();
    let twice: u128 = if e >= 0 {
        assert!(mag.len() == 1 && e < 64);
        (mag[0] as u128) << e
    } else {
        crate::oracle::shr_limbs(&mut mag, (-e) as u32);
        assert!(mag.iter().skip(2).all(|&l| l == 0));
        mag[0] as u128 | (*mag.get(1).unwrap_or(&0) as u128) << 64
    };
    let n = ((twice + 1) >> 1) as i64;
    if v.neg {
        -n
    } else {
        n
    }
}

/// Bin `i` of the log reduction: top 7 mantissa bits of `mx` in [0.75, 1.5).
pub fn log_bin(i: usize) -> (f64, f64) {
    let i = i as f64;
    if i < 64.0 {
        (1.0 + i / 128.0, 1.0 + (i + 1.0) / 128.0)
    } else {
        (0.5 + i / 256.0, 0.5 + (i + 1.0) / 256.0)
    }
}

/// `1/m` rounded to 7 significant bits, `m` the bin midpoint.
pub fn log_rcp(i: usize) -> f64 {
    let (a, b) = log_bin(i);
    let inv = 2.0 / (a + b);
    let e = inv.log2().floor() as i32;
    let q = pow2(e - 6);
    (inv / q).round() * q
}

fn gen_exp2f(certs: &mut Vec<Certificate>) -> Result<Exp2fTables, FitError> {
    let t = std::array::from_fn(|k| rn64(FnId::Exp2, k as f64 / 8.0));
    let target = |r: f64| {
        let f = eval_hp(FnId::Exp2, r, ORACLE_BITS).expect("oracle");
        Sample {
            x: r,
            b: BigFixed::from_f64(r, ORACLE_BITS),
            y: f.sub(&BigFixed::from_f64(1.0, ORACLE_BITS)),
            s: 1.0 / f.to_f64(),
        }
    };
    let snap = |x: f64| (x * pow2(40)).round() * pow2(-40);
    let spec = FitSpec {
        name: "exp2f.poly".into(),
        interval: (-0.0625, 0.0625),
        degree: 6,
        target: &target,
        snap: &snap,
        grid: Grid::Uniform(1 << 20),
        budget: EPS32_EXP2,
    };
    let f = fit_minimax(&spec)?;
    certs.push((&f, &spec).into());
    Ok(Exp2fTables { t, c: f.coefs.try_into().expect("7 coefficients") })
}

/// Mantissa range of log2f sub-interval `j`.
pub fn log2f_subinterval(j: usize) -> (f64, f64) {
    let j = j as f64;
    if j < 4.0 {
        (1.0 + j / 8.0, 1.0 + (j + 1.0) / 8.0)
    } else {
        (0.5 + j / 16.0, 0.5 + (j + 1.0) / 16.0)
    }
}

fn gen_log2f(certs: &mut Vec<Certificate>) -> Result<Log2fTables, FitError> {
    let mut c = [[0.0; 8]; 10];
    for j in 0..8 {
        let (a, b) = log2f_subinterval(j);
        let target = |r: f64| {
            let mx = 1.0 + r / 1.5;
            let l = eval_hp(FnId::Log2, mx, ORACLE_BITS).expect("oracle");
            let rb = BigFixed::from_f64(r, ORACLE_BITS);
            let s = if r == 0.0 { 0.0 } else { 1.0 / l.to_f64().abs() };
            Sample { x: r, b: rb.clone(), y: l.sub(&rb), s }
        };
        let snap = |r: f64| {
            let mx = ((1.0 + r / 1.5) * pow2(24)).round() * pow2(-24);
            1.5 * (mx - 1.0)
        };
        let ulp = if a < 1.0 { pow2(-24) } else { pow2(-23) };
        let n = ((b - a) / ulp) as usize;
        let mut pts: Vec<f64> = (0..n).map(|k| 1.5 * (a + k as f64 * ulp - 1.0)).collect();
        pts.push(1.5 * (b - 1.0));
        let spec = FitSpec {
            name: format!("log2f.poly.{j}"),
            interval: (1.5 * (a - 1.0), 1.5 * (b - 1.0)),
            degree: 9,
            target: &target,
            snap: &snap,
            grid: Grid::Points(pts),
            budget: EPS32_LOG2,
        };
        let f = fit_minimax(&spec)?;
        certs.push((&f, &spec).into());
        for (d, &v) in f.coefs.iter().enumerate() {
            c[d][j] = v;
        }
    }
    Ok(Log2fTables { c })
}

fn gen_exp2d(certs: &mut Vec<Certificate>) -> Result<Exp2dTables, FitError> {
    let tab = |den: f64| std::array::from_fn(|i| dd_value(FnId::Exp2, i as f64 / den));
    let (t1, t2, t3) = (tab(16.0), tab(256.0), tab(4096.0));
    let c1 = dd_value(FnId::Log, 2.0);
    let c1b = BigFixed::from_f64(c1[0], ORACLE_BITS).add(&BigFixed::from_f64(c1[1], ORACLE_BITS));
    let target = |r: f64| {
        let f = eval_hp(FnId::Exp2, r, ORACLE_BITS).expect("oracle");
        let rb = BigFixed::from_f64(r, ORACLE_BITS);
        let y = f.sub(&BigFixed::from_f64(1.0, ORACLE_BITS)).sub(&rb.mul_exact(&c1b));
        Sample { x: r, b: rb.mul_exact(&rb), y, s: 1.0 / f.to_f64() }
    };
    let snap = |x: f64| (x * pow2(60)).round() * pow2(-60);
    let h = pow2(-13);
    let mut last = None;
    for degree in 2..8 {
        let spec = FitSpec {
            name: "exp2d.poly".into(),
            interval: (-h, h),
            degree,
            target: &target,
            snap: &snap,
            grid: Grid::Uniform(1 << 20),
            budget: FIT64_TARGET,
        };
        match fit_minimax(&spec) {
            Ok(f) => {
                let eps = pow2_ceil(f.bound + ARITH_EXP2D);
                certs.push((&f, &spec).into());
                return Ok(Exp2dTables { t1, t2, t3, c1, q: f.coefs, eps });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("degree search ran"))
}

fn gen_logd(certs: &mut Vec<Certificate>) -> Result<LogdTable, FitError> {
    let rcp: [f64; LOG_TABLE_SIZE] = std::array::from_fn(log_rcp);
    let logs: Vec<BigFixed> = rcp.iter().map(|&c| eval_hp(FnId::Log, c, 256).expect("oracle")).collect();
    let l: [i64; LOG_TABLE_SIZE] = std::array::from_fn(|i| -scaled_int(&logs[i], LOG_SCALE as i64));
    let corr = std::array::from_fn(|i| {
        let li = BigFixed::from_parts(l[i] < 0, l[i].unsigned_abs() as u128, -LOG_SCALE as i64, 256);
        -scaled_int(&logs[i].add(&li), LOG_CORR_SCALE as i64)
    });
    let r_max = (0..LOG_TABLE_SIZE)
        .map(|i| {
            let (a, b) = log_bin(i);
            (rcp[i] * a - 1.0).abs().max((rcp[i] * b - 1.0).abs())
        })
        .fold(0.0, f64::max);
    let h = (r_max * pow2(20)).ceil() * pow2(-20);
    let ln2 = dd_value(FnId::Log, 2.0);
    let target = |r: f64| {
        let rb = BigFixed::from_f64(r, ORACLE_BITS);
        if r == 0.0 {
            return Sample { x: r, b: rb.clone(), y: rb, s: 0.0 };
        }
        let l1 = eval_hp(FnId::Log, 1.0 + r, ORACLE_BITS).expect("oracle");
        let half_r2 = rb.mul_exact(&rb).mul_exact(&BigFixed::from_f64(0.5, ORACLE_BITS));
        let y = l1.sub(&rb).add(&half_r2);
        Sample { x: r, b: rb.mul_exact(&rb).mul_exact(&rb), y, s: 1.0 / l1.to_f64().abs() }
    };
    let snap = |x: f64| (x * pow2(52)).round() * pow2(-52);
    let mut last = None;
    for degree in 2..12 {
        let spec = FitSpec {
            name: "logd.poly".into(),
            interval: (-h, h),
            degree,
            target: &target,
            snap: &snap,
            grid: Grid::Uniform(1 << 20),
            budget: FIT64_TARGET,
        };
        match fit_minimax(&spec) {
            Ok(f) => {
                let eps_rel = pow2_ceil(2.0 * f.bound + ARITH_LOGD);
                certs.push((&f, &spec).into());
                // residual rounding plus the split of ln 2
                let eps_abs = pow2(-LOG_CORR_SCALE - 1) + pow2(-100);
                return Ok(LogdTable { rcp, l, corr, ln2, q: f.coefs, r_max, eps_rel, eps_abs });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("degree search ran"))
}

/// Generates and certifies every table. Single-threaded and deterministic.
pub fn gen_all_tables() -> Result<(Tables, Vec<Certificate>), FitError> {
    let mut certs = Vec::new();
    let exp2f = gen_exp2f(&mut certs)?;
    let log2f = gen_log2f(&mut certs)?;
    let exp2d = gen_exp2d(&mut certs)?;
    let logd = gen_logd(&mut certs)?;
    Ok((Tables { exp2f, log2f, exp2d, logd }, certs))
}

/// Checked-in artifact text.
pub const ARTIFACT: &str = include_str!("../../data/tables.txt");

/// Tables parsed from the checked-in artifact.
pub fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| artifact::parse(ARTIFACT).expect("checked-in table artifact is valid"))
}
