//! Weighted minimax fitting of binary64 polynomial coefficients.
//!
//! The error of a candidate at a point is `(b * p(x) - y) * s`, where `b` is
//! an exact multiplier, `y` a high-precision target and `s` a
//! binary64 weight. The difference `b * p(x) - y` is formed exactly, so
//! only the final scaling is rounded. Coefficients are corrected by
//! weighted least squares on Chebyshev nodes (iterative refinement against
//! the exact residuals), Lawson reweighting and exchange of the worst point
//! of a probe grid.

use crate::oracle::BigFixed;
use nalgebra::{DMatrix, DVector};

/// Working precision of the oracle values used while fitting.
pub const ORACLE_BITS: u32 = 192;

/// One target point: the error of `p` is `(b * p(x) - y) * s`.
#[derive(Clone, Debug)]
pub struct Sample {
    pub x: f64,
    pub b: BigFixed,
    pub y: BigFixed,
    pub s: f64,
}

/// Certification grid.
#[derive(Clone, Debug)]
pub enum Grid {
    /// `n` equally spaced points over the interval, snapped, plus endpoints.
    Uniform(usize),
    /// Explicit points.
    Points(Vec<f64>),
}

pub struct FitSpec<'a> {
    pub name: String,
    pub interval: (f64, f64),
    pub degree: usize,
    pub target: &'a dyn Fn(f64) -> Sample,
    /// Maps an arbitrary point of the interval to a nearby point where the
    /// target can be formed exactly.
    pub snap: &'a dyn Fn(f64) -> f64,
    pub grid: Grid,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    pub coefs: Vec<f64>,
    /// Largest weighted error seen on the certification grid.
    pub max_error: f64,
    /// `2 * max_error`: the grid-refinement safety factor applied.
    pub bound: f64,
    pub grid_points: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("{name}: certified bound {achieved:e} exceeds budget {budget:e}")]
    BudgetExceeded { name: String, achieved: f64, budget: f64 },
    #[error("{name}: interval [{lo}, {hi}] is degenerate")]
    Degenerate { name: String, lo: f64, hi: f64 },
}

/// Exact value of the polynomial with binary64 coefficients at `x`.
pub fn poly_exact(coefs: &[f64], x: f64) -> BigFixed {
    poly_exact_dd(&coefs.iter().map(|&c| [c, 0.0]).collect::<Vec<_>>(), x)
}

fn poly_exact_dd(coefs: &[[f64; 2]], x: f64) -> BigFixed {
    let xb = BigFixed::from_f64(x, ORACLE_BITS);
    let mut acc = BigFixed::zero(ORACLE_BITS);
    for c in coefs.iter().rev() {
        acc =
            acc.mul_exact(&xb).add(&BigFixed::from_f64(c[0], ORACLE_BITS)).add(&BigFixed::from_f64(c[1], ORACLE_BITS));
    }
    acc
}

fn error_dd(coefs: &[[f64; 2]], smp: &Sample) -> f64 {
    if smp.s == 0.0 {
        return 0.0;
    }
    let bp = poly_exact_dd(coefs, smp.x).mul_exact(&smp.b);
    bp.sub(&smp.y).to_f64() * smp.s
}

pub fn sample_error(coefs: &[f64], smp: &Sample) -> f64 {
    error_dd(&coefs.iter().map(|&c| [c, 0.0]).collect::<Vec<_>>(), smp)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficients in `x` of `sum d_k ((x - c) / h)^k`.
fn to_monomial(d: &[f64], c: f64, h: f64) -> Vec<f64> {
    let n = d.len();
    let mut out = vec![0.0; n];
    for (k, &dk) in d.iter().enumerate() {
        let scale = dk / h.powi(k as i32);
        for (j, o) in out.iter_mut().enumerate().take(k + 1) {
            *o += scale * binomial(k, j) * (-c).powi((k - j) as i32);
        }
    }
    out
}

struct Solver<'a> {
    nodes: Vec<Sample>,
    weights: Vec<f64>,
    probe: &'a [Sample],
    c: f64,
    h: f64,
}

impl Solver<'_> {
    /// Weighted least-squares correction to the coefficients from `fixed` on.
    fn correct(&self, coefs: &mut [[f64; 2]], fixed: usize) {
        let (m, n) = (self.nodes.len(), coefs.len());
        let mut a = DMatrix::<f64>::zeros(m, n);
        let mut r = DVector::<f64>::zeros(m);
        for (i, smp) in self.nodes.iter().enumerate() {
            let sw = self.weights[i].sqrt();
            let bs = smp.b.to_f64() * smp.s;
            let t = (smp.x - self.c) / self.h;
            let mut pw = 1.0;
            for k in 0..n {
                a[(i, k)] = bs * pw * sw;
                pw *= t;
            }
            r[i] = -error_dd(coefs, smp) * sw;
        }
        // free columns in the shifted basis map onto monomials of every
        // degree, so fixed coefficients are handled with a monomial basis
        let d = if fixed == 0 {
            let d = a.svd(true, true).solve(&r, 0.0).expect("svd solve");
            to_monomial(d.as_slice(), self.c, self.h)
        } else {
            let mut am = DMatrix::<f64>::zeros(m, n - fixed);
            for (i, smp) in self.nodes.iter().enumerate() {
                let sw = self.weights[i].sqrt();
                for k in fixed..n {
                    am[(i, k - fixed)] = smp.b.to_f64() * smp.s * (smp.x / self.h).powi(k as i32) * sw;
                }
            }
            let d = am.svd(true, true).solve(&r, 0.0).expect("svd solve");
            let mut out = vec![0.0; n];
            for k in fixed..n {
                out[k] = d[k - fixed] / self.h.powi(k as i32);
            }
            out
        };
        for (ck, dk) in coefs.iter_mut().zip(d).skip(fixed) {
            let (s, e) = crate::vlanes::scalar::two_sum(ck[0], dk);
            let (hi, lo) = crate::vlanes::scalar::two_sum(s, e + ck[1]);
            *ck = [hi, lo];
        }
    }

    fn probe_max(&self, coefs: &[[f64; 2]]) -> f64 {
        self.probe.iter().map(|s| error_dd(coefs, s).abs()).fold(0.0, f64::max)
    }

    /// Lawson iterations with exchange; returns the best coefficients seen.
    fn lawson(&mut self, mut coefs: Vec<[f64; 2]>, fixed: usize, rounds: usize) -> Vec<[f64; 2]> {
        let mut best = (f64::INFINITY, coefs.clone());
        for _ in 0..rounds {
            self.correct(&mut coefs, fixed);
            self.correct(&mut coefs, fixed);
            let pm = self.probe_max(&coefs);
            if pm < best.0 {
                best = (pm, coefs.clone());
            }
            let errs: Vec<f64> = self.nodes.iter().map(|s| error_dd(&coefs, s).abs()).collect();
            let emax = errs.iter().cloned().fold(0.0, f64::max);
            if emax == 0.0 {
                break;
            }
            let mut total = 0.0;
            for (w, e) in self.weights.iter_mut().zip(&errs) {
                *w *= e.max(emax * 1e-3);
                total += *w;
            }
            self.weights.iter_mut().for_each(|w| *w /= total);
            let worst = self.probe.iter().map(|s| (s, error_dd(&coefs, s).abs())).max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((s, e)) = worst {
                if e > emax && !self.nodes.iter().any(|t| t.x == s.x) {
                    let wmax = self.weights.iter().cloned().fold(0.0, f64::max);
                    self.nodes.push(s.clone());
                    self.weights.push(wmax);
                }
            }
        }
        best.1
    }
}

fn uniform_points(lo: f64, hi: f64, n: usize, snap: &dyn Fn(f64) -> f64) -> Vec<f64> {
    let mut pts: Vec<f64> =
        (0..=n).map(|i| snap(lo + (hi - lo) * i as f64 / n as f64)).filter(|x| (lo..=hi).contains(x)).collect();
    pts.push(snap(lo));
    pts.push(snap(hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

pub fn fit_minimax(spec: &FitSpec) -> Result<Fit, FitError> {
    let (lo, hi) = spec.interval;
    if !(lo < hi) {
        return Err(FitError::Degenerate { name: spec.name.clone(), lo, hi });
    }
    let n = spec.degree + 1;
    let (c, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    let m = 8 * n + 8;
    let mut node_x: Vec<f64> =
        (0..m).map(|i| (spec.snap)(c + h * (std::f64::consts::PI * (i as f64 + 0.5) / m as f64).cos())).collect();
    node_x.push((spec.snap)(lo));
    node_x.push((spec.snap)(hi));
    node_x.sort_by(f64::total_cmp);
    node_x.dedup();
    let nodes: Vec<Sample> = node_x.iter().map(|&x| (spec.target)(x)).collect();
    let probe: Vec<Sample> = uniform_points(lo, hi, 1024, spec.snap).into_iter().map(|x| (spec.target)(x)).collect();
    let weights = vec![1.0; nodes.len()];
    let mut solver = Solver { nodes, weights, probe: &probe, c, h };

    let mut coefs = solver.lawson(vec![[0.0; 2]; n], 0, 30);
    // round one coefficient at a time and refit the rest
    for k in 0..n {
        coefs[k] = [coefs[k][0], 0.0];
        if k + 1 < n {
            solver.weights.iter_mut().for_each(|w| *w = 1.0);
            coefs = solver.lawson(coefs, k + 1, 12);
        }
    }
    let coefs: Vec<f64> = coefs.iter().map(|c| c[0]).collect();
    // the probe maximum is a lower bound; skip certification when it
    // already fails
    let probe_bound = 2.0 * probe.iter().map(|s| sample_error(&coefs, s).abs()).fold(0.0, f64::max);
    if probe_bound > spec.budget {
        return Err(FitError::BudgetExceeded { name: spec.name.clone(), achieved: probe_bound, budget: spec.budget });
    }

    let grid = match &spec.grid {
        Grid::Uniform(k) => uniform_points(lo, hi, *k, spec.snap),
        Grid::Points(p) => p.clone(),
    };
    let max_error = grid.iter().map(|&x| sample_error(&coefs, &(spec.target)(x)).abs()).fold(0.0, f64::max);
    let bound = 2.0 * max_error;
    if bound > spec.budget {
        return Err(FitError::BudgetExceeded { name: spec.name.clone(), achieved: bound, budget: spec.budget });
    }
    Ok(Fit { coefs, max_error, bound, grid_points: grid.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{eval_hp, FnId};

    fn snap40(x: f64) -> f64 {
        (x * 2f64.powi(40)).round() / 2f64.powi(40)
    }

    #[test]
    fn constant_fit_is_exact() {
        let target = |x: f64| Sample {
            x,
            b: BigFixed::from_f64(1.0, ORACLE_BITS),
            y: BigFixed::from_f64(0.625, ORACLE_BITS),
            s: 1.0,
        };
        let spec = FitSpec {
            name: "const".into(),
            interval: (-1.0, 1.0),
            degree: 0,
            target: &target,
            snap: &snap40,
            grid: Grid::Uniform(256),
            budget: 1e-300,
        };
        let fit = fit_minimax(&spec).unwrap();
        assert_eq!(fit.coefs, vec![0.625]);
        assert_eq!(fit.bound, 0.0);
    }

    #[test]
    fn exp2_relative_fit_beats_taylor() {
        let target = |x: f64| {
            let f = eval_hp(FnId::Exp2, x, ORACLE_BITS).unwrap();
            Sample {
                x,
                b: BigFixed::from_f64(x, ORACLE_BITS),
                y: f.sub(&BigFixed::from_f64(1.0, ORACLE_BITS)),
                s: 1.0 / f.to_f64(),
            }
        };
        let spec = FitSpec {
            name: "exp2 deg 6".into(),
            interval: (-0.0625, 0.0625),
            degree: 6,
            target: &target,
            snap: &snap40,
            grid: Grid::Uniform(4096),
            budget: 2f64.powi(-57),
        };
        let fit = fit_minimax(&spec).unwrap();
        assert!((fit.coefs[0] - std::f64::consts::LN_2).abs() < 1e-15);
        let ln2 = std::f64::consts::LN_2;
        let taylor: Vec<f64> = (1..=7)
            .scan(1.0, |t, k| {
                *t *= ln2 / k as f64;
                Some(*t)
            })
            .collect();
        let worst_taylor =
            [-0.0625, 0.0625].iter().map(|&x| sample_error(&taylor, &target(x)).abs()).fold(0.0, f64::max);
        assert!(fit.max_error < worst_taylor / 2.0, "{:e} {:e}", fit.max_error, worst_taylor);
        let tight = FitSpec { budget: fit.bound / 4.0, ..spec };
        assert!(matches!(fit_minimax(&tight), Err(FitError::BudgetExceeded { .. })));
    }

    #[test]
    fn monomial_conversion() {
        // (x - 1)^2 / 4 = x^2/4 - x/2 + 1/4
        let m = to_monomial(&[0.0, 0.0, 1.0], 1.0, 2.0);
        assert_eq!(m, vec![0.25, -0.5, 0.25]);
    }
}
