//! Confidence curves (the map rho -> 1 - p(rho)) and the confidence sets
//! read from them as sub-level sets.

use crate::error::{Error, Result};
use crate::inference::{hs_interval, pvalue, EstimateSet, Method, StudyDesign};
use crate::transforms::Probability;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Grid size used when extracting confidence sets.
const SET_GRID: usize = 512;
/// Bisection width for set endpoints (gives |p - alpha| well below 1e-5 at
/// interior crossings).
const ENDPOINT_TOL: f64 = 1e-9;
/// Golden-section width for the curve minimizer.
const MINIMIZER_TOL: f64 = 1e-6;

/// A confidence curve sampled on an equally spaced grid over [-1, 1], with
/// the inputs that produced it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfidenceCurve {
    pub grid: Vec<f64>,
    pub cc: Vec<f64>,
    pub method: Method,
    pub est: EstimateSet,
    pub design: StudyDesign,
}

/// Classification of a confidence set on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    Empty,
    Interval,
    Full,
    NonInterval,
}

impl std::fmt::Display for SetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SetKind::Empty => "empty",
            SetKind::Interval => "interval",
            SetKind::Full => "full",
            SetKind::NonInterval => "non_interval",
        })
    }
}

/// A confidence set: the rho values whose p-value is at least 1 - level.
/// `endpoints` lists one (lo, hi) pair per connected piece; it is empty for
/// an empty set and [(-1, 1)] for the full interval.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfidenceSet {
    pub level: Probability,
    pub kind: SetKind,
    pub endpoints: Vec<(f64, f64)>,
}

fn evaluate_p(est: &EstimateSet, design: &StudyDesign, method: Method, rho0: f64) -> Result<f64> {
    Ok(pvalue(rho0, est, design, method)?.p.value())
}

fn spaced_grid(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect()
}

/// Evaluates 1 - p at `grid_n` equally spaced points on [-1, 1], endpoints
/// included. Deterministic; grid evaluations may run in parallel.
pub fn confidence_curve(
    est: &EstimateSet,
    design: &StudyDesign,
    method: Method,
    grid_n: usize,
) -> Result<ConfidenceCurve> {
    if grid_n < 16 {
        return Err(Error::GridTooSmall {
            min: 16,
            got: grid_n,
        });
    }
    est.validate_for(method)?;
    design.validate_for(method)?;
    let grid = spaced_grid(grid_n);

    #[cfg(feature = "parallel")]
    let points: Result<Vec<f64>> = grid
        .par_iter()
        .map(|&rho| evaluate_p(est, design, method, rho))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let points: Result<Vec<f64>> = grid
        .iter()
        .map(|&rho| evaluate_p(est, design, method, rho))
        .collect();

    let cc = points?.into_iter().map(|p| 1.0 - p).collect();
    Ok(ConfidenceCurve {
        grid,
        cc,
        method,
        est: *est,
        design: *design,
    })
}

/// Computes {rho : p(rho) >= 1 - level} by scanning a 512-point grid for sign
/// changes of p - alpha and refining each crossing by bisection. For hs the
/// closed-form interval is clipped to [-1, 1] instead.
pub fn confidence_set(
    est: &EstimateSet,
    design: &StudyDesign,
    method: Method,
    level: Probability,
) -> Result<ConfidenceSet> {
    let lv = level.value();
    if lv <= 0.0 || lv >= 1.0 {
        return Err(Error::ProbabilityOutOfRange {
            value: lv,
            expected: "(0, 1)",
        });
    }
    if method == Method::Hs {
        let iv = hs_interval(est, design, level)?;
        let (kind, endpoints) = match iv.clipped {
            None => (SetKind::Empty, Vec::new()),
            Some((lo, hi)) if lo <= -1.0 && hi >= 1.0 => (SetKind::Full, vec![(-1.0, 1.0)]),
            Some(pair) => (SetKind::Interval, vec![pair]),
        };
        return Ok(ConfidenceSet {
            level,
            kind,
            endpoints,
        });
    }

    est.validate_for(method)?;
    design.validate_for(method)?;
    let alpha = 1.0 - lv;
    let grid = spaced_grid(SET_GRID);

    #[cfg(feature = "parallel")]
    let ps: Result<Vec<f64>> = grid
        .par_iter()
        .map(|&rho| evaluate_p(est, design, method, rho))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let ps: Result<Vec<f64>> = grid
        .iter()
        .map(|&rho| evaluate_p(est, design, method, rho))
        .collect();
    let ps = ps?;

    // Bisect p - alpha between a grid point inside the set and its neighbor
    // outside it.
    let refine = |mut inside: f64, mut outside: f64| -> Result<f64> {
        while (inside - outside).abs() > ENDPOINT_TOL {
            let mid = 0.5 * (inside + outside);
            if evaluate_p(est, design, method, mid)? >= alpha {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };

    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<f64> = None;
    for i in 0..grid.len() {
        let in_set = ps[i] >= alpha;
        match (open, in_set) {
            (None, true) => {
                let lo = if i == 0 {
                    -1.0
                } else {
                    refine(grid[i], grid[i - 1])?
                };
                open = Some(lo);
            }
            (Some(lo), false) => {
                let hi = refine(grid[i - 1], grid[i])?;
                pieces.push((lo, hi));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(lo) = open {
        pieces.push((lo, 1.0));
    }

    let kind = match pieces.len() {
        0 => SetKind::Empty,
        1 if pieces[0] == (-1.0, 1.0) => SetKind::Full,
        1 => SetKind::Interval,
        _ => SetKind::NonInterval,
    };
    Ok(ConfidenceSet {
        level,
        kind,
        endpoints: pieces,
    })
}

/// The curve's point estimate: the grid rho minimizing cc, refined by
/// golden-section search between its neighbors. Ties break toward the
/// smallest |rho|, preferring the nonnegative value on magnitude ties, and a
/// plateau of equal minima (a flat stretch of the curve) returns its
/// tie-broken grid point unrefined.
pub fn curve_minimizer(curve: &ConfidenceCurve) -> Result<f64> {
    let n = curve.grid.len();
    if n == 0 || curve.cc.len() != n {
        return Err(Error::GridTooSmall { min: 1, got: 0 });
    }
    let closer_to_zero = |a: f64, b: f64| -> bool {
        let (aa, ab) = (a.abs(), b.abs());
        if aa != ab {
            aa < ab
        } else {
            a >= b
        }
    };
    let mut best = 0usize;
    for i in 1..n {
        if curve.cc[i] < curve.cc[best]
            || (curve.cc[i] == curve.cc[best] && closer_to_zero(curve.grid[i], curve.grid[best]))
        {
            best = i;
        }
    }
    let fmin = curve.cc[best];
    let plateau =
        (best > 0 && curve.cc[best - 1] == fmin) || (best + 1 < n && curve.cc[best + 1] == fmin);
    if plateau {
        return Ok(curve.grid[best]);
    }
    let lo = if best == 0 { 0 } else { best - 1 };
    let hi = if best + 1 == n { best } else { best + 1 };
    if lo == hi {
        return Ok(curve.grid[best]);
    }

    let f = |rho: f64| -> Result<f64> {
        Ok(1.0 - evaluate_p(&curve.est, &curve.design, curve.method, rho)?)
    };
    // Golden-section over [grid[lo], grid[hi]].
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut b) = (curve.grid[lo], curve.grid[hi]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > MINIMIZER_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Serializes a curve as CSV with header `rho,cc,method`, one row per grid
/// point, at full f64 precision (17 significant digits).
pub fn curve_to_csv(curve: &ConfidenceCurve) -> String {
    let mut out = String::with_capacity(curve.grid.len() * 48 + 16);
    out.push_str("rho,cc,method\n");
    for (rho, cc) in curve.grid.iter().zip(&curve.cc) {
        out.push_str(&format!("{rho:.16e},{cc:.16e},{}\n", curve.method));
    }
    out
}
