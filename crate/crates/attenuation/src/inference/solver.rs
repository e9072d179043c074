//! Constrained minimization of the three-term quadratic form over the two
//! nuisance parameters.
//!
//! The box constraint is handled by an interior reparameterization: each
//! bounded coordinate is mapped to the whole real line with a tanh-style
//! bijection and the resulting unconstrained two-variable problem is solved
//! by Nelder-Mead with multiple deterministic starts. Convergence is measured
//! in the original box coordinates.

use super::{EstimateSet, Method, StudyDesign};
use crate::error::{Error, Result};
use crate::transforms::{alpha_eta, alpha_variance, artanh, fisher_variance, ZScale};

/// Numerical interior margin of the nuisance box. artanh(±1) diverges, so the
/// box is shrunk to [EPS, 1−EPS] (or its symmetric version); the effect on
/// p-values is below 1e−9.
const BOX_EPS: f64 = 1e-9;
/// Starting points are projected a little further inside.
const START_EPS: f64 = 1e-6;
/// Convergence tolerance on the simplex extent in box coordinates.
const X_TOL: f64 = 1e-10;
/// Objective-evaluation budget per start (initial run plus its polish).
const EVAL_BUDGET: usize = 10_000;

#[derive(Clone, Copy, PartialEq)]
enum Bounds {
    /// (0, 1): correlations under corr, reliabilities under cronbach.
    Unit,
    /// (−1, 1): correlations under free.
    Symmetric,
}

impl Bounds {
    fn clamp(self, x: f64) -> f64 {
        match self {
            Bounds::Unit => x.clamp(BOX_EPS, 1.0 - BOX_EPS),
            Bounds::Symmetric => x.clamp(-1.0 + BOX_EPS, 1.0 - BOX_EPS),
        }
    }

    fn to_box(self, t: f64) -> f64 {
        let x = match self {
            Bounds::Unit => 0.5 * (1.0 + t.tanh()),
            Bounds::Symmetric => t.tanh(),
        };
        self.clamp(x)
    }

    fn to_free(self, x: f64) -> f64 {
        match self {
            Bounds::Unit => (2.0 * self.clamp(x) - 1.0).atanh(),
            Bounds::Symmetric => self.clamp(x).atanh(),
        }
    }
}

struct Program {
    s: [ZScale; 3],
    d: [f64; 3],
    rho0: f64,
    /// true: nuisance coordinates are reliabilities with eta = ½log(1−R) and
    /// the constraint uses their positive roots; false: they are correlations
    /// with eta = artanh.
    reliability_scale: bool,
    bounds: Bounds,
}

impl Program {
    fn new(rho0: f64, est: &EstimateSet, design: &StudyDesign, method: Method) -> Result<Program> {
        match method {
            Method::Corr | Method::Free => Ok(Program {
                s: [artanh(est.r1)?, artanh(est.rel2)?, artanh(est.rel3)?],
                d: [
                    fisher_variance(design.n1)?,
                    fisher_variance(design.n2)?,
                    fisher_variance(design.n3)?,
                ],
                rho0,
                reliability_scale: false,
                bounds: if method == Method::Corr {
                    Bounds::Unit
                } else {
                    Bounds::Symmetric
                },
            }),
            Method::Cronbach => {
                let (k2, k3) = design.testlets.ok_or(Error::MissingTestletCounts)?;
                Ok(Program {
                    s: [artanh(est.r1)?, alpha_eta(est.rel2)?, alpha_eta(est.rel3)?],
                    d: [
                        fisher_variance(design.n1)?,
                        alpha_variance(design.n2, k2)?,
                        alpha_variance(design.n3, k3)?,
                    ],
                    rho0,
                    reliability_scale: true,
                    bounds: Bounds::Unit,
                })
            }
            Method::Hs => Err(Error::NoNuisanceProgram { method }),
        }
    }

    /// The quadratic form at a nuisance point given in box coordinates, with
    /// eta1 tied by the constraint.
    fn objective(&self, x2: f64, x3: f64) -> f64 {
        let (eta2, eta3, product) = if self.reliability_scale {
            (
                0.5 * (1.0 - x2).ln(),
                0.5 * (1.0 - x3).ln(),
                (x2 * x3).sqrt(),
            )
        } else {
            (x2.atanh(), x3.atanh(), x2 * x3)
        };
        let eta1 = (self.rho0 * product).atanh();
        let e1 = eta1 - self.s[0];
        let e2 = eta2 - self.s[1];
        let e3 = eta3 - self.s[2];
        e1 * e1 / self.d[0] + e2 * e2 / self.d[1] + e3 * e3 / self.d[2]
    }

    fn eval_t(&self, t: (f64, f64)) -> f64 {
        self.objective(self.bounds.to_box(t.0), self.bounds.to_box(t.1))
    }
}

struct Minimum {
    x: (f64, f64),
    f: f64,
    converged: bool,
}

/// One Nelder-Mead run in the reparameterized plane. `scale` sets the initial
/// simplex edge in t space. Consumes from the shared evaluation budget and
/// reports the best vertex seen.
fn nelder_mead(program: &Program, start: (f64, f64), scale: f64, budget: &mut usize) -> Minimum {
    let b = program.bounds;
    let t0 = (b.to_free(start.0), b.to_free(start.1));
    let mut simplex = [
        (t0, 0.0),
        ((t0.0 + scale, t0.1), 0.0),
        ((t0.0, t0.1 + scale), 0.0),
    ];
    for v in simplex.iter_mut() {
        v.1 = program.eval_t(v.0);
        *budget = budget.saturating_sub(1);
    }
    let mut converged = false;
    while *budget > 0 {
        simplex.sort_by(|a, c| a.1.total_cmp(&c.1));
        let (best, second, worst) = (simplex[0], simplex[1], simplex[2]);

        // Convergence is judged on the box-coordinate extent of the simplex.
        let bx = (b.to_box(best.0 .0), b.to_box(best.0 .1));
        let spread = simplex
            .iter()
            .map(|v| {
                let x = (b.to_box(v.0 .0), b.to_box(v.0 .1));
                (x.0 - bx.0).abs().max((x.1 - bx.1).abs())
            })
            .fold(0.0, f64::max);
        if spread <= X_TOL {
            converged = true;
            break;
        }

        let centroid = (
            0.5 * (best.0 .0 + second.0 .0),
            0.5 * (best.0 .1 + second.0 .1),
        );
        let reflect = (
            centroid.0 + (centroid.0 - worst.0 .0),
            centroid.1 + (centroid.1 - worst.0 .1),
        );
        let fr = program.eval_t(reflect);
        *budget = budget.saturating_sub(1);

        if fr < best.1 {
            let expand = (
                centroid.0 + 2.0 * (centroid.0 - worst.0 .0),
                centroid.1 + 2.0 * (centroid.1 - worst.0 .1),
            );
            let fe = program.eval_t(expand);
            *budget = budget.saturating_sub(1);
            simplex[2] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < second.1 {
            simplex[2] = (reflect, fr);
        } else {
            let toward = if fr < worst.1 { reflect } else { worst.0 };
            let ftoward = if fr < worst.1 { fr } else { worst.1 };
            let contract = (
                centroid.0 + 0.5 * (toward.0 - centroid.0),
                centroid.1 + 0.5 * (toward.1 - centroid.1),
            );
            let fc = program.eval_t(contract);
            *budget = budget.saturating_sub(1);
            if fc < ftoward {
                simplex[2] = (contract, fc);
            } else {
                // Shrink toward the best vertex.
                for v in simplex.iter_mut().skip(1) {
                    v.0 = (
                        best.0 .0 + 0.5 * (v.0 .0 - best.0 .0),
                        best.0 .1 + 0.5 * (v.0 .1 - best.0 .1),
                    );
                    v.1 = program.eval_t(v.0);
                    *budget = budget.saturating_sub(1);
                }
            }
        }
    }
    simplex.sort_by(|a, c| a.1.total_cmp(&c.1));
    Minimum {
        x: (b.to_box(simplex[0].0 .0), b.to_box(simplex[0].0 .1)),
        f: simplex[0].1,
        converged,
    }
}

/// Runs one start to convergence, then polishes with a restarted small
/// simplex at the found point.
fn run_start(program: &Program, start: (f64, f64)) -> Minimum {
    let mut budget = EVAL_BUDGET;
    let first = nelder_mead(program, start, 0.25, &mut budget);
    let polish = nelder_mead(program, first.x, 1e-3, &mut budget);
    if polish.f <= first.f {
        Minimum {
            converged: polish.converged || first.converged,
            ..polish
        }
    } else {
        first
    }
}

fn project_start(bounds: Bounds, x: f64) -> f64 {
    match bounds {
        Bounds::Unit => x.clamp(START_EPS, 1.0 - START_EPS),
        Bounds::Symmetric => {
            if x >= 0.0 {
                x.clamp(START_EPS, 1.0 - START_EPS)
            } else {
                x.clamp(-1.0 + START_EPS, -START_EPS)
            }
        }
    }
}

/// Minimizes the quadratic form over the nuisance pair for corr, free, or
/// cronbach, returning the minimizer (in correlation or reliability
/// coordinates, matching the method) and the minimized value Q*.
///
/// Starts: the observed pair and the box center for corr/cronbach; for free,
/// the four sign quadrants of the observed magnitudes, the observed pair,
/// and, when both observed values are positive, the corr-method solution,
/// which makes the free minimum never exceed the corr minimum. Every method
/// additionally starts from the best point of a coarse sweep of the box.
pub fn solve_nuisance(
    rho0: f64,
    est: &EstimateSet,
    design: &StudyDesign,
    method: Method,
) -> Result<((f64, f64), f64)> {
    est.validate_for(method)?;
    design.validate_for(method)?;
    if rho0.is_nan() || !(-1.0..=1.0).contains(&rho0) {
        return Err(Error::RhoOutOfRange { value: rho0 });
    }
    let program = Program::new(rho0, est, design, method)?;
    let b = program.bounds;

    let mut starts: Vec<(f64, f64)> = Vec::with_capacity(6);
    match method {
        Method::Corr | Method::Cronbach => {
            let p2 = project_start(b, est.rel2);
            let p3 = project_start(b, est.rel3);
            starts.push((p2, p3));
            starts.push((0.5, 0.5));
            // when the constraint prefers a vanishing product the minimum
            // hugs a low edge of the box, out of reach of interior starts
            starts.push((p2, START_EPS));
            starts.push((START_EPS, p3));
            starts.push((START_EPS, START_EPS));
        }
        Method::Free => {
            let m2 = est.rel2.abs().clamp(START_EPS, 1.0 - START_EPS);
            let m3 = est.rel3.abs().clamp(START_EPS, 1.0 - START_EPS);
            starts.extend([(m2, m3), (-m2, m3), (m2, -m3), (-m2, -m3)]);
            starts.push((project_start(b, est.rel2), project_start(b, est.rel3)));
            if est.rel2 > 0.0 && est.rel3 > 0.0 {
                if let Ok((corr_nuisance, _)) = solve_nuisance(rho0, est, design, Method::Corr) {
                    starts.push(corr_nuisance);
                }
            }
        }
        Method::Hs => unreachable!("Program::new rejects hs"),
    }

    // A coarse sweep of the box seeds one more start: when the constraint
    // term dominates, every fixed start can sit in the wrong basin.
    const SCAN: usize = 24;
    let mut scan_best = (f64::INFINITY, 0.5, 0.5);
    for i in 0..SCAN {
        for j in 0..SCAN {
            let u = (i as f64 + 0.5) / SCAN as f64;
            let v = (j as f64 + 0.5) / SCAN as f64;
            let (x2, x3) = match b {
                Bounds::Unit => (u, v),
                Bounds::Symmetric => (2.0 * u - 1.0, 2.0 * v - 1.0),
            };
            let f = program.objective(x2, x3);
            if f < scan_best.0 {
                scan_best = (f, x2, x3);
            }
        }
    }
    starts.push((scan_best.1, scan_best.2));

    let mut best: Option<Minimum> = None;
    for start in starts {
        let candidate = run_start(&program, start);
        best = Some(match best {
            Some(current) if current.f <= candidate.f => Minimum {
                converged: current.converged || candidate.converged,
                ..current
            },
            Some(current) => Minimum {
                converged: current.converged || candidate.converged,
                ..candidate
            },
            None => candidate,
        });
    }
    let best = best.expect("at least one start");
    if !best.converged {
        return Err(Error::NonConvergence { method, rho0 });
    }
    Ok((best.x, best.f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_objective_when_constraint_holds_at_data() {
        let est = EstimateSet::new(0.3, 0.8, 0.7);
        let design = StudyDesign::same_n(50);
        let rho0 = 0.3 / (0.8 * 0.7);
        let ((x2, x3), q) = solve_nuisance(rho0, &est, &design, Method::Corr).unwrap();
        assert!(q < 1e-10, "q = {q}");
        assert!((x2 - 0.8).abs() < 1e-4);
        assert!((x3 - 0.7).abs() < 1e-4);
    }

    #[test]
    fn rho_zero_pins_first_term_only() {
        let est = EstimateSet::new(0.2, 0.670_820_393_249_936_9, 0.741_619_848_709_566_3);
        let design = StudyDesign::same_n(100);
        let expected = 97.0 * 0.2f64.atanh().powi(2);
        for method in [Method::Corr, Method::Free] {
            let (_, q) = solve_nuisance(0.0, &est, &design, method).unwrap();
            assert!((q - expected).abs() < 1e-8, "{method}: q = {q}");
        }
    }

    #[test]
    fn cronbach_rho_zero_closed_form() {
        let est = EstimateSet::new(0.52, 0.79, 0.79);
        let design = StudyDesign::with_testlets(85, 2028, 711, 4, 4);
        let (_, q) = solve_nuisance(0.0, &est, &design, Method::Cronbach).unwrap();
        let expected = 82.0 * 0.52f64.atanh().powi(2);
        assert!((q - expected).abs() < 1e-8, "q = {q}");
    }

    #[test]
    fn free_objective_never_exceeds_corr() {
        let est = EstimateSet::new(0.45, 0.6, 0.8);
        let design = StudyDesign::new(40, 200, 75);
        for rho0 in [-1.0, -0.6, -0.2, 0.1, 0.5, 0.9, 1.0] {
            let (_, qc) = solve_nuisance(rho0, &est, &design, Method::Corr).unwrap();
            let (_, qf) = solve_nuisance(rho0, &est, &design, Method::Free).unwrap();
            assert!(qf <= qc + 1e-12, "rho0 = {rho0}: free {qf} > corr {qc}");
        }
    }

    #[test]
    fn free_finds_negative_quadrant() {
        // Observed negative second correlation: the minimizer must sit in a
        // negative-x2 region that corr cannot reach.
        let est = EstimateSet::new(-0.4, -0.7, 0.8);
        let design = StudyDesign::same_n(60);
        let rho0 = point_estimate_free(&est);
        let ((x2, x3), q) = solve_nuisance(rho0, &est, &design, Method::Free).unwrap();
        assert!(q < 1e-10, "q = {q}");
        assert!(x2 < 0.0 && x3 > 0.0, "({x2}, {x3})");
    }

    fn point_estimate_free(est: &EstimateSet) -> f64 {
        est.r1 / (est.rel2 * est.rel3)
    }

    #[test]
    fn hs_has_no_program() {
        let est = EstimateSet::new(0.3, 0.8, 0.7);
        let design = StudyDesign::same_n(50);
        assert!(matches!(
            solve_nuisance(0.0, &est, &design, Method::Hs),
            Err(Error::NoNuisanceProgram { method: Method::Hs })
        ));
    }

    #[test]
    fn rejects_rho_outside_unit_interval() {
        let est = EstimateSet::new(0.3, 0.8, 0.7);
        let design = StudyDesign::same_n(50);
        assert!(matches!(
            solve_nuisance(-1.01, &est, &design, Method::Corr),
            Err(Error::RhoOutOfRange { .. })
        ));
    }

    // Brute-force oracle: exhaustive grid over the box, one refinement pass
    // around the best cell. Uses its own objective expression built from
    // standard-library functions only.
    fn brute_force(
        rho0: f64,
        s: [f64; 3],
        d: [f64; 3],
        reliability_scale: bool,
        lo: f64,
        m: usize,
    ) -> f64 {
        let obj = |x2: f64, x3: f64| -> f64 {
            let (eta2, eta3, prod) = if reliability_scale {
                (
                    0.5 * (1.0 - x2).ln(),
                    0.5 * (1.0 - x3).ln(),
                    (x2 * x3).sqrt(),
                )
            } else {
                (x2.atanh(), x3.atanh(), x2 * x3)
            };
            let e1 = (rho0 * prod).atanh() - s[0];
            let e2 = eta2 - s[1];
            let e3 = eta3 - s[2];
            e1 * e1 / d[0] + e2 * e2 / d[1] + e3 * e3 / d[2]
        };
        let hi = 1.0 - 1e-9;
        let lo = lo + 1e-9;
        let grid = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (m - 1) as f64;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let (x2, x3) = (grid(lo, hi, i), grid(lo, hi, j));
                let q = obj(x2, x3);
                if q < best.0 {
                    best = (q, x2, x3);
                }
            }
        }
        let step = (hi - lo) / (m - 1) as f64;
        let (lo2, hi2) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
        let (lo3, hi3) = ((best.2 - step).max(lo), (best.2 + step).min(hi));
        let mut refined = best.0;
        for i in 0..m {
            for j in 0..m {
                let q = obj(grid(lo2, hi2, i), grid(lo3, hi3, j));
                if q < refined {
                    refined = q;
                }
            }
        }
        refined
    }

    #[test]
    fn solver_matches_brute_force_on_fixed_instance() {
        let est = EstimateSet::new(0.20, 0.670_820_393_249_936_9, 0.741_619_848_709_566_3);
        let design = StudyDesign::same_n(100);
        let (_, q) = solve_nuisance(0.5, &est, &design, Method::Corr).unwrap();
        let s = [0.2f64.atanh(), est.rel2.atanh(), est.rel3.atanh()];
        let d = [1.0 / 97.0; 3];
        let oracle = brute_force(0.5, s, d, false, 0.0, 400);
        assert!((q - oracle).abs() < 1e-4, "solver {q} vs oracle {oracle}");
        assert!(
            q <= oracle + 1e-9,
            "solver must not sit above the grid minimum"
        );
    }
}
