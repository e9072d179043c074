//! Monte Carlo coverage study for the confidence procedures.
//!
//! Each replicate draws two coefficient alphas from a compound-symmetric
//! testlet model and one sample correlation whose true value is the
//! attenuated rho·R, then checks whether the confidence set at the
//! requested level contains the true rho. Replicates stream from
//! per-(cell, replicate) random substreams, so results do not depend on
//! thread count or scheduling.

mod sampling;

pub use sampling::{
    compound_symmetry_covariance, cronbach_alpha, sample_alpha, sample_bivariate_correlation,
};

use crate::error::{Error, Result};
use crate::inference::{pvalue, EstimateSet, Method, StudyDesign};
use crate::transforms::Probability;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Reliability estimates this close to zero (or below) are floored before
/// the square root when a method consumes them on the correlation scale.
const ALPHA_FLOOR: f64 = 1e-6;

/// One simulation condition: sample size shared by all three studies,
/// true disattenuated correlation, testlets per alpha, and population
/// reliability shared by both measurement studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    #[serde(rename = "N")]
    pub n: u32,
    pub rho: f64,
    pub k: u32,
    #[serde(rename = "R")]
    pub r: f64,
}

/// Full study description, deserializable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cells: Vec<SimCell>,
    pub reps: u32,
    pub level: Probability,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    /// Field-level validation beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::InvalidConfig { message });
        if self.cells.is_empty() {
            return bad("cells: must contain at least one cell".into());
        }
        if self.methods.is_empty() {
            return bad("methods: must contain at least one method".into());
        }
        if self.reps == 0 {
            return bad("reps: must be at least 1".into());
        }
        let level = self.level.value();
        if !(level > 0.0 && level < 1.0) {
            return bad(format!(
                "level: must lie strictly between 0 and 1, got {level}"
            ));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            if cell.n < 4 {
                return bad(format!("cells[{i}].N: must be at least 4, got {}", cell.n));
            }
            if cell.k < 2 {
                return bad(format!("cells[{i}].k: must be at least 2, got {}", cell.k));
            }
            if cell.n < cell.k + 1 {
                return bad(format!(
                    "cells[{i}].N: must exceed k = {}, got {}",
                    cell.k, cell.n
                ));
            }
            if cell.rho.is_nan() || cell.rho.abs() >= 1.0 {
                return bad(format!(
                    "cells[{i}].rho: must lie strictly between -1 and 1, got {}",
                    cell.rho
                ));
            }
            if cell.r.is_nan() || cell.r <= 0.0 || cell.r >= 1.0 {
                return bad(format!(
                    "cells[{i}].R: must lie strictly between 0 and 1, got {}",
                    cell.r
                ));
            }
        }
        Ok(())
    }
}

/// Coverage tally for one (cell, method) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageRecord {
    pub cell: SimCell,
    pub method: Method,
    /// Replicates whose confidence set contained the true rho.
    pub covered: u32,
    pub reps: u32,
    /// Replicates where inference could not run (reliability estimate
    /// outside the method's domain, or the test failed to evaluate).
    /// Failed replicates count as not covered.
    pub failures: u32,
    /// Replicates where a reliability estimate was floored before the
    /// square root (methods on the correlation scale only).
    pub truncations: u32,
}

impl CoverageRecord {
    /// Fraction of all replicates covered; failures count against it.
    pub fn coverage(&self) -> f64 {
        f64::from(self.covered) / f64::from(self.reps)
    }
}

/// The random stream for one replicate of one cell. Identical arguments
/// give an identical generator on every platform and thread layout.
pub fn derive_stream(seed: u64, cell_index: u32, rep_index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(cell_index) << 32) | u64::from(rep_index));
    rng
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    covered: u32,
    failures: u32,
    truncations: u32,
}

impl Tally {
    fn merge(mut a: Vec<Tally>, b: Vec<Tally>) -> Vec<Tally> {
        for (x, y) in a.iter_mut().zip(b) {
            x.covered += y.covered;
            x.failures += y.failures;
            x.truncations += y.truncations;
        }
        a
    }
}

/// Draws one replicate and scores every requested method on it.
fn run_replicate(
    cell: &SimCell,
    methods: &[Method],
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Tally> {
    let a2 = sample_alpha(cell.r, cell.k, cell.n, rng);
    let a3 = sample_alpha(cell.r, cell.k, cell.n, rng);
    let r1 = sample_bivariate_correlation(cell.rho * cell.r, cell.n, rng);
    let (a2, a3, r1) = match (a2, a3, r1) {
        (Ok(a2), Ok(a3), Ok(r1)) => (a2, a3, r1),
        // unreachable after config validation; score as failure, never drop
        _ => {
            return vec![
                Tally {
                    covered: 0,
                    failures: 1,
                    truncations: 0
                };
                methods.len()
            ]
        }
    };
    methods
        .iter()
        .map(|&method| score_method(cell, method, alpha, a2, a3, r1))
        .collect()
}

fn score_method(cell: &SimCell, method: Method, alpha: f64, a2: f64, a3: f64, r1: f64) -> Tally {
    let failed = Tally {
        covered: 0,
        failures: 1,
        truncations: 0,
    };
    let mut truncations = 0;
    let est = match method {
        Method::Corr | Method::Free => {
            // the estimates enter on the correlation scale, so alphas below
            // the floor are pulled up to it rather than discarded
            if a2 < ALPHA_FLOOR || a3 < ALPHA_FLOOR {
                truncations = 1;
            }
            let f2 = a2.max(ALPHA_FLOOR);
            let f3 = a3.max(ALPHA_FLOOR);
            if f2 >= 1.0 || f3 >= 1.0 {
                return failed;
            }
            EstimateSet::new(r1, f2.sqrt(), f3.sqrt())
        }
        Method::Cronbach | Method::Hs => {
            // these methods consume alphas directly and have no sensible
            // value for a draw outside (0, 1): the replicate fails
            if !(a2 > 0.0 && a2 < 1.0 && a3 > 0.0 && a3 < 1.0) {
                return failed;
            }
            EstimateSet::new(r1, a2, a3)
        }
    };
    let design = match method {
        Method::Cronbach => StudyDesign::with_testlets(cell.n, cell.n, cell.n, cell.k, cell.k),
        _ => StudyDesign::same_n(cell.n),
    };
    match pvalue(cell.rho, &est, &design, method) {
        Ok(result) => Tally {
            covered: u32::from(result.p.value() >= alpha),
            failures: 0,
            truncations,
        },
        Err(_) => failed,
    }
}

fn simulate_cell(config: &SimConfig, cell_index: u32, cell: &SimCell) -> Vec<Tally> {
    let alpha = 1.0 - config.level.value();
    let zero = || vec![Tally::default(); config.methods.len()];
    let one_rep = |rep: u32| {
        let mut rng = derive_stream(config.seed, cell_index, rep);
        run_replicate(cell, &config.methods, alpha, &mut rng)
    };
    #[cfg(feature = "parallel")]
    {
        (0..config.reps)
            .into_par_iter()
            .map(one_rep)
            .reduce(zero, Tally::merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.reps).map(one_rep).fold(zero(), Tally::merge)
    }
}

/// Runs the study and returns one record per (cell, method), cells outer,
/// methods inner, both in input order.
pub fn run_coverage(config: &SimConfig) -> Result<Vec<CoverageRecord>> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.cells.len() * config.methods.len());
    for (ci, cell) in config.cells.iter().enumerate() {
        let tallies = simulate_cell(config, ci as u32, cell);
        for (method, tally) in config.methods.iter().zip(tallies) {
            records.push(CoverageRecord {
                cell: *cell,
                method: *method,
                covered: tally.covered,
                reps: config.reps,
                failures: tally.failures,
                truncations: tally.truncations,
            });
        }
    }
    Ok(records)
}

/// Renders records as CSV with a fixed header; all numbers decimal.
pub fn coverage_csv(records: &[CoverageRecord]) -> String {
    let mut out = String::from("N,rho,k,R,method,reps,covered,coverage,failures\n");
    for rec in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            rec.cell.n,
            rec.cell.rho,
            rec.cell.k,
            rec.cell.r,
            rec.method,
            rec.reps,
            rec.covered,
            rec.coverage(),
            rec.failures,
        ));
    }
    out
}
