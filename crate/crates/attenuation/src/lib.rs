//! Conservative inference for correlations corrected for attenuation due to
//! measurement error.
//!
//! An observed correlation between two noisy measurements understates the
//! correlation between the underlying true scores. The classical correction
//! divides by the square roots of the reliabilities, but the corrected
//! estimate can exceed 1 and plugging in noisy reliability estimates makes
//! its sampling uncertainty hard to quantify. This crate provides p-values
//! for hypotheses about the corrected correlation that account for the
//! variability of all three estimates, the confidence curves and confidence
//! sets they induce, and a Monte Carlo harness for measuring the coverage of
//! the competing procedures.
//!
//! Four methods are supported:
//!
//! - `corr`: the corrected correlation is constrained by correlations
//!   `rel2, rel3` in (0, 1); conservative chi-squared test with three
//!   degrees of freedom.
//! - `free`: like `corr` but the nuisance correlations may be negative.
//! - `cronbach`: the reliabilities are coefficient alphas with known testlet
//!   counts, using the asymptotic normality of ½·log(1−α̂).
//! - `hs`: the closed-form normal-theory interval and test that treat the
//!   reliabilities as known constants.
//!
//! ```
//! use attenuation::{
//!     confidence_set, pvalue, EstimateSet, Method, Probability, StudyDesign,
//! };
//!
//! let est = EstimateSet::new(0.20, 0.45f64.sqrt(), 0.55f64.sqrt());
//! let design = StudyDesign::same_n(100);
//! let p = pvalue(0.0, &est, &design, Method::Corr)?;
//! assert!((p.p.value() - 0.263).abs() < 1e-3);
//!
//! let set = confidence_set(&est, &design, Method::Corr, Probability::new(0.95)?)?;
//! let (lo, hi) = set.endpoints[0];
//! assert!((lo - -0.1647).abs() < 1e-3 && (hi - 0.9959).abs() < 1e-3);
//! # Ok::<(), attenuation::Error>(())
//! ```

mod curves;
mod error;
mod inference;
pub mod simulation;
mod transforms;

pub use curves::{
    confidence_curve, confidence_set, curve_minimizer, curve_to_csv, ConfidenceCurve,
    ConfidenceSet, SetKind,
};
pub use error::{Error, Result};
pub use inference::{
    hs_interval, point_estimate, pvalue, quadratic_objective, solve_nuisance, EstimateSet,
    HsInterval, Method, PValueResult, StudyDesign,
};
pub use transforms::{
    alpha_eta, alpha_variance, artanh, chisq3_cdf, chisq3_quantile, fisher_variance, normal_cdf,
    normal_quantile, tanh, Probability, ZScale,
};
