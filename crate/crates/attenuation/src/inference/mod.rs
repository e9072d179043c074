//! P-values for H0: rho = rho0 under the four supported methods.
//!
//! The corrected correlation rho = rho1/(rho2 rho3) is never observed
//! directly; corr, free, and cronbach treat the two reliability-bearing
//! estimates as nuisance parameters and minimize a quadratic form over them,
//! while hs is the closed-form normal test that treats reliabilities as known.

mod solver;

pub use solver::solve_nuisance;

use crate::error::{Error, Result};
use crate::transforms::{normal_cdf, normal_quantile, Probability};

/// The inference method. `Corr` and `Free` consume correlations, `Cronbach`
/// and `Hs` consume reliabilities (coefficient alphas).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Corr,
    Free,
    Cronbach,
    Hs,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Corr, Method::Free, Method::Cronbach, Method::Hs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Corr => "corr",
            Method::Free => "free",
            Method::Cronbach => "cronbach",
            Method::Hs => "hs",
        }
    }

    /// True when rel2/rel3 are reliabilities rather than correlations.
    pub fn takes_reliabilities(self) -> bool {
        matches!(self, Method::Cronbach | Method::Hs)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "corr" => Ok(Method::Corr),
            "free" => Ok(Method::Free),
            "cronbach" => Ok(Method::Cronbach),
            "hs" => Ok(Method::Hs),
            other => Err(format!(
                "unknown method `{other}` (expected corr, free, cronbach, or hs)"
            )),
        }
    }
}

/// The observed triple. `r1` is always the sample correlation between the two
/// noisy measurements; `rel2`/`rel3` are correlations for corr/free and
/// reliabilities (coefficient alphas) for cronbach/hs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EstimateSet {
    pub r1: f64,
    pub rel2: f64,
    pub rel3: f64,
}

impl EstimateSet {
    pub fn new(r1: f64, rel2: f64, rel3: f64) -> Self {
        EstimateSet { r1, rel2, rel3 }
    }

    /// Checks the method-dependent domain: r1 in (-1,1) always; rel2/rel3 in
    /// (0,1) for corr, in (-1,1) excluding 0 for free, in (0,1) for
    /// cronbach/hs (as reliabilities).
    pub fn validate_for(&self, method: Method) -> Result<()> {
        if self.r1.is_nan() || self.r1.abs() >= 1.0 {
            return Err(Error::CorrelationOutOfRange { value: self.r1 });
        }
        for rel in [self.rel2, self.rel3] {
            match method {
                Method::Corr => {
                    if rel.is_nan() || rel <= 0.0 || rel >= 1.0 {
                        return Err(Error::CorrelationOutOfRange { value: rel });
                    }
                }
                Method::Free => {
                    if rel.is_nan() || rel == 0.0 || rel.abs() >= 1.0 {
                        return Err(Error::CorrelationOutOfRange { value: rel });
                    }
                }
                Method::Cronbach | Method::Hs => {
                    if rel.is_nan() || rel <= 0.0 || rel >= 1.0 {
                        return Err(Error::ReliabilityOutOfRange {
                            value: rel,
                            expected: "(0, 1)",
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The same triple with the roles of the second and third estimates
    /// exchanged.
    pub fn swapped(&self) -> Self {
        EstimateSet::new(self.r1, self.rel3, self.rel2)
    }
}

/// Sample sizes for the three estimates, plus testlet counts when the
/// reliabilities come from coefficient alpha (required by cronbach only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StudyDesign {
    pub n1: u32,
    pub n2: u32,
    pub n3: u32,
    pub testlets: Option<(u32, u32)>,
}

impl StudyDesign {
    pub fn new(n1: u32, n2: u32, n3: u32) -> Self {
        StudyDesign {
            n1,
            n2,
            n3,
            testlets: None,
        }
    }

    pub fn with_testlets(n1: u32, n2: u32, n3: u32, k2: u32, k3: u32) -> Self {
        StudyDesign {
            n1,
            n2,
            n3,
            testlets: Some((k2, k3)),
        }
    }

    /// All three estimates share one sample size.
    pub fn same_n(n: u32) -> Self {
        StudyDesign::new(n, n, n)
    }

    pub fn validate_for(&self, method: Method) -> Result<()> {
        for n in [self.n1, self.n2, self.n3] {
            if n < 4 {
                return Err(Error::SampleSizeTooSmall { min: 4, got: n });
            }
        }
        if let Some((k2, k3)) = self.testlets {
            for k in [k2, k3] {
                if k < 2 {
                    return Err(Error::TestletCountTooSmall { got: k });
                }
            }
        } else if method == Method::Cronbach {
            return Err(Error::MissingTestletCounts);
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        StudyDesign {
            n1: self.n1,
            n2: self.n3,
            n3: self.n2,
            testlets: self.testlets.map(|(k2, k3)| (k3, k2)),
        }
    }
}

/// Result of a p-value computation. For corr/free/cronbach, `nuisance` holds
/// the minimizing pair and `objective` the minimized quadratic form Q*, so
/// p = 1 - chisq3_cdf(objective). For hs, `nuisance` is absent and
/// `objective` is the squared z statistic.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PValueResult {
    pub p: Probability,
    pub nuisance: Option<(f64, f64)>,
    pub objective: f64,
}

/// The plug-in point estimate r1/(r2 r3), with square roots taken first when
/// the inputs are reliabilities. Not clipped; its magnitude may exceed 1.
pub fn point_estimate(est: &EstimateSet, method: Method) -> Result<f64> {
    est.validate_for(method)?;
    let (r2, r3) = if method.takes_reliabilities() {
        (est.rel2.sqrt(), est.rel3.sqrt())
    } else {
        (est.rel2, est.rel3)
    };
    Ok(est.r1 / (r2 * r3))
}

/// The quadratic form sum_i (eta_i - s_i)^2 / d_i.
pub fn quadratic_objective(eta: [f64; 3], s: [f64; 3], d: [f64; 3]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..3 {
        if d[i].is_nan() || d[i] <= 0.0 {
            return Err(Error::NonpositiveVariance { value: d[i] });
        }
        let e = eta[i] - s[i];
        total += e * e / d[i];
    }
    Ok(total)
}

/// P-value for H0: rho = rho0.
///
/// Corr/free/cronbach solve the nuisance minimization and refer Q* to the
/// chi-squared distribution with three degrees of freedom; hs is the normal
/// test z = (r1 - rho0 sqrt(R2 R3)) sqrt(N1 - 1)/(1 - r1^2). rho0 must lie in
/// [-1, 1] for the model-based methods; hs accepts any finite rho0.
pub fn pvalue(
    rho0: f64,
    est: &EstimateSet,
    design: &StudyDesign,
    method: Method,
) -> Result<PValueResult> {
    est.validate_for(method)?;
    design.validate_for(method)?;
    if method == Method::Hs {
        if rho0.is_nan() || rho0.is_infinite() {
            return Err(Error::RhoOutOfRange { value: rho0 });
        }
        let z = hs_z(rho0, est, design);
        let p = Probability::new((2.0 * normal_cdf(-z.abs()).value()).min(1.0))
            .expect("doubled lower-tail probability is within [0, 1]");
        return Ok(PValueResult {
            p,
            nuisance: None,
            objective: z * z,
        });
    }
    let (nuisance, objective) = solve_nuisance(rho0, est, design, method)?;
    let p = crate::transforms::chisq3_cdf(objective)?.complement();
    Ok(PValueResult {
        p,
        nuisance: Some(nuisance),
        objective,
    })
}

fn hs_z(rho0: f64, est: &EstimateSet, design: &StudyDesign) -> f64 {
    let r2 = est.rel2.sqrt();
    let r3 = est.rel3.sqrt();
    (est.r1 - rho0 * r2 * r3) * f64::from(design.n1 - 1).sqrt() / (1.0 - est.r1 * est.r1)
}

/// The hs confidence interval at the given level: raw endpoints
/// center ± z_{(1+level)/2} (1 - r1^2)/(sqrt(N1 - 1) r2 r3), and their
/// intersection with [-1, 1] (`None` when the raw interval lies entirely
/// outside).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HsInterval {
    pub raw: (f64, f64),
    pub clipped: Option<(f64, f64)>,
}

pub fn hs_interval(
    est: &EstimateSet,
    design: &StudyDesign,
    level: Probability,
) -> Result<HsInterval> {
    est.validate_for(Method::Hs)?;
    design.validate_for(Method::Hs)?;
    let lv = level.value();
    if lv <= 0.0 || lv >= 1.0 {
        return Err(Error::ProbabilityOutOfRange {
            value: lv,
            expected: "(0, 1)",
        });
    }
    let z = normal_quantile(Probability::new((1.0 + lv) / 2.0)?)?;
    let r2 = est.rel2.sqrt();
    let r3 = est.rel3.sqrt();
    let center = est.r1 / (r2 * r3);
    let half_width = z * (1.0 - est.r1 * est.r1) / (f64::from(design.n1 - 1).sqrt() * r2 * r3);
    let raw = (center - half_width, center + half_width);
    let lo = raw.0.max(-1.0);
    let hi = raw.1.min(1.0);
    let clipped = if lo <= hi { Some((lo, hi)) } else { None };
    Ok(HsInterval { raw, clipped })
}
