//! Scalar transforms and distribution functions shared by every method.
//!
//! All functions here are pure and safe for unrestricted concurrent use.

use crate::error::{Error, Result};

/// A value on the z scale: either artanh of a correlation or ½·log(1−R) of a
/// reliability. Unbounded but always finite.
pub type ZScale = f64;

/// A probability in [0, 1]. NaN and out-of-range values cannot be constructed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange {
                value,
                expected: "[0, 1]",
            });
        }
        Ok(Probability(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// 1 − p, exact at the endpoints.
    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Fisher transform ½·ln((1+x)/(1−x)) of a correlation.
pub fn artanh(x: f64) -> Result<ZScale> {
    if x.is_nan() || x.abs() >= 1.0 {
        return Err(Error::CorrelationOutOfRange { value: x });
    }
    Ok(x.atanh())
}

/// Inverse of [`artanh`]; maps the z scale back to (−1, 1).
pub fn tanh(z: ZScale) -> f64 {
    z.tanh()
}

/// Variance 1/(n−3) of the Fisher-transformed sample correlation.
pub fn fisher_variance(n: u32) -> Result<f64> {
    if n < 4 {
        return Err(Error::SampleSizeTooSmall { min: 4, got: n });
    }
    Ok(1.0 / f64::from(n - 3))
}

/// The reliability transform ½·ln(1−R), the scale on which coefficient alpha
/// is asymptotically normal. Strictly decreasing; nonpositive on [0, 1).
pub fn alpha_eta(r: f64) -> Result<ZScale> {
    if r.is_nan() || !(0.0..1.0).contains(&r) {
        return Err(Error::ReliabilityOutOfRange {
            value: r,
            expected: "[0, 1)",
        });
    }
    Ok(0.5 * (-r).ln_1p())
}

/// Asymptotic variance k/(2(k−1)n) of ½·log(1−α̂) with k testlets and n
/// observations.
pub fn alpha_variance(n: u32, k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::TestletCountTooSmall { got: k });
    }
    if n < 1 {
        return Err(Error::SampleSizeTooSmall { min: 1, got: n });
    }
    Ok(f64::from(k) / (2.0 * f64::from(k - 1) * f64::from(n)))
}

/// Standard normal CDF via the complementary error function,
/// Φ(z) = erfc(−z/√2)/2. Absolute error well below 1e−10 everywhere.
pub fn normal_cdf(z: f64) -> Probability {
    Probability((0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)).clamp(0.0, 1.0))
}

/// Standard normal quantile. A rational initial approximation is polished by
/// Newton steps against [`normal_cdf`], so the pair is self-consistent to
/// better than 1e−9.
pub fn normal_quantile(p: Probability) -> Result<f64> {
    let pv = p.value();
    if pv <= 0.0 || pv >= 1.0 {
        return Err(Error::ProbabilityOutOfRange {
            value: pv,
            expected: "(0, 1)",
        });
    }
    // Abramowitz & Stegun 26.2.23 for the lower tail, reflected for the upper.
    let tail = pv.min(1.0 - pv);
    let t = (-2.0 * tail.ln()).sqrt();
    let num = 2.515517 + t * (0.802853 + t * 0.010328);
    let den = 1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308));
    let mut z = -(t - num / den);
    if pv > 0.5 {
        z = -z;
    }
    for _ in 0..3 {
        let err = normal_cdf(z).value() - pv;
        let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf <= f64::MIN_POSITIVE {
            break;
        }
        z -= err / pdf;
    }
    Ok(z)
}

/// CDF of the chi-squared distribution with three degrees of freedom, using
/// the odd-degrees closed form F(x) = 2Φ(√x) − 1 − √(2x/π)·e^(−x/2).
pub fn chisq3_cdf(x: f64) -> Result<Probability> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::NegativeChiSquaredArgument { value: x });
    }
    let root = x.sqrt();
    let f = 2.0 * normal_cdf(root).value()
        - 1.0
        - (2.0 * x / std::f64::consts::PI).sqrt() * (-0.5 * x).exp();
    Ok(Probability(f.clamp(0.0, 1.0)))
}

/// Density of the chi-squared distribution with three degrees of freedom.
fn chisq3_pdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x / (2.0 * std::f64::consts::PI)).sqrt() * (-0.5 * x).exp()
}

/// Quantile of the chi-squared distribution with three degrees of freedom:
/// the x with chisq3_cdf(x) = p, located by a bisection/Newton hybrid on
/// [0, 200] to |Δp| ≤ 1e−10.
pub fn chisq3_quantile(p: Probability) -> Result<f64> {
    let pv = p.value();
    if pv >= 1.0 {
        return Err(Error::ProbabilityOutOfRange {
            value: pv,
            expected: "[0, 1)",
        });
    }
    if pv == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 200.0_f64);
    let mut x = 3.0;
    for _ in 0..200 {
        let err = chisq3_cdf(x)?.value() - pv;
        if err.abs() <= 1e-10 {
            return Ok(x);
        }
        if err > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = chisq3_pdf(x);
        let newton = x - err / slope;
        // Fall back to bisection whenever Newton leaves the bracket.
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}
